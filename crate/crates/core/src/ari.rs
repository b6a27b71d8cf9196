//! Adjusted Rand index between two partitions.

use std::collections::HashMap;

use crate::error::{domain, Result};

fn pairs(x: u64) -> f64 {
    (x as f64) * (x as f64 - 1.0) / 2.0
}

/// Permutation-invariant agreement between two labelings, in `[−1, 1]`.
///
/// Computed from the contingency table. When both partitions are trivial
/// in the same way (single cluster, or all singletons) the index is 1.
pub fn adjusted_rand(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return domain(format!("label vectors differ in length ({} vs {})", a.len(), b.len()));
    }
    let n = a.len() as u64;
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| pairs(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| pairs(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| pairs(c)).sum();
    let total = pairs(n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_a * sum_b / total;
    let max_index = 0.5 * (sum_a + sum_b);
    let denom = max_index - expected;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_is_one() {
        assert_eq!(adjusted_rand(&[0, 0, 1, 1, 2], &[0, 0, 1, 1, 2]).unwrap(), 1.0);
    }

    #[test]
    fn crossed_halves_is_minus_half() {
        assert!((adjusted_rand(&[1, 1, 2, 2], &[1, 2, 1, 2]).unwrap() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn length_mismatch_errors() {
        assert!(adjusted_rand(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn trivial_partitions() {
        assert_eq!(adjusted_rand(&[0, 0, 0], &[5, 5, 5]).unwrap(), 1.0);
        assert_eq!(adjusted_rand(&[0, 1, 2], &[2, 0, 1]).unwrap(), 1.0);
        assert_eq!(adjusted_rand(&[0, 0, 0, 0], &[0, 0, 1, 1]).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn relabeling_and_symmetry(labels in proptest::collection::vec(0usize..4, 2..60), other in proptest::collection::vec(0usize..4, 60)) {
            let relabeled: Vec<usize> = labels.iter().map(|&l| (l + 3) % 4 + 10).collect();
            prop_assert!((adjusted_rand(&labels, &relabeled).unwrap() - 1.0).abs() < 1e-12);
            let b = &other[..labels.len()];
            let ab = adjusted_rand(&labels, b).unwrap();
            let ba = adjusted_rand(b, &labels).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((-1.0..=1.0 + 1e-12).contains(&ab));
        }
    }
}
