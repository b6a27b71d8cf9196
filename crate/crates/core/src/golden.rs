//! Bounded scalar maximisation.

/// 1/φ, the golden-section shrink factor.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximiser of a unimodal `f` on `[lo, hi]`,
/// stopping once the bracket is narrower than `tol`. Returns `(x, f(x))`.
pub fn golden_section_max(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    // the midpoint is not guaranteed better than the last interior probes
    [(x, fx), (c, fc), (d, fd)]
        .into_iter()
        .fold((x, fx), |best, cand| if cand.1 > best.1 { cand } else { best })
}

/// Maximises `f` on `[lo, hi]` (`lo > 0`) by scanning `grid` log-spaced
/// points, then refining with golden-section search between the neighbours
/// of the best grid point. Robust to very wide brackets where a plain
/// golden search would spend most iterations far from the optimum.
pub fn log_bracketed_max(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, grid: usize, tol: f64) -> (f64, f64) {
    let grid = grid.max(3);
    let (llo, lhi) = (lo.ln(), hi.ln());
    let points: Vec<f64> = (0..grid)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == grid - 1 {
                hi
            } else {
                (llo + (lhi - llo) * i as f64 / (grid - 1) as f64).exp()
            }
        })
        .collect();
    let values: Vec<f64> = points.iter().map(|&x| f(x)).collect();
    let best = values
        .iter()
        .enumerate()
        .fold(0usize, |b, (i, &v)| if v > values[b] { i } else { b });
    let left = points[best.saturating_sub(1)];
    let right = points[(best + 1).min(grid - 1)];
    let refined = golden_section_max(&mut f, left, right, tol);
    if refined.1 >= values[best] {
        refined
    } else {
        (points[best], values[best])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_parabola_peak() {
        let (x, fx) = golden_section_max(|x| -(x - 1.3).powi(2), -5.0, 10.0, 1e-9);
        assert!((x - 1.3).abs() < 1e-8);
        assert!(fx.abs() < 1e-15);
    }

    #[test]
    fn boundary_maximum() {
        let (x, _) = golden_section_max(|x| x, 0.0, 2.0, 1e-7);
        assert!((x - 2.0).abs() < 1e-6);
    }

    #[test]
    fn log_bracket_handles_wide_interval() {
        let (x, _) = log_bracketed_max(|x: f64| -(x.ln() - 0.2f64.ln()).powi(2), 1e-6, 1e4, 24, 1e-9);
        assert!((x - 0.2).abs() < 1e-6);
        let (x, _) = log_bracketed_max(|x: f64| -(x - 9000.0).abs(), 1e-6, 1e4, 24, 1e-6);
        assert!((x - 9000.0).abs() < 1e-5);
    }
}
