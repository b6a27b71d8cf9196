use chip_core::likelihood::{mean_test_loglik_per_event, poisson_baseline, split_by_fraction};
use chip_core::network::{expand_simplified, sample_counts, sample_network};
use chip_core::{CommunityAssignment, Event, EventLog, FitConfig, SimplifiedSpec};

fn spec(n: usize, mu1: f64, mu2: f64, m: f64, horizon: f64) -> SimplifiedSpec {
    SimplifiedSpec { n, k: 2, mu1, alpha1: m * 2.0, beta1: 2.0, mu2, alpha2: m * 2.0, beta2: 2.0, horizon }
}

/// Two-sample Kolmogorov–Smirnov statistic.
fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn pairs_in_a_block_pair_are_exchangeable() {
    let s = expand_simplified(&spec(12, 0.2, 0.05, 0.5, 20.0)).unwrap();
    let c = CommunityAssignment::balanced(12, 2).unwrap();
    let reps = 400;
    let draws: Vec<_> = (0..reps).map(|r| sample_counts(&s, &c, 1000 + r).unwrap()).collect();
    // nodes 0, 2, 4, 6 share block 0; nodes 1, 3 share block 1
    let critical = 1.358 * (2.0 / reps as f64).sqrt();
    for ((i, j), (u, v)) in [((0, 2), (4, 6)), ((2, 0), (6, 4)), ((0, 1), (4, 3)), ((1, 0), (3, 4))] {
        let a: Vec<f64> = draws.iter().map(|m| m.get(i, j) as f64).collect();
        let b: Vec<f64> = draws.iter().map(|m| m.get(u, v) as f64).collect();
        let d = ks_statistic(&a, &b);
        assert!(d < critical, "pairs ({i},{j}) and ({u},{v}): D = {d} >= {critical}");
    }
}

#[test]
fn chip_beats_poisson_on_bursty_data() {
    let s = expand_simplified(&spec(30, 0.02, 0.005, 0.8, 300.0)).unwrap();
    let c = CommunityAssignment::balanced(30, 2).unwrap();
    for seed in 0..20 {
        let log = sample_network(&s, &c, seed).unwrap().network.to_log();
        let split = split_by_fraction(&log, 0.2).unwrap();
        let config = FitConfig { seed, ..FitConfig::default() };
        let chip = mean_test_loglik_per_event(&split, 2, &config).unwrap().result.test_ll_per_event;
        let poisson = poisson_baseline(&split, 2, &config).unwrap().result.test_ll_per_event;
        assert!(chip > poisson, "seed {seed}: CHIP {chip} <= Poisson {poisson}");
    }
}

#[test]
fn test_loglik_is_invariant_to_node_relabelling() {
    let s = expand_simplified(&spec(40, 0.05, 0.002, 0.5, 200.0)).unwrap();
    let c = CommunityAssignment::balanced(40, 2).unwrap();
    let log = sample_network(&s, &c, 9).unwrap().network.to_log();
    let perm: Vec<usize> = (0..40).map(|i| (i * 7 + 3) % 40).collect();
    let events: Vec<Event> = log
        .events()
        .iter()
        .map(|e| Event { sender: perm[e.sender], receiver: perm[e.receiver], time: e.time })
        .collect();
    let relabelled = EventLog::new(events, 40, log.horizon()).unwrap();
    let config = FitConfig::default();
    let ll = |l: &EventLog| {
        let split = split_by_fraction(l, 0.2).unwrap();
        mean_test_loglik_per_event(&split, 2, &config).unwrap().result.test_ll_per_event
    };
    let (a, b) = (ll(&log), ll(&relabelled));
    assert!((a - b).abs() <= 1e-9 * a.abs(), "{a} vs {b}");
}

#[cfg(feature = "parallel")]
#[test]
fn thread_count_does_not_change_results() {
    use chip_core::experiments::{run_experiment, ExperimentConfig};
    let mut config = ExperimentConfig::preset("fig4").unwrap();
    config.replicates = 3;
    config.grid.n = vec![40, 60];
    config.grid.horizon = vec![2000.0];
    let on = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_experiment(&config).unwrap())
    };
    assert_eq!(on(1), on(3));
}
