//! Held-out evaluation: chronological train/test splits, full-network
//! log-likelihood, and the mean test log-likelihood per event for CHIP and a
//! block-wise homogeneous Poisson baseline.
//!
//! The test score is `LL(full log, T) − LL(train log, T_train)` with the
//! parameters fitted on the training log, i.e. the log-likelihood of the
//! test events conditioned on the training history, divided by the number of
//! test events.

use serde::{Deserialize, Serialize};

use crate::community::{BlockMatrix, CommunityAssignment};
use crate::error::{domain, ChipError, Result};
use crate::estimation::{block_pair_stats, fit_with_assignment, BlockParamEstimates, ChipFit, FitConfig};
use crate::hawkes::log_likelihood_raw;
use crate::matrix::{CountMatrix, Mode};
use crate::network::{EventLog, EventNetwork, PairSeries};
use crate::par;
use crate::spectral::cluster_counts;

/// Smallest rate used when scoring; block pairs with no training events
/// otherwise give `log 0` on their first test event.
pub const RATE_FLOOR: f64 = 1e-10;

/// Chronological split. The training log ends at its last event time; the
/// test log shares the horizon of the original.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitLog {
    pub train: EventLog,
    pub test: EventLog,
}

impl SplitLog {
    pub fn train_horizon(&self) -> f64 {
        self.train.horizon()
    }

    pub fn horizon(&self) -> f64 {
        self.test.horizon()
    }

    /// Reassembles the original log.
    pub fn merge(&self) -> Result<EventLog> {
        EventLog::concat(&self.train, &self.test, self.horizon())
    }
}

/// Puts the last `test_count` events in the test set.
pub fn split_by_count(log: &EventLog, test_count: usize) -> Result<SplitLog> {
    let total = log.len();
    if test_count == 0 || test_count >= total {
        return domain(format!("test size must lie in 1..{total}, got {test_count}"));
    }
    let events = log.events();
    let cut = total - test_count;
    let t_train = events[cut - 1].time;
    if events[cut].time <= t_train {
        return domain(format!("split point falls inside tied timestamps at {t_train}"));
    }
    if t_train <= 0.0 {
        return domain("training events all occur at time 0");
    }
    Ok(SplitLog {
        train: EventLog::new(events[..cut].to_vec(), log.n(), t_train)?,
        test: EventLog::new(events[cut..].to_vec(), log.n(), log.horizon())?,
    })
}

/// Puts the last `round(fraction · l)` events in the test set.
pub fn split_by_fraction(log: &EventLog, fraction: f64) -> Result<SplitLog> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return domain(format!("test fraction must lie in (0, 1), got {fraction}"));
    }
    split_by_count(log, (fraction * log.len() as f64).round() as usize)
}

/// Sum over all ordered node pairs of the Hawkes log-likelihood on
/// `[0, horizon]` under the parameters of the pair's block pair. Pairs
/// without events contribute `−μ T`. Rates are floored at `rate_floor`.
pub fn full_log_likelihood_floored(
    params: &BlockParamEstimates,
    c: &CommunityAssignment,
    net: &EventNetwork,
    horizon: f64,
    rate_floor: f64,
) -> Result<f64> {
    let k = params.k;
    if c.k() != k || c.n() != net.n() {
        return domain("assignment does not match the network or the parameters");
    }
    if !(horizon > 0.0) {
        return domain("horizon must be positive");
    }
    for a in 0..k {
        for b in 0..k {
            let (mu, alpha, beta) = params.params(a, b);
            if !(mu >= 0.0 && alpha >= 0.0 && beta > 0.0 && alpha < beta) {
                return domain(format!("block pair ({}, {}) parameters are not stationary", a + 1, b + 1));
            }
        }
    }
    let mu = params.mu_hat.map(|&m| m.max(rate_floor));
    let pairs = net.pairs();
    let terms = par::map_slice(pairs, |p: &PairSeries| {
        let (a, b) = (c.label(p.sender), c.label(p.receiver));
        let (_, alpha, beta) = params.params(a, b);
        log_likelihood_raw(*mu.get(a, b), alpha, beta, &p.times, horizon)
    });
    let mut nonempty = BlockMatrix::filled(k, 0usize);
    for p in pairs {
        let (a, b) = (c.label(p.sender), c.label(p.receiver));
        let v = *nonempty.get(a, b);
        nonempty.set(a, b, v + 1);
    }
    let n_pairs = c.pair_counts();
    let mut empty_terms = Vec::with_capacity(k * k);
    for a in 0..k {
        for b in 0..k {
            let empty = n_pairs.get(a, b) - nonempty.get(a, b);
            empty_terms.push(-mu.get(a, b) * horizon * empty as f64);
        }
    }
    let ll = par::ordered_sum(&terms) + par::ordered_sum(&empty_terms);
    if ll.is_finite() {
        Ok(ll)
    } else {
        Err(ChipError::Numerical(format!("network log-likelihood is not finite ({ll})")))
    }
}

/// [`full_log_likelihood_floored`] without a rate floor.
pub fn full_log_likelihood(params: &BlockParamEstimates, c: &CommunityAssignment, net: &EventNetwork, horizon: f64) -> Result<f64> {
    full_log_likelihood_floored(params, c, net, horizon, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Chip,
    Poisson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub dataset: String,
    pub k: usize,
    pub model: ModelKind,
    pub test_ll_per_event: f64,
    pub n: usize,
    pub l_train: usize,
    pub l_test: usize,
    pub seed: u64,
}

/// Blocks fitted on the training log.
#[derive(Debug, Clone)]
pub struct TrainAssignment {
    /// Labels for all `n` nodes; nodes without training events sit in the
    /// largest block.
    pub assignment: CommunityAssignment,
    /// Nodes with at least one training event, ascending.
    pub active: Vec<usize>,
}

/// Clusters the nodes active in `train` and places the rest in the largest
/// block.
pub fn train_assignment(train: &EventLog, k: usize, config: &FitConfig) -> Result<TrainAssignment> {
    let active = active_nodes(train);
    if k == 0 || k > active.len() {
        return domain(format!("need 1 <= k <= {} active training nodes, got k = {k}", active.len()));
    }
    let counts = CountMatrix::from_log(train, config.mode).submatrix(&active);
    let sub = cluster_counts(&counts, config.matrix, k, config.seed, &config.spectral)?;
    let largest = sub.largest_block();
    let mut labels = vec![largest; train.n()];
    for (idx, &node) in active.iter().enumerate() {
        labels[node] = sub.label(idx);
    }
    Ok(TrainAssignment { assignment: CommunityAssignment::new(labels, k)?, active })
}

fn active_nodes(log: &EventLog) -> Vec<usize> {
    let mut seen = vec![false; log.n()];
    for e in log.events() {
        seen[e.sender] = true;
        seen[e.receiver] = true;
    }
    (0..log.n()).filter(|&i| seen[i]).collect()
}

/// Network restricted to `nodes` (ascending), relabelled `0..nodes.len()`.
fn restrict(net: &EventNetwork, nodes: &[usize]) -> EventNetwork {
    let mut index = vec![usize::MAX; net.n()];
    for (new, &old) in nodes.iter().enumerate() {
        index[old] = new;
    }
    let pairs = net
        .pairs()
        .iter()
        .filter(|p| index[p.sender] != usize::MAX && index[p.receiver] != usize::MAX)
        .map(|p| PairSeries { sender: index[p.sender], receiver: index[p.receiver], times: p.times.clone() })
        .collect();
    EventNetwork::from_pairs(nodes.len(), net.horizon(), pairs)
}

fn check_split(split: &SplitLog) -> Result<()> {
    if split.test.is_empty() {
        return domain("test set is empty");
    }
    if split.train.n() != split.test.n() {
        return domain("train and test logs cover different node sets");
    }
    Ok(())
}

/// CHIP evaluation: fitted model plus its held-out score.
#[derive(Debug, Clone)]
pub struct ChipEvaluation {
    pub result: EvalResult,
    /// Fit on the active training nodes.
    pub fit: ChipFit,
    pub assignment: TrainAssignment,
}

/// Fits CHIP on the training log and scores the test events.
pub fn mean_test_loglik_per_event(split: &SplitLog, k: usize, config: &FitConfig) -> Result<ChipEvaluation> {
    check_split(split)?;
    let ta = train_assignment(&split.train, k, config)?;
    mean_test_loglik_with_assignment(split, ta, config)
}

/// As [`mean_test_loglik_per_event`] with the training blocks given.
pub fn mean_test_loglik_with_assignment(split: &SplitLog, ta: TrainAssignment, config: &FitConfig) -> Result<ChipEvaluation> {
    check_split(split)?;
    let full_log = split.merge()?;
    let train_net = EventNetwork::from_log(&split.train)?;
    let full_net = EventNetwork::from_log(&full_log)?;
    let sub_labels: Vec<usize> = ta.active.iter().map(|&i| ta.assignment.label(i)).collect();
    let sub_assignment = CommunityAssignment::new(sub_labels, ta.assignment.k())?;
    let fit = fit_with_assignment(&restrict(&train_net, &ta.active), &sub_assignment, config)?;
    let ll_full = full_log_likelihood_floored(&fit.estimates, &ta.assignment, &full_net, split.horizon(), RATE_FLOOR)?;
    let ll_train =
        full_log_likelihood_floored(&fit.estimates, &ta.assignment, &train_net, split.train_horizon(), RATE_FLOOR)?;
    let result = EvalResult {
        dataset: String::new(),
        k: ta.assignment.k(),
        model: ModelKind::Chip,
        test_ll_per_event: (ll_full - ll_train) / split.test.len() as f64,
        n: full_log.n(),
        l_train: split.train.len(),
        l_test: split.test.len(),
        seed: config.seed,
    };
    Ok(ChipEvaluation { result, fit, assignment: ta })
}

/// Poisson baseline evaluation.
#[derive(Debug, Clone)]
pub struct PoissonEvaluation {
    pub result: EvalResult,
    /// `λ̂_ab = N̄_ab / T_train` over the active training nodes.
    pub rates: BlockMatrix<f64>,
    pub assignment: TrainAssignment,
}

/// Same blocks and protocol with a homogeneous Poisson process per pair.
pub fn poisson_baseline(split: &SplitLog, k: usize, config: &FitConfig) -> Result<PoissonEvaluation> {
    check_split(split)?;
    let ta = train_assignment(&split.train, k, config)?;
    poisson_baseline_with_assignment(split, ta, config)
}

pub fn poisson_baseline_with_assignment(split: &SplitLog, ta: TrainAssignment, config: &FitConfig) -> Result<PoissonEvaluation> {
    check_split(split)?;
    let k = ta.assignment.k();
    let sub_labels: Vec<usize> = ta.active.iter().map(|&i| ta.assignment.label(i)).collect();
    let sub_assignment = CommunityAssignment::new(sub_labels, k)?;
    let counts = CountMatrix::from_log(&split.train, Mode::Directed).submatrix(&ta.active);
    let stats = block_pair_stats(&counts, &sub_assignment)?;
    let t_train = split.train_horizon();
    let rates = stats.map(|s| s.mean / t_train);
    let floored = rates.map(|&r| r.max(RATE_FLOOR));
    // LL(full) − LL(train) = Σ_test log λ − Σ_pairs λ (T − T_train)
    let n_pairs = ta.assignment.pair_counts();
    let gap = split.horizon() - t_train;
    let mut compensator = Vec::with_capacity(k * k);
    for a in 0..k {
        for b in 0..k {
            compensator.push(-floored.get(a, b) * gap * *n_pairs.get(a, b) as f64);
        }
    }
    let logs: Vec<f64> = split
        .test
        .events()
        .iter()
        .map(|e| floored.get(ta.assignment.label(e.sender), ta.assignment.label(e.receiver)).ln())
        .collect();
    let ll = par::ordered_sum(&logs) + par::ordered_sum(&compensator);
    let result = EvalResult {
        dataset: String::new(),
        k,
        model: ModelKind::Poisson,
        test_ll_per_event: ll / split.test.len() as f64,
        n: split.test.n(),
        l_train: split.train.len(),
        l_test: split.test.len(),
        seed: config.seed,
    };
    Ok(PoissonEvaluation { result, rates, assignment: ta })
}
