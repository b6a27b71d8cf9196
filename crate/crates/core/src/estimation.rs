//! Parameter estimation given block assignments.
//!
//! For each ordered block pair the count sample mean `N̄` and unbiased
//! variance `S²` give moment estimates
//!
//! ```text
//! m̂ = 1 − sqrt(N̄ / S²)        μ̂ = sqrt(N̄³ / S²) / T
//! ```
//!
//! by inverting the long-run Hawkes count moments `ν = μT/(1−m)` and
//! `σ² = μT/(1−m)³`. With `m̂, μ̂` fixed the Hawkes log-likelihood depends only
//! on `β`, which is found by a bounded line search; then `α̂ = β̂ m̂`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::community::{BlockMatrix, CommunityAssignment};
use crate::error::{domain, Result};
use crate::golden::log_bracketed_max;
use crate::hawkes::{profiled_raw, HawkesParams};
use crate::matrix::{CountMatrix, MatrixKind, Mode};
use crate::network::EventNetwork;
use crate::par;
use crate::spectral::{cluster_counts, SpectralConfig};

/// Upper clamp for `m̂`, keeping fitted models stationary.
pub const M_CEILING: f64 = 1.0 - 1e-6;

/// Count statistics of one ordered block pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockPairStats {
    /// Ordered node pairs in the block pair.
    pub n_pairs: usize,
    /// Total events over those pairs.
    pub events: u64,
    pub mean: f64,
    /// Unbiased sample variance; 0 when `n_pairs < 2`.
    pub variance: f64,
    /// Fewer than two node pairs, so the variance is undefined.
    pub degenerate: bool,
}

/// Sample mean and unbiased variance of `N_ij` over each ordered block pair,
/// structural zeros included and self-pairs excluded.
pub fn block_pair_stats(counts: &CountMatrix, c: &CommunityAssignment) -> Result<BlockMatrix<BlockPairStats>> {
    if counts.n() != c.n() {
        return domain(format!("count matrix has {} nodes, assignment {}", counts.n(), c.n()));
    }
    let k = c.k();
    let n_pairs = c.pair_counts();
    let mut sums = BlockMatrix::filled(k, 0u64);
    for i in 0..counts.n() {
        let a = c.label(i);
        for &(j, v) in counts.row(i) {
            let b = c.label(j);
            let cur = *sums.get(a, b);
            sums.set(a, b, cur + v as u64);
        }
    }
    let means = BlockMatrix::from_fn(k, |a, b| {
        let np = *n_pairs.get(a, b);
        if np == 0 {
            0.0
        } else {
            *sums.get(a, b) as f64 / np as f64
        }
    });
    // Σ (x − x̄)² over nonzeros, then add the zeros' share
    let mut sq = BlockMatrix::filled(k, 0.0f64);
    let mut nonzero = BlockMatrix::filled(k, 0usize);
    for i in 0..counts.n() {
        let a = c.label(i);
        for &(j, v) in counts.row(i) {
            if i == j {
                continue;
            }
            let b = c.label(j);
            let dev = v as f64 - means.get(a, b);
            let cur = *sq.get(a, b);
            sq.set(a, b, cur + dev * dev);
            let nz = *nonzero.get(a, b);
            nonzero.set(a, b, nz + 1);
        }
    }
    Ok(BlockMatrix::from_fn(k, |a, b| {
        let np = *n_pairs.get(a, b);
        let mean = *means.get(a, b);
        let zeros = np.saturating_sub(*nonzero.get(a, b));
        let ss = sq.get(a, b) + zeros as f64 * mean * mean;
        let degenerate = np < 2;
        BlockPairStats {
            n_pairs: np,
            events: *sums.get(a, b),
            mean,
            variance: if degenerate { 0.0 } else { ss / (np - 1) as f64 },
            degenerate,
        }
    }))
}

/// Conditions recorded while estimating a block pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateFlag {
    /// Fewer than two node pairs.
    DegenerateStats,
    /// No events, or zero sample variance: `m̂ = 0`, `μ̂ = N̄/T`.
    PoissonFallback,
    /// `S² < N̄` pushed `m̂` below 0.
    ClampedLow,
    /// `m̂` reached the stationarity ceiling.
    ClampedHigh,
    /// The profiled likelihood is flat in `β` (`m̂ = 0` or no events).
    BetaUnidentified,
}

/// Flag attached to block pair `(a, b)`, 1-based in serialised form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlaggedCell {
    pub a: usize,
    pub b: usize,
    pub flag: EstimateFlag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimates {
    pub m_hat: BlockMatrix<f64>,
    pub mu_hat: BlockMatrix<f64>,
    pub flags: Vec<FlaggedCell>,
}

/// Moment estimates of `(m, μ)` for one block pair.
pub fn moment_estimate_cell(stats: &BlockPairStats, horizon: f64) -> (f64, f64, Vec<EstimateFlag>) {
    let mut flags = Vec::new();
    if stats.degenerate {
        flags.push(EstimateFlag::DegenerateStats);
    }
    if stats.degenerate || stats.mean <= 0.0 || stats.variance <= 0.0 {
        flags.push(EstimateFlag::PoissonFallback);
        return (0.0, stats.mean / horizon, flags);
    }
    let ratio = stats.mean / stats.variance;
    let raw_m = 1.0 - ratio.sqrt();
    let mu = (stats.mean.powi(3) / stats.variance).sqrt() / horizon;
    let m = if raw_m < 0.0 {
        flags.push(EstimateFlag::ClampedLow);
        0.0
    } else if raw_m > M_CEILING {
        flags.push(EstimateFlag::ClampedHigh);
        M_CEILING
    } else {
        raw_m
    };
    (m, mu, flags)
}

pub fn moment_estimates(stats: &BlockMatrix<BlockPairStats>, horizon: f64) -> Result<MomentEstimates> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return domain(format!("horizon must be positive, got {horizon}"));
    }
    let k = stats.k();
    let mut m_hat = BlockMatrix::filled(k, 0.0);
    let mut mu_hat = BlockMatrix::filled(k, 0.0);
    let mut flags = Vec::new();
    for a in 0..k {
        for b in 0..k {
            let (m, mu, f) = moment_estimate_cell(stats.get(a, b), horizon);
            m_hat.set(a, b, m);
            mu_hat.set(a, b, mu);
            flags.extend(f.into_iter().map(|flag| FlaggedCell { a: a + 1, b: b + 1, flag }));
        }
    }
    Ok(MomentEstimates { m_hat, mu_hat, flags })
}

/// Bounds and tolerance of the `β` line search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSearchConfig {
    pub lower: f64,
    pub upper: f64,
    /// Absolute tolerance on `β̂`.
    pub tolerance: f64,
    /// Log-spaced scan points used to bracket the maximum.
    pub grid_points: usize,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        Self { lower: 1e-6, upper: 1e4, tolerance: 1e-6, grid_points: 24 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaFit {
    pub beta: f64,
    /// Profiled log-likelihood at `beta`, including pairs without events.
    pub log_likelihood: f64,
    pub identified: bool,
}

/// Maximises the profiled log-likelihood of one block pair over `β`.
///
/// `lists` holds the event times of the block pair's nonempty node pairs;
/// `n_pairs` counts all node pairs, the rest contributing `−μT` each.
pub fn fit_beta(
    lists: &[&[f64]],
    n_pairs: usize,
    m_hat: f64,
    mu_hat: f64,
    horizon: f64,
    config: &LineSearchConfig,
) -> Result<BetaFit> {
    if !(0.0..1.0).contains(&m_hat) {
        return domain(format!("m_hat must lie in [0, 1), got {m_hat}"));
    }
    if !(config.lower > 0.0 && config.upper > config.lower) {
        return domain(format!("invalid beta bounds [{}, {}]", config.lower, config.upper));
    }
    if lists.len() > n_pairs {
        return domain("more event lists than node pairs");
    }
    let empty_pairs = (n_pairs - lists.len()) as f64;
    let constant = -mu_hat * horizon * empty_pairs;
    let has_events = lists.iter().any(|l| !l.is_empty());
    if m_hat == 0.0 || !has_events || mu_hat <= 0.0 {
        let beta = 0.5 * (config.lower + config.upper);
        let ll = if mu_hat > 0.0 { profiled_raw(beta, m_hat, mu_hat, horizon, lists) + constant } else { f64::NAN };
        return Ok(BetaFit { beta, log_likelihood: ll, identified: false });
    }
    let objective = |beta: f64| {
        let v = profiled_raw(beta, m_hat, mu_hat, horizon, lists);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let (beta, ll) = log_bracketed_max(objective, config.lower, config.upper, config.grid_points, config.tolerance);
    Ok(BetaFit { beta, log_likelihood: ll + constant, identified: true })
}

/// Fraction of nodes in each block.
pub fn estimate_pi(c: &CommunityAssignment) -> Vec<f64> {
    let n = c.n().max(1) as f64;
    c.block_sizes().into_iter().map(|s| s as f64 / n).collect()
}

/// Fitted CHIP parameters, exported as JSON with row-major nested matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockParamEstimates {
    pub k: usize,
    pub pi_hat: Vec<f64>,
    pub mu_hat: BlockMatrix<f64>,
    pub alpha_hat: BlockMatrix<f64>,
    pub beta_hat: BlockMatrix<f64>,
    pub m_hat: BlockMatrix<f64>,
    pub flags: Vec<FlaggedCell>,
}

impl BlockParamEstimates {
    pub fn params(&self, a: usize, b: usize) -> (f64, f64, f64) {
        (*self.mu_hat.get(a, b), *self.alpha_hat.get(a, b), *self.beta_hat.get(a, b))
    }

    /// Hawkes parameters of a block pair, if valid (`μ̂ > 0`).
    pub fn hawkes(&self, a: usize, b: usize) -> Result<HawkesParams> {
        let (mu, alpha, beta) = self.params(a, b);
        HawkesParams::new(mu, alpha, beta)
    }

    /// Same model with blocks reordered: block `a` of the result is block
    /// `perm[a]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            k: self.k,
            pi_hat: perm.iter().map(|&p| self.pi_hat[p]).collect(),
            mu_hat: self.mu_hat.permuted(perm),
            alpha_hat: self.alpha_hat.permuted(perm),
            beta_hat: self.beta_hat.permuted(perm),
            m_hat: self.m_hat.permuted(perm),
            flags: self.flags.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitConfig {
    /// Matrix used for spectral clustering.
    pub matrix: MatrixKind,
    /// Directed (singular vectors) or undirected (eigenvectors of `N + Nᵀ`).
    pub mode: Mode,
    pub spectral: SpectralConfig,
    pub line_search: LineSearchConfig,
    pub seed: u64,
}

/// Result of the full estimation procedure.
#[derive(Debug, Clone)]
pub struct ChipFit {
    pub assignment: CommunityAssignment,
    pub stats: BlockMatrix<BlockPairStats>,
    pub estimates: BlockParamEstimates,
    pub beta_fits: BlockMatrix<BetaFit>,
    pub horizon: f64,
}

/// Spectral clustering of the count matrix followed by per-block-pair
/// estimation.
pub fn fit_chip(net: &EventNetwork, k: usize, config: &FitConfig) -> Result<ChipFit> {
    let counts = CountMatrix::from_network(net, config.mode);
    let assignment = cluster_counts(&counts, config.matrix, k, config.seed, &config.spectral)?;
    fit_with_assignment(net, &assignment, config)
}

/// Estimation with communities given (known or previously estimated).
pub fn fit_with_assignment(net: &EventNetwork, assignment: &CommunityAssignment, config: &FitConfig) -> Result<ChipFit> {
    if assignment.n() != net.n() {
        return domain(format!("assignment covers {} nodes, network has {}", assignment.n(), net.n()));
    }
    let k = assignment.k();
    let horizon = net.horizon();
    let counts = CountMatrix::from_network(net, Mode::Directed);
    let stats = block_pair_stats(&counts, assignment)?;
    let moments = moment_estimates(&stats, horizon)?;

    let mut lists: Vec<Vec<&[f64]>> = vec![Vec::new(); k * k];
    for p in net.pairs() {
        let (a, b) = (assignment.label(p.sender), assignment.label(p.receiver));
        lists[a * k + b].push(&p.times);
    }
    let fits: Vec<Result<BetaFit>> = par::map_range(k * k, |cell| {
        let (a, b) = (cell / k, cell % k);
        fit_beta(
            &lists[cell],
            stats.get(a, b).n_pairs,
            *moments.m_hat.get(a, b),
            *moments.mu_hat.get(a, b),
            horizon,
            &config.line_search,
        )
    });
    let fits: Vec<BetaFit> = fits.into_iter().collect::<Result<_>>()?;
    let beta_fits = BlockMatrix::from_fn(k, |a, b| fits[a * k + b]);

    let mut flags = moments.flags.clone();
    for a in 0..k {
        for b in 0..k {
            if !beta_fits.get(a, b).identified {
                flags.push(FlaggedCell { a: a + 1, b: b + 1, flag: EstimateFlag::BetaUnidentified });
            }
        }
    }
    flags.sort_by_key(|f| (f.a, f.b));
    let beta_hat = beta_fits.map(|f| f.beta);
    let alpha_hat = BlockMatrix::from_fn(k, |a, b| beta_hat.get(a, b) * moments.m_hat.get(a, b));
    let estimates = BlockParamEstimates {
        k,
        pi_hat: estimate_pi(assignment),
        mu_hat: moments.mu_hat,
        alpha_hat,
        beta_hat,
        m_hat: moments.m_hat,
        flags,
    };
    Ok(ChipFit { assignment: assignment.clone(), stats, estimates, beta_fits, horizon })
}

/// Symmetric interval `center ± half_width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub center: f64,
    pub half_width: f64,
}

impl Interval {
    pub fn lower(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.center + self.half_width
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower() <= x && x <= self.upper()
    }
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

fn check_level(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta < 1.0) {
        return domain(format!("confidence level theta must lie in (0, 1), got {theta}"));
    }
    Ok(())
}

/// Bonferroni-corrected simultaneous intervals for all `k²` values of `m`:
/// `m̂ ± z_{1−θ/(2k²)} · sqrt(1 / (4 n_ab N̄_ab))`. Cells with `N̄ = 0` have
/// no interval.
pub fn m_confidence_intervals(
    stats: &BlockMatrix<BlockPairStats>,
    m_hat: &BlockMatrix<f64>,
    theta: f64,
) -> Result<BlockMatrix<Option<Interval>>> {
    check_level(theta)?;
    let k = stats.k();
    let z = normal_quantile(1.0 - theta / (2.0 * (k * k) as f64));
    Ok(BlockMatrix::from_fn(k, |a, b| {
        let s = stats.get(a, b);
        (s.mean > 0.0 && s.n_pairs > 0).then(|| Interval {
            center: *m_hat.get(a, b),
            half_width: z * (1.0 / (4.0 * s.n_pairs as f64 * s.mean)).sqrt(),
        })
    }))
}

/// Interval for `μ_first − μ_second` (0-based block pairs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuDifferenceInterval {
    pub first: (usize, usize),
    pub second: (usize, usize),
    /// `None` when either block pair has degenerate statistics.
    pub interval: Option<Interval>,
}

/// Simultaneous intervals for the `2k(k−1)` differences between each
/// diagonal `μ_aa` and the off-diagonal entries sharing its row (`μ_ab`)
/// or column (`μ_ba`):
/// `(μ̂_1 − μ̂_2) ± z_{1−θ/(4k(k−1))} · (1/T) sqrt(9/4 (N̄_1/n_1 + N̄_2/n_2))`.
pub fn mu_pairwise_difference_intervals(
    stats: &BlockMatrix<BlockPairStats>,
    mu_hat: &BlockMatrix<f64>,
    horizon: f64,
    theta: f64,
) -> Result<Vec<MuDifferenceInterval>> {
    check_level(theta)?;
    if !(horizon > 0.0) {
        return domain("horizon must be positive");
    }
    let k = stats.k();
    if k < 2 {
        return Ok(Vec::new());
    }
    let z = normal_quantile(1.0 - theta / (4.0 * (k * (k - 1)) as f64));
    let mut out = Vec::with_capacity(2 * k * (k - 1));
    for a in 0..k {
        for b in 0..k {
            if a == b {
                continue;
            }
            for other in [(a, b), (b, a)] {
                out.push(mu_difference(stats, mu_hat, horizon, z, (a, a), other));
            }
        }
    }
    Ok(out)
}

/// Interval for an arbitrary pair of block pairs at quantile `z`.
pub fn mu_difference(
    stats: &BlockMatrix<BlockPairStats>,
    mu_hat: &BlockMatrix<f64>,
    horizon: f64,
    z: f64,
    first: (usize, usize),
    second: (usize, usize),
) -> MuDifferenceInterval {
    let s1 = stats.get(first.0, first.1);
    let s2 = stats.get(second.0, second.1);
    let interval = (!s1.degenerate && !s2.degenerate).then(|| Interval {
        center: mu_hat.get(first.0, first.1) - mu_hat.get(second.0, second.1),
        half_width: z / horizon * (2.25 * (s1.mean / s1.n_pairs as f64 + s2.mean / s2.n_pairs as f64)).sqrt(),
    });
    MuDifferenceInterval { first, second, interval }
}
