//! Simulation studies on the two-value model.
//!
//! An experiment is a grid of model parameters crossed with replicates.
//! Replicate `r` at grid point `g` draws from the seed derived from
//! `(master seed, g, r)`, so results do not depend on execution order or
//! thread count. Outputs are a tidy per-replicate CSV, an aggregated CSV and
//! a JSON manifest.

use std::fmt::Display;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::ari::adjusted_rand;
use crate::bounds::{binary_bound, weighted_bound, SimplifiedTheoryInputs};
use crate::community::{align_blocks, BlockMatrix, CommunityAssignment};
use crate::error::{ChipError, Result};
use crate::estimation::{
    block_pair_stats, fit_with_assignment, m_confidence_intervals, moment_estimates, mu_pairwise_difference_intervals,
    FitConfig,
};
use crate::matrix::{CountMatrix, MatrixKind, Mode};
use crate::network::{expand_simplified, sample_counts, sample_network, ChipModelSpec, SimplifiedSpec};
use crate::spectral::{cluster_counts, SpectralConfig};
use crate::{par, rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Spectral clustering accuracy on `A` and/or `N`.
    Detection,
    /// Parameter recovery: MSE of `μ̂, m̂, α̂, β̂`.
    Estimation,
    /// Empirical coverage of the simultaneous confidence intervals.
    CiCoverage,
}

/// Which baseline rates the `scale` axis multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleTarget {
    #[default]
    Both,
    Mu1,
}

/// Lists of values; the experiment runs their Cartesian product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub n: Vec<usize>,
    pub k: Vec<usize>,
    pub horizon: Vec<f64>,
    pub mu1: Vec<f64>,
    pub mu2: Vec<f64>,
    pub alpha1: Vec<f64>,
    pub alpha2: Vec<f64>,
    pub beta1: Vec<f64>,
    pub beta2: Vec<f64>,
    #[serde(default = "unit_scale")]
    pub scale: Vec<f64>,
}

fn unit_scale() -> Vec<f64> {
    vec![1.0]
}

fn default_replicates() -> usize {
    20
}

fn default_theta() -> f64 {
    0.05
}

fn both_matrices() -> Vec<MatrixKind> {
    vec![MatrixKind::Binary, MatrixKind::Weighted]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub id: String,
    pub kind: ExperimentKind,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: Mode,
    /// Matrices clustered in detection experiments.
    #[serde(default = "both_matrices")]
    pub matrices: Vec<MatrixKind>,
    /// Estimation with the planted blocks instead of spectral clustering.
    #[serde(default)]
    pub known_communities: bool,
    /// Confidence level parameter for coverage experiments.
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default)]
    pub scale_target: ScaleTarget,
    pub grid: ParamGrid,
}

/// Names accepted by [`ExperimentConfig::preset`].
pub const PRESETS: &[&str] = &[
    "fig2a",
    "fig2b",
    "heatmap-fixed-n",
    "heatmap-fixed-t",
    "heatmap-fixed-k",
    "fig4",
    "density-scale-both",
    "density-scale-mu1",
    "binary-vs-weighted",
    "ci-coverage",
];

#[allow(clippy::too_many_arguments)]
fn grid(
    n: &[usize],
    k: &[usize],
    horizon: &[f64],
    (mu1, mu2): (f64, f64),
    (alpha1, alpha2): (f64, f64),
    (beta1, beta2): (f64, f64),
    scale: &[f64],
) -> ParamGrid {
    ParamGrid {
        n: n.to_vec(),
        k: k.to_vec(),
        horizon: horizon.to_vec(),
        mu1: vec![mu1],
        mu2: vec![mu2],
        alpha1: vec![alpha1],
        alpha2: vec![alpha2],
        beta1: vec![beta1],
        beta2: vec![beta2],
        scale: scale.to_vec(),
    }
}

impl ExperimentConfig {
    fn base(id: &str, kind: ExperimentKind, grid: ParamGrid) -> Self {
        Self {
            id: id.to_string(),
            kind,
            replicates: default_replicates(),
            seed: 0,
            mode: Mode::Directed,
            matrices: both_matrices(),
            known_communities: false,
            theta: default_theta(),
            scale_target: ScaleTarget::Both,
            grid,
        }
    }

    /// Built-in configurations for the paper's simulation studies.
    pub fn preset(id: &str) -> Option<Self> {
        use ExperimentKind::*;
        let heat = ((0.085, 0.065), (0.06, 0.06), (0.08, 0.08));
        let dens = ((0.075, 0.065), (0.05, 0.05), (0.08, 0.08));
        let weighted_only = |mut c: Self| {
            c.matrices = vec![MatrixKind::Weighted];
            c
        };
        let cfg = match id {
            "fig2a" => Self::base(
                id,
                Detection,
                grid(&[16, 32, 64, 128, 256, 512], &[4], &[400.0], (0.002, 0.001), (7.0, 7.0), (8.0, 8.0), &[1.0]),
            ),
            "fig2b" => Self::base(
                id,
                Detection,
                grid(&[16, 32, 64, 128, 256, 512], &[4], &[400.0], (0.001, 0.001), (0.006, 0.001), (0.008, 0.008), &[1.0]),
            ),
            "heatmap-fixed-n" => weighted_only(Self::base(
                id,
                Detection,
                grid(&[256], &[2, 4, 8, 16], &[16.0, 32.0, 64.0, 128.0], heat.0, heat.1, heat.2, &[1.0]),
            )),
            "heatmap-fixed-t" => weighted_only(Self::base(
                id,
                Detection,
                grid(&[64, 128, 256, 512], &[2, 4, 8, 16], &[64.0], heat.0, heat.1, heat.2, &[1.0]),
            )),
            "heatmap-fixed-k" => weighted_only(Self::base(
                id,
                Detection,
                grid(&[64, 128, 256, 512], &[8], &[16.0, 32.0, 64.0, 128.0], heat.0, heat.1, heat.2, &[1.0]),
            )),
            "fig4" => Self {
                replicates: 30,
                ..Self::base(
                    id,
                    Estimation,
                    grid(
                        &[90, 130, 180, 260, 370, 500],
                        &[4],
                        &[10_000.0],
                        (0.0011, 0.0010),
                        (0.11, 0.09),
                        (0.14, 0.16),
                        &[1.0],
                    ),
                )
            },
            "density-scale-both" => Self::base(
                id,
                Detection,
                grid(&[128], &[4], &[50.0], dens.0, dens.1, dens.2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0]),
            ),
            "density-scale-mu1" => Self {
                scale_target: ScaleTarget::Mu1,
                ..Self::base(
                    id,
                    Detection,
                    grid(&[128], &[4], &[50.0], dens.0, dens.1, dens.2, &[1.0, 1.25, 1.5, 1.75, 2.0, 2.5, 3.0]),
                )
            },
            "binary-vs-weighted" => Self::base(
                id,
                Detection,
                grid(
                    &[128],
                    &[4],
                    &[50.0],
                    dens.0,
                    dens.1,
                    dens.2,
                    &[0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0],
                ),
            ),
            "ci-coverage" => Self {
                replicates: 500,
                known_communities: true,
                ..Self::base(
                    id,
                    CiCoverage,
                    grid(&[128], &[4], &[10_000.0], (0.0011, 0.0010), (0.11, 0.09), (0.14, 0.16), &[1.0]),
                )
            },
            _ => return None,
        };
        Some(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| ChipError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| ChipError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        let lens = [
            ("n", g.n.len()),
            ("k", g.k.len()),
            ("horizon", g.horizon.len()),
            ("mu1", g.mu1.len()),
            ("mu2", g.mu2.len()),
            ("alpha1", g.alpha1.len()),
            ("alpha2", g.alpha2.len()),
            ("beta1", g.beta1.len()),
            ("beta2", g.beta2.len()),
            ("scale", g.scale.len()),
        ];
        if let Some((name, _)) = lens.iter().find(|(_, l)| *l == 0) {
            return Err(ChipError::Config(format!("grid axis {name} is empty")));
        }
        if self.replicates == 0 {
            return Err(ChipError::Config("replicates must be at least 1".into()));
        }
        if self.kind == ExperimentKind::Detection && self.matrices.is_empty() {
            return Err(ChipError::Config("detection needs at least one matrix".into()));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(ChipError::Config(format!("theta must lie in (0, 1), got {}", self.theta)));
        }
        for &n in &g.n {
            for &k in &g.k {
                if k == 0 || k > n {
                    return Err(ChipError::Config(format!("need 1 <= k <= n, got k = {k}, n = {n}")));
                }
            }
        }
        Ok(())
    }

    /// Replaces one grid axis from `name=v1,v2,...`.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (name, values) =
            spec.split_once('=').ok_or_else(|| ChipError::Config(format!("expected name=values, got {spec:?}")))?;
        let floats = || -> Result<Vec<f64>> {
            values
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| ChipError::Config(format!("bad value {v:?} for {name}"))))
                .collect()
        };
        let ints = || -> Result<Vec<usize>> {
            values
                .split(',')
                .map(|v| v.trim().parse::<usize>().map_err(|_| ChipError::Config(format!("bad value {v:?} for {name}"))))
                .collect()
        };
        let g = &mut self.grid;
        match name.trim() {
            "n" => g.n = ints()?,
            "k" => g.k = ints()?,
            "horizon" | "T" | "t" => g.horizon = floats()?,
            "mu1" => g.mu1 = floats()?,
            "mu2" => g.mu2 = floats()?,
            "alpha1" => g.alpha1 = floats()?,
            "alpha2" => g.alpha2 = floats()?,
            "beta1" => g.beta1 = floats()?,
            "beta2" => g.beta2 = floats()?,
            "scale" => g.scale = floats()?,
            other => return Err(ChipError::Config(format!("unknown grid axis {other:?}"))),
        }
        self.validate()
    }

    /// Grid points in row-major order over `n, k, horizon, mu1, mu2,
    /// alpha1, alpha2, beta1, beta2, scale`.
    pub fn points(&self) -> Vec<GridPoint> {
        let g = &self.grid;
        let mut out = Vec::new();
        for &n in &g.n {
            for &k in &g.k {
                for &horizon in &g.horizon {
                    for &mu1 in &g.mu1 {
                        for &mu2 in &g.mu2 {
                            for &alpha1 in &g.alpha1 {
                                for &alpha2 in &g.alpha2 {
                                    for &beta1 in &g.beta1 {
                                        for &beta2 in &g.beta2 {
                                            for &scale in &g.scale {
                                                out.push(GridPoint {
                                                    index: out.len(),
                                                    n,
                                                    k,
                                                    horizon,
                                                    mu1,
                                                    mu2,
                                                    alpha1,
                                                    alpha2,
                                                    beta1,
                                                    beta2,
                                                    scale,
                                                });
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub index: usize,
    pub n: usize,
    pub k: usize,
    pub horizon: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub scale: f64,
}

impl GridPoint {
    const HEADER: [&'static str; 11] =
        ["grid_index", "n", "k", "horizon", "mu1", "mu2", "alpha1", "alpha2", "beta1", "beta2", "scale"];

    fn record(&self) -> Vec<String> {
        vec![
            self.index.to_string(),
            self.n.to_string(),
            self.k.to_string(),
            self.horizon.to_string(),
            self.mu1.to_string(),
            self.mu2.to_string(),
            self.alpha1.to_string(),
            self.alpha2.to_string(),
            self.beta1.to_string(),
            self.beta2.to_string(),
            self.scale.to_string(),
        ]
    }

    /// Model at this point with the `scale` axis applied.
    pub fn simplified(&self, target: ScaleTarget) -> SimplifiedSpec {
        let (mu1, mu2) = match target {
            ScaleTarget::Both => (self.mu1 * self.scale, self.mu2 * self.scale),
            ScaleTarget::Mu1 => (self.mu1 * self.scale, self.mu2),
        };
        SimplifiedSpec {
            n: self.n,
            k: self.k,
            mu1,
            alpha1: self.alpha1,
            beta1: self.beta1,
            mu2,
            alpha2: self.alpha2,
            beta2: self.beta2,
            horizon: self.horizon,
        }
    }
}

fn opt<T: Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn matrix_label(kind: MatrixKind) -> &'static str {
    match kind {
        MatrixKind::Binary => "A",
        MatrixKind::Weighted => "N",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRow {
    pub point: GridPoint,
    pub replicate: usize,
    pub seed: u64,
    pub matrix: MatrixKind,
    pub ari: Option<f64>,
    /// Fraction of nodes outside their best-matched block.
    pub misclustering: Option<f64>,
    /// Fraction of ordered pairs with at least one event.
    pub density: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSummary {
    pub point: GridPoint,
    pub matrix: MatrixKind,
    pub replicates_ok: usize,
    pub ari_mean: f64,
    pub ari_se: f64,
    pub misclustering_mean: f64,
    pub density_mean: f64,
    pub binary_bound: f64,
    pub weighted_bound: f64,
}

/// Per-replicate squared errors averaged over the k² block pairs, after
/// matching estimated blocks to planted ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamErrors {
    pub mu: f64,
    pub m: f64,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationRow {
    pub point: GridPoint,
    pub replicate: usize,
    pub seed: u64,
    pub ari: Option<f64>,
    pub mse: Option<ParamErrors>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationSummary {
    pub point: GridPoint,
    pub replicates_ok: usize,
    pub ari_mean: f64,
    pub mse_mean: ParamErrors,
    pub mse_se: ParamErrors,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRow {
    pub point: GridPoint,
    pub replicate: usize,
    pub seed: u64,
    /// Every `m` interval contains its true value.
    pub m_covered: Option<bool>,
    /// Every `μ` difference interval contains its true value.
    pub mu_covered: Option<bool>,
    pub m_fraction: Option<f64>,
    pub mu_fraction: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageSummary {
    pub point: GridPoint,
    pub replicates_ok: usize,
    /// Fraction of replicates where the whole `m` family covers.
    pub m_coverage: f64,
    pub mu_coverage: f64,
    /// Mean fraction of individual intervals that cover.
    pub m_interval_coverage: f64,
    pub mu_interval_coverage: f64,
}

/// `−slope` of `log(mean MSE)` against `log n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayRates {
    pub mu: f64,
    pub m: f64,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentData {
    Detection { rows: Vec<DetectionRow>, summary: Vec<DetectionSummary> },
    Estimation { rows: Vec<EstimationRow>, summary: Vec<EstimationSummary>, decay: Option<DecayRates> },
    Coverage { rows: Vec<CoverageRow>, summary: Vec<CoverageSummary> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub points: Vec<GridPoint>,
    pub data: ExperimentData,
}

/// Seed of replicate `replicate` at grid point `index`.
pub fn replicate_seed(master: u64, index: usize, replicate: usize) -> u64 {
    rng::derive_seed(master, &[index as u64, replicate as u64])
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let points = config.points();
    let reps = config.replicates;
    let tasks = points.len() * reps;
    let data = match config.kind {
        ExperimentKind::Detection => {
            let rows: Vec<DetectionRow> = par::map_range(tasks, |t| detection_task(config, &points[t / reps], t % reps))
                .into_iter()
                .flatten()
                .collect();
            let summary = summarise_detection(config, &points, &rows);
            ExperimentData::Detection { rows, summary }
        }
        ExperimentKind::Estimation => {
            let rows = par::map_range(tasks, |t| estimation_task(config, &points[t / reps], t % reps));
            let summary = summarise_estimation(&points, &rows);
            let decay = decay_rates(&summary);
            ExperimentData::Estimation { rows, summary, decay }
        }
        ExperimentKind::CiCoverage => {
            let rows = par::map_range(tasks, |t| coverage_task(config, &points[t / reps], t % reps));
            let summary = summarise_coverage(&points, &rows);
            ExperimentData::Coverage { rows, summary }
        }
    };
    Ok(ExperimentOutput { config: config.clone(), points, data })
}

fn planted(point: &GridPoint, target: ScaleTarget) -> Result<(ChipModelSpec, CommunityAssignment)> {
    let spec = expand_simplified(&point.simplified(target))?;
    let truth = CommunityAssignment::balanced(point.n, point.k)?;
    Ok((spec, truth))
}

fn misclustering(truth: &CommunityAssignment, estimate: &CommunityAssignment) -> Result<f64> {
    let perm = align_blocks(truth, estimate)?;
    let wrong = truth.labels().iter().zip(estimate.labels()).filter(|(&t, &e)| perm[t] != e).count();
    Ok(wrong as f64 / truth.n() as f64)
}

fn detection_task(config: &ExperimentConfig, point: &GridPoint, replicate: usize) -> Vec<DetectionRow> {
    let seed = replicate_seed(config.seed, point.index, replicate);
    let row = |matrix, res: Result<(f64, f64, f64)>| {
        let (ari, mis, dens, error) = match res {
            Ok((a, m, d)) => (Some(a), Some(m), Some(d), None),
            Err(e) => (None, None, None, Some(e.to_string())),
        };
        DetectionRow { point: *point, replicate, seed, matrix, ari, misclustering: mis, density: dens, error }
    };
    let simulated = planted(point, config.scale_target).and_then(|(spec, truth)| {
        let counts = sample_counts(&spec, &truth, seed)?;
        let counts = match config.mode {
            Mode::Directed => counts,
            Mode::Undirected => counts.symmetrised(),
        };
        Ok((counts, truth))
    });
    match simulated {
        Ok((counts, truth)) => config
            .matrices
            .iter()
            .map(|&kind| {
                let res = (|| {
                    let est = cluster_counts(&counts, kind, point.k, rng::derive_seed(seed, &[1]), &SpectralConfig::default())?;
                    let ari = adjusted_rand(truth.labels(), est.labels())?;
                    Ok((ari, misclustering(&truth, &est)?, counts.density()))
                })();
                row(kind, res)
            })
            .collect(),
        Err(e) => config.matrices.iter().map(|&kind| row(kind, Err(ChipError::InvalidInput(e.to_string())))).collect(),
    }
}

fn estimation_task(config: &ExperimentConfig, point: &GridPoint, replicate: usize) -> EstimationRow {
    let seed = replicate_seed(config.seed, point.index, replicate);
    let res = (|| -> Result<(f64, ParamErrors)> {
        let (spec, truth) = planted(point, config.scale_target)?;
        let net = sample_network(&spec, &truth, seed)?.network;
        let fit_config = FitConfig { mode: config.mode, seed: rng::derive_seed(seed, &[1]), ..FitConfig::default() };
        let assignment = if config.known_communities {
            truth.clone()
        } else {
            let counts = CountMatrix::from_network(&net, config.mode);
            cluster_counts(&counts, MatrixKind::Weighted, point.k, fit_config.seed, &fit_config.spectral)?
        };
        let ari = adjusted_rand(truth.labels(), assignment.labels())?;
        let fit = fit_with_assignment(&net, &assignment, &fit_config)?;
        let perm = align_blocks(&truth, &assignment)?;
        let est = fit.estimates.permuted(&perm);
        let mse = |est: &BlockMatrix<f64>, truth: &BlockMatrix<f64>| {
            let k = truth.k();
            let se: Vec<f64> = est.iter().zip(truth.iter()).map(|(e, t)| (e - t) * (e - t)).collect();
            par::ordered_sum(&se) / (k * k) as f64
        };
        Ok((
            ari,
            ParamErrors {
                mu: mse(&est.mu_hat, &spec.mu),
                m: mse(&est.m_hat, &spec.m()),
                alpha: mse(&est.alpha_hat, &spec.alpha),
                beta: mse(&est.beta_hat, &spec.beta),
            },
        ))
    })();
    match res {
        Ok((ari, mse)) => EstimationRow { point: *point, replicate, seed, ari: Some(ari), mse: Some(mse), error: None },
        Err(e) => EstimationRow { point: *point, replicate, seed, ari: None, mse: None, error: Some(e.to_string()) },
    }
}

fn coverage_task(config: &ExperimentConfig, point: &GridPoint, replicate: usize) -> CoverageRow {
    let seed = replicate_seed(config.seed, point.index, replicate);
    let res = (|| -> Result<(bool, bool, f64, f64)> {
        let (spec, truth) = planted(point, config.scale_target)?;
        let counts = sample_counts(&spec, &truth, seed)?;
        let assignment = if config.known_communities {
            truth.clone()
        } else {
            let est = cluster_counts(&counts, MatrixKind::Weighted, point.k, rng::derive_seed(seed, &[1]), &SpectralConfig::default())?;
            let perm = align_blocks(&truth, &est)?;
            let mut inverse = vec![0; point.k];
            for (a, &p) in perm.iter().enumerate() {
                inverse[p] = a;
            }
            CommunityAssignment::new(est.labels().iter().map(|&l| inverse[l]).collect(), point.k)?
        };
        let stats = block_pair_stats(&counts, &assignment)?;
        let est = moment_estimates(&stats, point.horizon)?;
        let m_true = spec.m();
        let m_iv = m_confidence_intervals(&stats, &est.m_hat, config.theta)?;
        let k = point.k;
        let mut m_hits = 0usize;
        for a in 0..k {
            for b in 0..k {
                if m_iv.get(a, b).as_ref().is_some_and(|iv| iv.contains(*m_true.get(a, b))) {
                    m_hits += 1;
                }
            }
        }
        let diffs = mu_pairwise_difference_intervals(&stats, &est.mu_hat, point.horizon, config.theta)?;
        let mu_hits = diffs
            .iter()
            .filter(|d| {
                let target = spec.mu.get(d.first.0, d.first.1) - spec.mu.get(d.second.0, d.second.1);
                d.interval.is_some_and(|iv| iv.contains(target))
            })
            .count();
        let mu_total = diffs.len().max(1);
        Ok((m_hits == k * k, mu_hits == diffs.len(), m_hits as f64 / (k * k) as f64, mu_hits as f64 / mu_total as f64))
    })();
    match res {
        Ok((mc, uc, mf, uf)) => CoverageRow {
            point: *point,
            replicate,
            seed,
            m_covered: Some(mc),
            mu_covered: Some(uc),
            m_fraction: Some(mf),
            mu_fraction: Some(uf),
            error: None,
        },
        Err(e) => CoverageRow {
            point: *point,
            replicate,
            seed,
            m_covered: None,
            mu_covered: None,
            m_fraction: None,
            mu_fraction: None,
            error: Some(e.to_string()),
        },
    }
}

/// Mean and standard error of the mean (sample standard deviation over
/// `√len`; 0 for fewer than two values). NaN when empty.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let len = values.len();
    if len == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = par::ordered_sum(values) / len as f64;
    if len < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = par::ordered_sum(&dev) / (len - 1) as f64;
    (mean, (var / len as f64).sqrt())
}

fn theory_inputs(point: &GridPoint, target: ScaleTarget) -> SimplifiedTheoryInputs {
    SimplifiedTheoryInputs::from_spec(&point.simplified(target))
}

fn summarise_detection(config: &ExperimentConfig, points: &[GridPoint], rows: &[DetectionRow]) -> Vec<DetectionSummary> {
    let mut out = Vec::new();
    for p in points {
        let inputs = theory_inputs(p, config.scale_target);
        let bb = binary_bound(&inputs).map(|b| b.value).unwrap_or(f64::NAN);
        let wb = weighted_bound(&inputs).map(|b| b.value).unwrap_or(f64::NAN);
        for &kind in &config.matrices {
            let sel: Vec<&DetectionRow> =
                rows.iter().filter(|r| r.point.index == p.index && r.matrix == kind && r.error.is_none()).collect();
            let ari: Vec<f64> = sel.iter().filter_map(|r| r.ari).collect();
            let mis: Vec<f64> = sel.iter().filter_map(|r| r.misclustering).collect();
            let dens: Vec<f64> = sel.iter().filter_map(|r| r.density).collect();
            let (ari_mean, ari_se) = mean_se(&ari);
            out.push(DetectionSummary {
                point: *p,
                matrix: kind,
                replicates_ok: sel.len(),
                ari_mean,
                ari_se,
                misclustering_mean: mean_se(&mis).0,
                density_mean: mean_se(&dens).0,
                binary_bound: bb,
                weighted_bound: wb,
            });
        }
    }
    out
}

fn summarise_estimation(points: &[GridPoint], rows: &[EstimationRow]) -> Vec<EstimationSummary> {
    points
        .iter()
        .map(|p| {
            let ok: Vec<&EstimationRow> = rows.iter().filter(|r| r.point.index == p.index && r.error.is_none()).collect();
            let ari: Vec<f64> = ok.iter().filter_map(|r| r.ari).collect();
            let col = |f: fn(&ParamErrors) -> f64| -> (f64, f64) {
                let v: Vec<f64> = ok.iter().filter_map(|r| r.mse.as_ref().map(f)).collect();
                mean_se(&v)
            };
            let (mu, m, alpha, beta) = (col(|e| e.mu), col(|e| e.m), col(|e| e.alpha), col(|e| e.beta));
            EstimationSummary {
                point: *p,
                replicates_ok: ok.len(),
                ari_mean: mean_se(&ari).0,
                mse_mean: ParamErrors { mu: mu.0, m: m.0, alpha: alpha.0, beta: beta.0 },
                mse_se: ParamErrors { mu: mu.1, m: m.1, alpha: alpha.1, beta: beta.1 },
            }
        })
        .collect()
}

/// Least-squares slope of `ys` on `xs`.
pub fn regression_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Decay rates over `n` when `n` is the only axis that varies.
fn decay_rates(summary: &[EstimationSummary]) -> Option<DecayRates> {
    if summary.len() < 2 {
        return None;
    }
    let first = summary[0].point;
    let same_other = summary.iter().all(|s| {
        let p = s.point;
        (p.k, p.horizon, p.mu1, p.mu2, p.alpha1, p.alpha2, p.beta1, p.beta2, p.scale)
            == (first.k, first.horizon, first.mu1, first.mu2, first.alpha1, first.alpha2, first.beta1, first.beta2, first.scale)
    });
    if !same_other {
        return None;
    }
    let xs: Vec<f64> = summary.iter().map(|s| (s.point.n as f64).ln()).collect();
    let rate = |f: fn(&ParamErrors) -> f64| {
        let ys: Vec<f64> = summary.iter().map(|s| f(&s.mse_mean).ln()).collect();
        -regression_slope(&xs, &ys)
    };
    Some(DecayRates { mu: rate(|e| e.mu), m: rate(|e| e.m), alpha: rate(|e| e.alpha), beta: rate(|e| e.beta) })
}

fn summarise_coverage(points: &[GridPoint], rows: &[CoverageRow]) -> Vec<CoverageSummary> {
    points
        .iter()
        .map(|p| {
            let ok: Vec<&CoverageRow> = rows.iter().filter(|r| r.point.index == p.index && r.error.is_none()).collect();
            let frac = |f: fn(&CoverageRow) -> Option<bool>| {
                ok.iter().filter(|r| f(r) == Some(true)).count() as f64 / ok.len().max(1) as f64
            };
            let m_int: Vec<f64> = ok.iter().filter_map(|r| r.m_fraction).collect();
            let mu_int: Vec<f64> = ok.iter().filter_map(|r| r.mu_fraction).collect();
            CoverageSummary {
                point: *p,
                replicates_ok: ok.len(),
                m_coverage: frac(|r| r.m_covered),
                mu_coverage: frac(|r| r.mu_covered),
                m_interval_coverage: mean_se(&m_int).0,
                mu_interval_coverage: mean_se(&mu_int).0,
            }
        })
        .collect()
}

/// A CSV table as text records.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(extra: &[&str]) -> Self {
        let header = GridPoint::HEADER.iter().chain(extra).map(|s| s.to_string()).collect();
        Self { header, rows: Vec::new() }
    }

    pub fn write<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

impl ExperimentOutput {
    /// Per-replicate rows.
    pub fn rows_table(&self) -> Table {
        match &self.data {
            ExperimentData::Detection { rows, .. } => {
                let mut t = Table::new(&["replicate", "seed", "matrix", "ari", "misclustering", "density", "error"]);
                for r in rows {
                    let mut rec = r.point.record();
                    rec.extend([
                        r.replicate.to_string(),
                        r.seed.to_string(),
                        matrix_label(r.matrix).to_string(),
                        opt(r.ari),
                        opt(r.misclustering),
                        opt(r.density),
                        r.error.clone().unwrap_or_default(),
                    ]);
                    t.rows.push(rec);
                }
                t
            }
            ExperimentData::Estimation { rows, .. } => {
                let mut t =
                    Table::new(&["replicate", "seed", "ari", "mse_mu", "mse_m", "mse_alpha", "mse_beta", "error"]);
                for r in rows {
                    let mut rec = r.point.record();
                    rec.extend([
                        r.replicate.to_string(),
                        r.seed.to_string(),
                        opt(r.ari),
                        opt(r.mse.map(|e| e.mu)),
                        opt(r.mse.map(|e| e.m)),
                        opt(r.mse.map(|e| e.alpha)),
                        opt(r.mse.map(|e| e.beta)),
                        r.error.clone().unwrap_or_default(),
                    ]);
                    t.rows.push(rec);
                }
                t
            }
            ExperimentData::Coverage { rows, .. } => {
                let mut t =
                    Table::new(&["replicate", "seed", "m_covered", "mu_covered", "m_fraction", "mu_fraction", "error"]);
                for r in rows {
                    let mut rec = r.point.record();
                    rec.extend([
                        r.replicate.to_string(),
                        r.seed.to_string(),
                        opt(r.m_covered),
                        opt(r.mu_covered),
                        opt(r.m_fraction),
                        opt(r.mu_fraction),
                        r.error.clone().unwrap_or_default(),
                    ]);
                    t.rows.push(rec);
                }
                t
            }
        }
    }

    /// Aggregates per grid point (and matrix).
    pub fn summary_table(&self) -> Table {
        match &self.data {
            ExperimentData::Detection { summary, .. } => {
                let mut t = Table::new(&[
                    "matrix",
                    "replicates_ok",
                    "ari_mean",
                    "ari_se",
                    "misclustering_mean",
                    "density_mean",
                    "binary_bound",
                    "weighted_bound",
                ]);
                for s in summary {
                    let mut rec = s.point.record();
                    rec.extend([
                        matrix_label(s.matrix).to_string(),
                        s.replicates_ok.to_string(),
                        s.ari_mean.to_string(),
                        s.ari_se.to_string(),
                        s.misclustering_mean.to_string(),
                        s.density_mean.to_string(),
                        s.binary_bound.to_string(),
                        s.weighted_bound.to_string(),
                    ]);
                    t.rows.push(rec);
                }
                t
            }
            ExperimentData::Estimation { summary, .. } => {
                let mut t = Table::new(&[
                    "replicates_ok",
                    "ari_mean",
                    "mse_mu_mean",
                    "mse_mu_se",
                    "mse_m_mean",
                    "mse_m_se",
                    "mse_alpha_mean",
                    "mse_alpha_se",
                    "mse_beta_mean",
                    "mse_beta_se",
                ]);
                for s in summary {
                    let mut rec = s.point.record();
                    rec.extend([
                        s.replicates_ok.to_string(),
                        s.ari_mean.to_string(),
                        s.mse_mean.mu.to_string(),
                        s.mse_se.mu.to_string(),
                        s.mse_mean.m.to_string(),
                        s.mse_se.m.to_string(),
                        s.mse_mean.alpha.to_string(),
                        s.mse_se.alpha.to_string(),
                        s.mse_mean.beta.to_string(),
                        s.mse_se.beta.to_string(),
                    ]);
                    t.rows.push(rec);
                }
                t
            }
            ExperimentData::Coverage { summary, .. } => {
                let mut t = Table::new(&[
                    "replicates_ok",
                    "m_coverage",
                    "mu_coverage",
                    "m_interval_coverage",
                    "mu_interval_coverage",
                ]);
                for s in summary {
                    let mut rec = s.point.record();
                    rec.extend([
                        s.replicates_ok.to_string(),
                        s.m_coverage.to_string(),
                        s.mu_coverage.to_string(),
                        s.m_interval_coverage.to_string(),
                        s.mu_interval_coverage.to_string(),
                    ]);
                    t.rows.push(rec);
                }
                t
            }
        }
    }

    /// Config echo, seeds, file names, column descriptions and derived
    /// quantities.
    pub fn manifest(&self, rows_file: &str, summary_file: &str) -> serde_json::Value {
        let grid_columns = json!({
            "grid_index": "position in the parameter grid",
            "n": "node count", "k": "block count", "horizon": "observation window T",
            "mu1": "diagonal baseline rate before scaling", "mu2": "off-diagonal baseline rate before scaling",
            "alpha1": "diagonal jump size", "alpha2": "off-diagonal jump size",
            "beta1": "diagonal decay rate", "beta2": "off-diagonal decay rate",
            "scale": "multiplier applied to the baseline rates selected by scale_target",
        });
        let (rows_cols, summary_cols, derived) = match &self.data {
            ExperimentData::Detection { .. } => (
                json!({
                    "replicate": "replicate index", "seed": "replicate seed",
                    "matrix": "A (binary adjacency) or N (counts)",
                    "ari": "adjusted Rand index against planted blocks",
                    "misclustering": "fraction of nodes outside their matched block",
                    "density": "fraction of ordered pairs with at least one event",
                    "error": "failure message, empty on success",
                }),
                json!({
                    "ari_mean": "mean ARI", "ari_se": "standard error of the mean ARI",
                    "binary_bound": "misclustering rate bound for A, up to constants",
                    "weighted_bound": "misclustering rate bound for N, up to constants",
                }),
                json!(null),
            ),
            ExperimentData::Estimation { decay, .. } => (
                json!({
                    "replicate": "replicate index", "seed": "replicate seed",
                    "ari": "adjusted Rand index of the blocks used for estimation",
                    "mse_mu": "squared error of mu averaged over block pairs",
                    "mse_m": "squared error of m = alpha/beta averaged over block pairs",
                    "mse_alpha": "squared error of alpha averaged over block pairs",
                    "mse_beta": "squared error of beta averaged over block pairs",
                    "error": "failure message, empty on success",
                }),
                json!({"mse_*_mean": "mean over replicates", "mse_*_se": "standard error of that mean"}),
                json!({ "mse_decay_rates": decay }),
            ),
            ExperimentData::Coverage { .. } => (
                json!({
                    "replicate": "replicate index", "seed": "replicate seed",
                    "m_covered": "all m intervals contain the truth",
                    "mu_covered": "all mu difference intervals contain the truth",
                    "m_fraction": "fraction of m intervals containing the truth",
                    "mu_fraction": "fraction of mu difference intervals containing the truth",
                    "error": "failure message, empty on success",
                }),
                json!({
                    "m_coverage": "fraction of replicates with simultaneous m coverage",
                    "mu_coverage": "fraction of replicates with simultaneous mu difference coverage",
                }),
                json!(null),
            ),
        };
        json!({
            "experiment": self.config.id,
            "package": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "config": self.config,
            "master_seed": self.config.seed,
            "seed_rule": "replicate seed derived from (master_seed, grid_index, replicate)",
            "communities": "balanced round-robin assignment, |a| = n/k",
            "grid_points": self.points.len(),
            "files": { "rows": rows_file, "summary": summary_file },
            "columns": { "grid": grid_columns, "rows": rows_cols, "summary": summary_cols },
            "derived": derived,
        })
    }

    /// Writes `<id>.csv`, `<id>_summary.csv` and `<id>_manifest.json`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let id = &self.config.id;
        let rows_name = format!("{id}.csv");
        let summary_name = format!("{id}_summary.csv");
        let manifest_name = format!("{id}_manifest.json");
        let paths = [dir.join(&rows_name), dir.join(&summary_name), dir.join(&manifest_name)];
        self.rows_table().write(std::io::BufWriter::new(std::fs::File::create(&paths[0])?))?;
        self.summary_table().write(std::io::BufWriter::new(std::fs::File::create(&paths[1])?))?;
        let manifest = serde_json::to_string_pretty(&self.manifest(&rows_name, &summary_name))?;
        std::fs::write(&paths[2], manifest + "\n")?;
        Ok(paths.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(kind: ExperimentKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::preset(match kind {
            ExperimentKind::Detection => "fig2a",
            ExperimentKind::Estimation => "fig4",
            ExperimentKind::CiCoverage => "ci-coverage",
        })
        .unwrap();
        c.replicates = 2;
        c.grid.n = vec![24, 32];
        c.grid.horizon = vec![if kind == ExperimentKind::Detection { 400.0 } else { 2000.0 }];
        c
    }

    #[test]
    fn presets_validate() {
        for id in PRESETS {
            let c = ExperimentConfig::preset(id).unwrap();
            c.validate().unwrap();
            let back = ExperimentConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
            assert_eq!(back, c);
        }
        assert!(ExperimentConfig::preset("nope").is_none());
    }

    #[test]
    fn toml_defaults() {
        let text = r#"
            id = "custom"
            kind = "detection"
            [grid]
            n = [20]
            k = [2]
            horizon = [10.0]
            mu1 = [0.1]
            mu2 = [0.05]
            alpha1 = [0.0]
            alpha2 = [0.0]
            beta1 = [1.0]
            beta2 = [1.0]
        "#;
        let c = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(c.replicates, 20);
        assert_eq!(c.grid.scale, vec![1.0]);
        assert_eq!(c.matrices.len(), 2);
        assert!(ExperimentConfig::from_toml_str(&text.replace("n = [20]", "n = []")).is_err());
    }

    #[test]
    fn overrides() {
        let mut c = ExperimentConfig::preset("fig2a").unwrap();
        c.apply_override("n=8,16").unwrap();
        c.apply_override("T=100").unwrap();
        assert_eq!(c.grid.n, vec![8, 16]);
        assert_eq!(c.grid.horizon, vec![100.0]);
        assert!(c.apply_override("n=2").is_err());
        assert!(c.apply_override("zeta=1").is_err());
        assert!(c.apply_override("n").is_err());
    }

    #[test]
    fn grid_order_and_seeds() {
        let mut c = ExperimentConfig::preset("heatmap-fixed-k").unwrap();
        c.grid.n = vec![64, 128];
        c.grid.horizon = vec![16.0, 32.0];
        let p = c.points();
        assert_eq!(p.len(), 4);
        assert_eq!((p[1].n, p[1].horizon), (64, 32.0));
        assert_eq!((p[2].n, p[2].horizon), (128, 16.0));
        assert_ne!(replicate_seed(1, 0, 1), replicate_seed(1, 1, 0));
    }

    #[test]
    fn detection_runs_and_is_reproducible() {
        let c = tiny(ExperimentKind::Detection);
        let a = run_experiment(&c).unwrap();
        let b = run_experiment(&c).unwrap();
        assert_eq!(a, b);
        let t = a.rows_table();
        assert_eq!(t.rows.len(), 2 * 2 * 2);
        let s = a.summary_table();
        assert_eq!(s.rows.len(), 4);
        assert!(s.header.contains(&"ari_mean".to_string()) && s.header.contains(&"ari_se".to_string()));
    }

    #[test]
    fn estimation_and_coverage_run() {
        let out = run_experiment(&tiny(ExperimentKind::Estimation)).unwrap();
        match &out.data {
            ExperimentData::Estimation { rows, decay, .. } => {
                assert!(rows.iter().all(|r| r.error.is_none()), "{rows:?}");
                assert!(decay.is_some());
            }
            _ => panic!("wrong kind"),
        }
        let out = run_experiment(&tiny(ExperimentKind::CiCoverage)).unwrap();
        match &out.data {
            ExperimentData::Coverage { summary, .. } => assert_eq!(summary[0].replicates_ok, 2),
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn files_are_byte_identical() {
        let c = tiny(ExperimentKind::Detection);
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let p1 = run_experiment(&c).unwrap().write_to(d1.path()).unwrap();
        let p2 = run_experiment(&c).unwrap().write_to(d2.path()).unwrap();
        for (a, b) in p1.iter().zip(&p2) {
            assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
        }
    }

    #[test]
    fn slope_of_exact_power_law() {
        let xs: Vec<f64> = [10.0f64, 20.0, 40.0].iter().map(|x| x.ln()).collect();
        let ys: Vec<f64> = [10.0f64, 20.0, 40.0].iter().map(|x| (3.0 * x.powf(-2.0)).ln()).collect();
        assert!((regression_slope(&xs, &ys) + 2.0).abs() < 1e-12);
        assert_eq!(mean_se(&[1.0, 3.0]), (2.0, 1.0));
    }
}
