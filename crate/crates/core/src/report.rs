//! End-to-end fit of a real (or externally supplied) event log.
//!
//! Test log-likelihoods for CHIP and the Poisson baseline come from the
//! train/test protocol. Parameter tables, block sizes and confidence
//! intervals describe a second fit on the whole log.

use std::path::Path;

use serde::Serialize;

use crate::error::{domain, Result};
use crate::estimation::{
    fit_chip, m_confidence_intervals, mu_pairwise_difference_intervals, FitConfig, FlaggedCell,
};
use crate::ingest::{ingest_path, IngestOptions, IngestSummary};
use crate::likelihood::{
    mean_test_loglik_with_assignment, poisson_baseline_with_assignment, split_by_count, split_by_fraction,
    train_assignment, EvalResult, SplitLog,
};
use crate::matrix::CountMatrix;
use crate::network::{EventLog, EventNetwork};
use crate::spectral::eigengap_select_k;

/// How many trailing events form the test set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitRule {
    Count(usize),
    /// Fraction of events, rounded to the nearest count.
    Fraction(f64),
}

impl Default for SplitRule {
    fn default() -> Self {
        SplitRule::Fraction(0.2)
    }
}

impl SplitRule {
    pub fn apply(&self, log: &EventLog) -> Result<SplitLog> {
        match *self {
            SplitRule::Count(c) => split_by_count(log, c),
            SplitRule::Fraction(f) => split_by_fraction(log, f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KChoice {
    Fixed(usize),
    /// Eigengap rule over the top `k_max` singular values of the full-data
    /// count matrix.
    Auto { k_max: usize },
}

#[derive(Debug, Clone)]
pub struct RealFitOptions {
    pub dataset: String,
    pub k: KChoice,
    pub split: SplitRule,
    pub fit: FitConfig,
    /// Level of the simultaneous intervals.
    pub theta: f64,
    /// Number of singular values reported when `k` is fixed.
    pub singular_values: usize,
}

impl Default for RealFitOptions {
    fn default() -> Self {
        Self {
            dataset: String::new(),
            k: KChoice::Auto { k_max: 10 },
            split: SplitRule::default(),
            fit: FitConfig::default(),
            theta: 0.05,
            singular_values: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterTables {
    pub mu: Vec<Vec<f64>>,
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub m: Vec<Vec<f64>>,
}

/// Interval on `m_ab`, blocks 1-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MIntervalRow {
    pub a: usize,
    pub b: usize,
    pub estimate: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

/// Interval on `μ_first − μ_second`, blocks 1-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MuDifferenceRow {
    pub first: (usize, usize),
    pub second: (usize, usize),
    pub estimate: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub dataset: String,
    pub n: usize,
    pub events: usize,
    pub horizon: f64,
    pub k: usize,
    pub k_selected_by_eigengap: bool,
    /// Top singular values of the full-data clustering matrix.
    pub singular_values: Vec<f64>,
    pub test_loglik: Vec<EvalResult>,
    pub train_horizon: f64,
    pub block_sizes: Vec<usize>,
    /// Events observed in each ordered block pair.
    pub block_event_counts: Vec<Vec<u64>>,
    pub pi_hat: Vec<f64>,
    pub parameters: ParameterTables,
    pub flags: Vec<FlaggedCell>,
    pub theta: f64,
    pub m_intervals: Vec<MIntervalRow>,
    pub mu_difference_intervals: Vec<MuDifferenceRow>,
    /// 1-based block of each node id.
    pub labels: Vec<usize>,
    pub seed: u64,
}

pub fn fit_real(path: impl AsRef<Path>, ingest: &IngestOptions, options: &RealFitOptions) -> Result<(FitReport, IngestSummary)> {
    let ingested = ingest_path(path, ingest)?;
    let report = fit_log(&ingested.log, options)?;
    Ok((report, ingested.summary))
}

pub fn fit_log(log: &EventLog, options: &RealFitOptions) -> Result<FitReport> {
    let n = log.n();
    let net = EventNetwork::from_log(log)?;
    let counts = CountMatrix::from_network(&net, options.fit.mode);
    let matrix = counts.for_kind(options.fit.matrix);
    let (k, singular_values, auto) = match options.k {
        KChoice::Fixed(k) => {
            if k == 0 || k > n {
                return domain(format!("need 1 <= k <= n, got k = {k}, n = {n}"));
            }
            let top = options.singular_values.max(k).min(n);
            (k, eigengap_select_k(&matrix, top, options.fit.spectral.svd)?.singular_values, false)
        }
        KChoice::Auto { k_max } => {
            let sel = eigengap_select_k(&matrix, k_max.min(n), options.fit.spectral.svd)?;
            (sel.k, sel.singular_values, true)
        }
    };

    let split = options.split.apply(log)?;
    let ta = train_assignment(&split.train, k, &options.fit)?;
    let mut chip = mean_test_loglik_with_assignment(&split, ta.clone(), &options.fit)?.result;
    let mut poisson = poisson_baseline_with_assignment(&split, ta, &options.fit)?.result;
    chip.dataset = options.dataset.clone();
    poisson.dataset = options.dataset.clone();

    let fit = fit_chip(&net, k, &options.fit)?;
    let est = &fit.estimates;
    let m_iv = m_confidence_intervals(&fit.stats, &est.m_hat, options.theta)?;
    let mut m_intervals = Vec::with_capacity(k * k);
    for a in 0..k {
        for b in 0..k {
            let iv = m_iv.get(a, b);
            m_intervals.push(MIntervalRow {
                a: a + 1,
                b: b + 1,
                estimate: *est.m_hat.get(a, b),
                lower: iv.map(|i| i.lower()),
                upper: iv.map(|i| i.upper()),
            });
        }
    }
    let mu_difference_intervals = mu_pairwise_difference_intervals(&fit.stats, &est.mu_hat, fit.horizon, options.theta)?
        .into_iter()
        .map(|d| MuDifferenceRow {
            first: (d.first.0 + 1, d.first.1 + 1),
            second: (d.second.0 + 1, d.second.1 + 1),
            estimate: est.mu_hat.get(d.first.0, d.first.1) - est.mu_hat.get(d.second.0, d.second.1),
            lower: d.interval.map(|i| i.lower()),
            upper: d.interval.map(|i| i.upper()),
        })
        .collect();

    Ok(FitReport {
        dataset: options.dataset.clone(),
        n,
        events: log.len(),
        horizon: log.horizon(),
        k,
        k_selected_by_eigengap: auto,
        singular_values,
        test_loglik: vec![chip, poisson],
        train_horizon: split.train_horizon(),
        block_sizes: fit.assignment.block_sizes(),
        block_event_counts: fit.stats.map(|s| s.events).rows(),
        pi_hat: est.pi_hat.clone(),
        parameters: ParameterTables {
            mu: est.mu_hat.rows(),
            alpha: est.alpha_hat.rows(),
            beta: est.beta_hat.rows(),
            m: est.m_hat.rows(),
        },
        flags: est.flags.clone(),
        theta: options.theta,
        m_intervals,
        mu_difference_intervals,
        labels: fit.assignment.one_based(),
        seed: options.fit.seed,
    })
}

/// `x` rounded to three significant figures.
pub fn three_sig(x: f64) -> String {
    if !x.is_finite() || x == 0.0 {
        return format!("{x}");
    }
    let digits = x.abs().log10().floor() as i32;
    let decimals = (2 - digits).max(0) as usize;
    let scale = 10f64.powi(digits - 2);
    let rounded = (x / scale).round() * scale;
    format!("{rounded:.decimals$}")
}
