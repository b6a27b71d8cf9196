//! Relational event networks and the CHIP generative process.
//!
//! Every ordered node pair `(i, j)`, `i ≠ j`, carries an independent
//! exponential Hawkes process whose parameters depend only on the blocks of
//! `i` and `j`. Each pair draws from its own random stream keyed by
//! `(seed, i, j)`, so generation is order independent.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::community::{BlockMatrix, CommunityAssignment};
use crate::error::{domain, ChipError, Result};
use crate::hawkes::{simulate_times, HawkesParams};
use crate::matrix::{CountMatrix, Mode};
use crate::{par, rng};

/// One timestamped directed interaction. Node ids are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub sender: usize,
    pub receiver: usize,
    pub time: f64,
}

/// Flat, time-ordered list of events over `n` nodes on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    events: Vec<Event>,
    n: usize,
    horizon: f64,
}

impl EventLog {
    /// Validates and sorts by time (stable, so ties keep input order).
    pub fn new(mut events: Vec<Event>, n: usize, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return domain(format!("horizon must be positive, got {horizon}"));
        }
        for (q, e) in events.iter().enumerate() {
            if e.sender == e.receiver {
                return domain(format!("event {q} is a self-edge on node {}", e.sender + 1));
            }
            if e.sender >= n || e.receiver >= n {
                return domain(format!("event {q} references a node outside 1..={n}"));
            }
            if !(e.time.is_finite() && (0.0..=horizon).contains(&e.time)) {
                return domain(format!("event {q} at {} lies outside [0, {horizon}]", e.time));
            }
        }
        events.sort_by(|a, b| a.time.total_cmp(&b.time));
        Ok(Self { events, n, horizon })
    }

    pub(crate) fn from_sorted_unchecked(events: Vec<Event>, n: usize, horizon: f64) -> Self {
        Self { events, n, horizon }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Writes `sender,receiver,timestamp` CSV with 1-based node ids.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["sender", "receiver", "timestamp"])?;
        for e in &self.events {
            w.write_record([
                (e.sender + 1).to_string(),
                (e.receiver + 1).to_string(),
                e.time.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Reads CSV written by [`EventLog::write_csv`]: integer 1-based ids, times
    /// kept as given. `n` is the largest id seen unless `n` is supplied, and
    /// the horizon defaults to the last timestamp.
    pub fn read_csv<R: Read>(reader: R, n: Option<usize>, horizon: Option<f64>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        check_header(rdr.headers()?)?;
        let mut events = Vec::new();
        let mut max_id = 0usize;
        for (row, rec) in rdr.records().enumerate() {
            let line = row + 2;
            let rec = rec?;
            if rec.len() != 3 {
                return Err(ChipError::Parse { line, message: format!("expected 3 fields, found {}", rec.len()) });
            }
            let id = |s: &str| -> Result<usize> {
                match s.parse::<usize>() {
                    Ok(v) if v >= 1 => Ok(v - 1),
                    _ => Err(ChipError::Parse { line, message: format!("invalid node id {s:?}") }),
                }
            };
            let sender = id(&rec[0])?;
            let receiver = id(&rec[1])?;
            let time: f64 = rec[2]
                .parse()
                .map_err(|_| ChipError::Parse { line, message: format!("invalid timestamp {:?}", &rec[2]) })?;
            max_id = max_id.max(sender + 1).max(receiver + 1);
            events.push(Event { sender, receiver, time });
        }
        let n = n.unwrap_or(max_id);
        let horizon = match horizon {
            Some(h) => h,
            None => events.iter().map(|e| e.time).fold(0.0, f64::max),
        };
        Self::new(events, n, horizon)
    }

    pub fn load_csv(path: impl AsRef<Path>, n: Option<usize>, horizon: Option<f64>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file), n, horizon)
    }

    /// Concatenates two time-ordered logs over the same nodes.
    pub fn concat(first: &EventLog, second: &EventLog, horizon: f64) -> Result<Self> {
        if first.n != second.n {
            return domain("logs must share the node set");
        }
        let mut events = first.events.clone();
        events.extend_from_slice(&second.events);
        Self::new(events, first.n, horizon)
    }
}

pub(crate) fn check_header(headers: &csv::StringRecord) -> Result<()> {
    let names: Vec<&str> = headers.iter().collect();
    if names != ["sender", "receiver", "timestamp"] {
        return Err(ChipError::Parse {
            line: 1,
            message: format!("expected header sender,receiver,timestamp, found {}", names.join(",")),
        });
    }
    Ok(())
}

/// Event times of one ordered node pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSeries {
    pub sender: usize,
    pub receiver: usize,
    pub times: Vec<f64>,
}

/// Events grouped by ordered node pair. Only pairs with at least one event
/// are stored; all others are structural zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct EventNetwork {
    n: usize,
    horizon: f64,
    pairs: Vec<PairSeries>,
}

impl EventNetwork {
    /// Groups a log by pair. Times within a pair must be strictly increasing.
    pub fn from_log(log: &EventLog) -> Result<Self> {
        let mut order: Vec<usize> = (0..log.len()).collect();
        let ev = log.events();
        order.sort_by(|&a, &b| {
            (ev[a].sender, ev[a].receiver)
                .cmp(&(ev[b].sender, ev[b].receiver))
                .then(ev[a].time.total_cmp(&ev[b].time))
        });
        let mut pairs: Vec<PairSeries> = Vec::new();
        for idx in order {
            let e = ev[idx];
            match pairs.last_mut() {
                Some(p) if p.sender == e.sender && p.receiver == e.receiver => {
                    if e.time <= *p.times.last().unwrap() {
                        return domain(format!(
                            "pair ({}, {}) has tied timestamps at {}",
                            e.sender + 1,
                            e.receiver + 1,
                            e.time
                        ));
                    }
                    p.times.push(e.time);
                }
                _ => pairs.push(PairSeries { sender: e.sender, receiver: e.receiver, times: vec![e.time] }),
            }
        }
        Ok(Self { n: log.n(), horizon: log.horizon(), pairs })
    }

    pub(crate) fn from_pairs(n: usize, horizon: f64, pairs: Vec<PairSeries>) -> Self {
        Self { n, horizon, pairs }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn pairs(&self) -> &[PairSeries] {
        &self.pairs
    }

    pub fn event_count(&self) -> usize {
        self.pairs.iter().map(|p| p.times.len()).sum()
    }

    /// Flattens to a log ordered by time, then sender, then receiver.
    pub fn to_log(&self) -> EventLog {
        let mut events: Vec<Event> = self
            .pairs
            .iter()
            .flat_map(|p| p.times.iter().map(move |&time| Event { sender: p.sender, receiver: p.receiver, time }))
            .collect();
        events.sort_by(|a, b| {
            a.time
                .total_cmp(&b.time)
                .then(a.sender.cmp(&b.sender))
                .then(a.receiver.cmp(&b.receiver))
        });
        EventLog::from_sorted_unchecked(events, self.n, self.horizon)
    }
}

/// General CHIP model: block probabilities plus k×k Hawkes parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChipModelSpec {
    pub n: usize,
    pub k: usize,
    pub pi: Vec<f64>,
    pub mu: BlockMatrix<f64>,
    pub alpha: BlockMatrix<f64>,
    pub beta: BlockMatrix<f64>,
    pub horizon: f64,
}

impl ChipModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return domain("k must be at least 1");
        }
        if self.pi.len() != self.k {
            return domain(format!("pi has {} entries, expected {}", self.pi.len(), self.k));
        }
        if self.pi.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return domain("pi entries must be nonnegative");
        }
        let total: f64 = self.pi.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return domain(format!("pi sums to {total}, expected 1"));
        }
        for (name, m) in [("mu", &self.mu), ("alpha", &self.alpha), ("beta", &self.beta)] {
            if m.k() != self.k {
                return domain(format!("{name} is {}x{0}, expected {1}x{1}", m.k(), self.k));
            }
        }
        for a in 0..self.k {
            for b in 0..self.k {
                self.params(a, b)?;
            }
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return domain(format!("horizon must be positive, got {}", self.horizon));
        }
        Ok(())
    }

    pub fn params(&self, a: usize, b: usize) -> Result<HawkesParams> {
        HawkesParams::new(*self.mu.get(a, b), *self.alpha.get(a, b), *self.beta.get(a, b))
    }

    /// Branching ratios `α/β` per block pair.
    pub fn m(&self) -> BlockMatrix<f64> {
        BlockMatrix::from_fn(self.k, |a, b| self.alpha.get(a, b) / self.beta.get(a, b))
    }

    /// Block pairs with `α ≥ β`.
    pub fn nonstationary_pairs(&self) -> Vec<(usize, usize)> {
        (0..self.k)
            .flat_map(|a| (0..self.k).map(move |b| (a, b)))
            .filter(|&(a, b)| self.alpha.get(a, b) >= self.beta.get(a, b))
            .collect()
    }
}

/// Two-level special case: one parameter set on diagonal block pairs and
/// one off the diagonal, equal block sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplifiedSpec {
    pub n: usize,
    pub k: usize,
    pub mu1: f64,
    pub alpha1: f64,
    pub beta1: f64,
    pub mu2: f64,
    pub alpha2: f64,
    pub beta2: f64,
    pub horizon: f64,
}

impl SimplifiedSpec {
    pub fn m1(&self) -> f64 {
        self.alpha1 / self.beta1
    }

    pub fn m2(&self) -> f64 {
        self.alpha2 / self.beta2
    }
}

/// Expands the two-level model to full k×k matrices with uniform `pi`.
pub fn expand_simplified(spec: &SimplifiedSpec) -> Result<ChipModelSpec> {
    if spec.k == 0 {
        return domain("k must be at least 1");
    }
    let k = spec.k;
    let pick = |on: f64, off: f64| BlockMatrix::from_fn(k, move |a, b| if a == b { on } else { off });
    let full = ChipModelSpec {
        n: spec.n,
        k,
        pi: vec![1.0 / k as f64; k],
        mu: pick(spec.mu1, spec.mu2),
        alpha: pick(spec.alpha1, spec.alpha2),
        beta: pick(spec.beta1, spec.beta2),
        horizon: spec.horizon,
    };
    Ok(full)
}

/// Independent categorical draw of each node's block.
pub fn sample_communities<R: Rng + ?Sized>(spec: &ChipModelSpec, rng: &mut R) -> Result<CommunityAssignment> {
    spec.validate()?;
    let mut cumulative = Vec::with_capacity(spec.k);
    let mut acc = 0.0;
    for &p in &spec.pi {
        acc += p;
        cumulative.push(acc);
    }
    let last_positive = spec.pi.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    let labels = (0..spec.n)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * acc;
            cumulative
                .iter()
                .zip(&spec.pi)
                .position(|(&c, &p)| p > 0.0 && u < c)
                .unwrap_or(last_positive)
        })
        .collect();
    CommunityAssignment::new(labels, spec.k)
}

/// Non-fatal conditions raised while sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelWarning {
    /// Block pair `(a, b)` (0-based) has `α ≥ β`; its counts grow without bound.
    Nonstationary { a: usize, b: usize, alpha: f64, beta: f64 },
}

/// Output of [`sample_network`].
#[derive(Debug, Clone)]
pub struct SampledNetwork {
    pub network: EventNetwork,
    pub warnings: Vec<ModelWarning>,
}

fn check_sampling_inputs(spec: &ChipModelSpec, assignment: &CommunityAssignment) -> Result<Vec<ModelWarning>> {
    spec.validate()?;
    if assignment.n() != spec.n || assignment.k() != spec.k {
        return domain(format!(
            "assignment covers {} nodes in {} blocks, spec has {} nodes in {}",
            assignment.n(),
            assignment.k(),
            spec.n,
            spec.k
        ));
    }
    Ok(spec
        .nonstationary_pairs()
        .into_iter()
        .map(|(a, b)| ModelWarning::Nonstationary { a, b, alpha: *spec.alpha.get(a, b), beta: *spec.beta.get(a, b) })
        .collect())
}

#[inline]
fn simulate_pair(spec: &ChipModelSpec, assignment: &CommunityAssignment, seed: u64, i: usize, j: usize) -> Vec<f64> {
    let (a, b) = (assignment.label(i), assignment.label(j));
    let mut r = rng::stream(seed, &[i as u64, j as u64]);
    simulate_times(*spec.mu.get(a, b), *spec.alpha.get(a, b), *spec.beta.get(a, b), spec.horizon, &mut r)
}

/// Draws every pair's Hawkes process. Pairs without events are omitted.
pub fn sample_network(spec: &ChipModelSpec, assignment: &CommunityAssignment, seed: u64) -> Result<SampledNetwork> {
    let warnings = check_sampling_inputs(spec, assignment)?;
    let n = spec.n;
    let rows = par::map_range(n, |i| {
        (0..n)
            .filter(|&j| j != i)
            .filter_map(|j| {
                let times = simulate_pair(spec, assignment, seed, i, j);
                (!times.is_empty()).then_some(PairSeries { sender: i, receiver: j, times })
            })
            .collect::<Vec<_>>()
    });
    let pairs = rows.into_iter().flatten().collect();
    Ok(SampledNetwork { network: EventNetwork::from_pairs(n, spec.horizon, pairs), warnings })
}

/// Same draws as [`sample_network`] but keeps only per-pair counts.
pub fn sample_counts(spec: &ChipModelSpec, assignment: &CommunityAssignment, seed: u64) -> Result<CountMatrix> {
    check_sampling_inputs(spec, assignment)?;
    let n = spec.n;
    let rows = par::map_range(n, |i| {
        (0..n)
            .filter(|&j| j != i)
            .filter_map(|j| {
                let count = simulate_pair(spec, assignment, seed, i, j).len();
                (count > 0).then_some((j, count as u32))
            })
            .collect::<Vec<_>>()
    });
    Ok(CountMatrix::from_sorted_rows(n, Mode::Directed, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simple(n: usize, k: usize) -> SimplifiedSpec {
        SimplifiedSpec { n, k, mu1: 0.05, alpha1: 0.3, beta1: 1.0, mu2: 0.02, alpha2: 0.1, beta2: 1.0, horizon: 50.0 }
    }

    #[test]
    fn expand_k1() {
        let s = expand_simplified(&simple(4, 1)).unwrap();
        assert_eq!(s.mu.rows(), vec![vec![0.05]]);
        assert_eq!(s.alpha.rows(), vec![vec![0.3]]);
        assert_eq!(s.pi, vec![1.0]);
    }

    #[test]
    fn expand_two_level_pattern() {
        let s = expand_simplified(&simple(4, 2)).unwrap();
        assert_eq!(s.mu.rows(), vec![vec![0.05, 0.02], vec![0.02, 0.05]]);
        assert_eq!(s.beta.rows(), vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
        let paper = SimplifiedSpec { n: 8, k: 4, mu1: 0.002, alpha1: 7.0, beta1: 8.0, mu2: 0.001, alpha2: 7.0, beta2: 8.0, horizon: 400.0 };
        let full = expand_simplified(&paper).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(*full.mu.get(a, b), if a == b { 0.002 } else { 0.001 });
            }
        }
        full.validate().unwrap();
    }

    #[test]
    fn degenerate_categorical() {
        let mut s = expand_simplified(&simple(50, 3)).unwrap();
        s.pi = vec![1.0, 0.0, 0.0];
        let c = sample_communities(&s, &mut rng::seeded(1)).unwrap();
        assert!(c.labels().iter().all(|&l| l == 0));
        let one = expand_simplified(&simple(20, 1)).unwrap();
        assert!(sample_communities(&one, &mut rng::seeded(1)).unwrap().labels().iter().all(|&l| l == 0));
    }

    #[test]
    fn categorical_fractions_concentrate() {
        let s = expand_simplified(&simple(10_000, 4)).unwrap();
        let c = sample_communities(&s, &mut rng::seeded(9)).unwrap();
        let sd = (10_000.0f64 * 0.25 * 0.75).sqrt();
        for size in c.block_sizes() {
            assert!((size as f64 - 2500.0).abs() < 3.0 * sd, "block size {size}");
        }
    }

    #[test]
    fn network_has_no_self_edges_and_is_reproducible() {
        let s = expand_simplified(&simple(12, 2)).unwrap();
        let c = CommunityAssignment::balanced(12, 2).unwrap();
        let a = sample_network(&s, &c, 77).unwrap().network;
        let b = sample_network(&s, &c, 77).unwrap().network;
        assert_eq!(a, b);
        let log = a.to_log();
        assert!(log.events().iter().all(|e| e.sender != e.receiver));
        assert!(log.events().windows(2).all(|w| w[0].time <= w[1].time));
        assert_eq!(EventNetwork::from_log(&log).unwrap(), a);
    }

    #[test]
    fn counts_match_network() {
        let s = expand_simplified(&simple(10, 2)).unwrap();
        let c = CommunityAssignment::balanced(10, 2).unwrap();
        let net = sample_network(&s, &c, 5).unwrap().network;
        let counts = sample_counts(&s, &c, 5).unwrap();
        assert_eq!(counts, CountMatrix::from_network(&net, Mode::Directed));
    }

    #[test]
    fn vanishing_baseline_gives_empty_log() {
        let mut spec = simple(10, 2);
        spec.mu1 = 1e-15;
        spec.mu2 = 1e-15;
        let s = expand_simplified(&spec).unwrap();
        let c = CommunityAssignment::balanced(10, 2).unwrap();
        assert_eq!(sample_network(&s, &c, 1).unwrap().network.event_count(), 0);
    }

    #[test]
    fn nonstationary_pairs_warn() {
        let mut spec = simple(6, 2);
        spec.alpha1 = 1.5;
        spec.horizon = 5.0;
        let s = expand_simplified(&spec).unwrap();
        let c = CommunityAssignment::balanced(6, 2).unwrap();
        let out = sample_network(&s, &c, 1).unwrap();
        assert_eq!(out.warnings.len(), 2);
    }

    #[test]
    fn csv_round_trip() {
        let s = expand_simplified(&simple(6, 2)).unwrap();
        let c = CommunityAssignment::balanced(6, 2).unwrap();
        let log = sample_network(&s, &c, 3).unwrap().network.to_log();
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("sender,receiver,timestamp\n"));
        let back = EventLog::read_csv(buf.as_slice(), Some(6), Some(50.0)).unwrap();
        assert_eq!(back, log);
    }

    #[test]
    fn read_rejects_bad_rows() {
        let bad = "sender,receiver,timestamp\n1,2,0.5\n1,x,0.7\n";
        match EventLog::read_csv(bad.as_bytes(), None, None) {
            Err(ChipError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(EventLog::read_csv("a,b,c\n".as_bytes(), None, None).is_err());
    }
}
