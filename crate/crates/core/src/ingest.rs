//! Loading real event data: opaque node tokens, raw timestamps, self-edges
//! and tied times.
//!
//! Tokens become dense ids in order of first appearance after sorting by
//! time, and times are mapped affinely onto `[0, 1000]`. Ingesting the CSV
//! written from an ingested log reproduces that log exactly.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::Serialize;

use crate::error::{ChipError, Result};
use crate::network::{check_header, Event, EventLog};

/// Upper end of the normalised time range.
pub const NORMALIZED_HORIZON: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IngestOptions {
    /// Keep only the largest connected component, edges taken as undirected.
    pub largest_component: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestSummary {
    pub rows: usize,
    pub self_edges_dropped: usize,
    /// Events removed by the component filter.
    pub outside_component_dropped: usize,
    pub nodes: usize,
    pub events: usize,
    /// Timestamps nudged upward to separate exact ties.
    pub ties_broken: usize,
    pub raw_time_min: f64,
    pub raw_time_max: f64,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub log: EventLog,
    /// Original token of each dense node id.
    pub tokens: Vec<String>,
    pub summary: IngestSummary,
}

struct RawEvent {
    sender: String,
    receiver: String,
    time: f64,
}

pub fn ingest_path(path: impl AsRef<Path>, options: &IngestOptions) -> Result<Ingested> {
    let file = std::fs::File::open(path)?;
    ingest_reader(std::io::BufReader::new(file), options)
}

pub fn ingest_reader<R: Read>(reader: R, options: &IngestOptions) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Err(ChipError::InvalidInput("empty file".into()));
    }
    check_header(&headers)?;
    let mut raw = Vec::new();
    let mut rows = 0usize;
    let mut self_edges = 0usize;
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(rows + 2, |p| p.line() as usize);
        rows += 1;
        if rec.len() != 3 {
            return Err(ChipError::Parse { line, message: format!("expected 3 fields, found {}", rec.len()) });
        }
        if rec[0].is_empty() || rec[1].is_empty() {
            return Err(ChipError::Parse { line, message: "empty node token".into() });
        }
        let time: f64 = rec[2]
            .parse()
            .ok()
            .filter(|t: &f64| t.is_finite())
            .ok_or_else(|| ChipError::Parse { line, message: format!("invalid timestamp {:?}", &rec[2]) })?;
        if rec[0] == rec[1] {
            self_edges += 1;
            continue;
        }
        raw.push(RawEvent { sender: rec[0].to_string(), receiver: rec[1].to_string(), time });
    }
    if rows == 0 {
        return Err(ChipError::InvalidInput("file has no events".into()));
    }
    if raw.is_empty() {
        return Err(ChipError::InvalidInput("no events left after dropping self-edges".into()));
    }
    raw.sort_by(|a, b| a.time.total_cmp(&b.time));

    let outside = if options.largest_component { keep_largest_component(&mut raw) } else { 0 };

    let (min, max) = (raw[0].time, raw[raw.len() - 1].time);
    if !(max > min) {
        return Err(ChipError::InvalidInput(format!("all timestamps equal {min}; cannot normalise")));
    }
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut tokens: Vec<String> = Vec::new();
    let scale = NORMALIZED_HORIZON / (max - min);
    let mut events = Vec::with_capacity(raw.len());
    for e in &raw {
        let mut id_of = |tok: &str| match ids.get(tok) {
            Some(&id) => id,
            None => {
                ids.insert(tok.to_string(), tokens.len());
                tokens.push(tok.to_string());
                tokens.len() - 1
            }
        };
        let sender = id_of(&e.sender);
        let receiver = id_of(&e.receiver);
        let time = ((e.time - min) * scale).clamp(0.0, NORMALIZED_HORIZON);
        events.push(Event { sender, receiver, time });
    }
    let ties = break_ties(&mut events);
    let n = tokens.len();
    let log = EventLog::new(events, n, NORMALIZED_HORIZON)?;
    let summary = IngestSummary {
        rows,
        self_edges_dropped: self_edges,
        outside_component_dropped: outside,
        nodes: n,
        events: log.len(),
        ties_broken: ties,
        raw_time_min: min,
        raw_time_max: max,
    };
    Ok(Ingested { log, tokens, summary })
}

/// Makes times strictly increasing without reordering, staying within
/// `[0, NORMALIZED_HORIZON]`. Returns how many times changed.
fn break_ties(events: &mut [Event]) -> usize {
    let original: Vec<f64> = events.iter().map(|e| e.time).collect();
    for q in 1..events.len() {
        if events[q].time <= events[q - 1].time {
            events[q].time = events[q - 1].time.next_up();
        }
    }
    let mut ceiling = NORMALIZED_HORIZON;
    for e in events.iter_mut().rev() {
        if e.time > ceiling {
            e.time = ceiling;
        }
        ceiling = e.time.next_down();
    }
    events.iter().zip(&original).filter(|(e, &t)| e.time != t).count()
}

/// Drops events outside the largest connected component, ties going to
/// the component whose earliest node appears first. Returns the count
/// removed.
fn keep_largest_component(raw: &mut Vec<RawEvent>) -> usize {
    let mut index: HashMap<&str, usize> = HashMap::new();
    for e in raw.iter() {
        for tok in [e.sender.as_str(), e.receiver.as_str()] {
            let next = index.len();
            index.entry(tok).or_insert(next);
        }
    }
    let mut parent: Vec<usize> = (0..index.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for e in raw.iter() {
        let (a, b) = (find(&mut parent, index[e.sender.as_str()]), find(&mut parent, index[e.receiver.as_str()]));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut size = vec![0usize; parent.len()];
    for x in 0..parent.len() {
        let root = find(&mut parent, x);
        size[root] += 1;
    }
    let best = (0..size.len()).max_by(|&a, &b| size[a].cmp(&size[b]).then(b.cmp(&a))).unwrap_or(0);
    let keep: Vec<bool> = raw
        .iter()
        .map(|e| {
            let root = find(&mut parent, index[e.sender.as_str()]);
            root == best
        })
        .collect();
    let before = raw.len();
    let mut it = keep.iter();
    raw.retain(|_| *it.next().unwrap());
    before - raw.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(text: &str) -> Result<Ingested> {
        ingest_reader(text.as_bytes(), &IngestOptions::default())
    }

    #[test]
    fn endpoints_map_to_range() {
        let ing = run("sender,receiver,timestamp\na,b,5\nb,a,15\n").unwrap();
        let times: Vec<f64> = ing.log.events().iter().map(|e| e.time).collect();
        assert_eq!(times, vec![0.0, 1000.0]);
        assert_eq!(ing.tokens, vec!["a", "b"]);
        assert_eq!(ing.log.horizon(), 1000.0);
    }

    #[test]
    fn self_edges_are_counted_and_dropped() {
        let ing = run("sender,receiver,timestamp\nx,x,1\nx,y,2\ny,z,3\nz,z,4\n").unwrap();
        assert_eq!(ing.summary.self_edges_dropped, 2);
        assert_eq!(ing.log.len(), 2);
        assert_eq!(ing.log.n(), 3);
    }

    #[test]
    fn ids_follow_time_order() {
        let ing = run("sender,receiver,timestamp\nc,d,9\na,b,1\n").unwrap();
        assert_eq!(ing.tokens, vec!["a", "b", "c", "d"]);
        assert_eq!(ing.log.events()[0].sender, 0);
    }

    #[test]
    fn ties_become_strictly_increasing() {
        let ing = run("sender,receiver,timestamp\na,b,0\na,b,10\nb,a,10\na,b,10\n").unwrap();
        let t: Vec<f64> = ing.log.events().iter().map(|e| e.time).collect();
        assert!(t.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*t.last().unwrap(), 1000.0);
        assert_eq!(ing.summary.ties_broken, 2);
        // input order survives among the tied rows
        assert_eq!(ing.log.events()[1].sender, 0);
        assert_eq!(ing.log.events()[2].sender, 1);
    }

    #[test]
    fn errors_carry_line_numbers() {
        match run("sender,receiver,timestamp\na,b,1\na,b,oops\n") {
            Err(ChipError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        match run("sender,receiver,timestamp\na,b,1\na,b\n") {
            Err(ChipError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(run("").is_err());
        assert!(run("sender,receiver,timestamp\n").is_err());
        assert!(run("from,to,time\na,b,1\n").is_err());
        assert!(run("sender,receiver,timestamp\na,b,3\nb,c,3\n").is_err());
    }

    #[test]
    fn largest_component_filter() {
        let text = "sender,receiver,timestamp\na,b,1\nb,c,2\nx,y,3\nc,a,4\ny,x,5\nd,a,6\n";
        let ing = ingest_reader(text.as_bytes(), &IngestOptions { largest_component: true }).unwrap();
        assert_eq!(ing.summary.outside_component_dropped, 2);
        assert_eq!(ing.log.n(), 4);
        assert_eq!(ing.tokens, vec!["a", "b", "c", "d"]);
    }

    #[test]
    fn idempotent() {
        let text = "sender,receiver,timestamp\nu7,u3,1700000000\nu3,u7,1700000100\nu1,u7,1700000100\nu3,u1,1700009999\nu1,u3,1700003333.5\n";
        let first = run(text).unwrap().log;
        let mut buf = Vec::new();
        first.write_csv(&mut buf).unwrap();
        let second = ingest_reader(buf.as_slice(), &IngestOptions::default()).unwrap().log;
        assert_eq!(first, second);
    }
}
