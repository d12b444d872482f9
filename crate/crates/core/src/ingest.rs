//! Edge-list input, threshold/state assignment, and CSV/JSON output.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::TrajectoryRecord;
use crate::ensembles::{permutation, EnsembleSample};
use crate::graph::{Network, NodeId, StateVector};
use crate::meanfield::{LimitPoint, RecursionTrajectory};
use crate::rng::{purpose, stream};
use crate::statistics::apportion;
use crate::threshold::{Fraction, ThresholdCdf};
use crate::{Error, Result};

/// Parsed edge list with dense ids. `external_ids[i]` is the id node `i`
/// had in the file; dense ids follow the sorted external ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeList {
    pub edges: Vec<(NodeId, NodeId)>,
    pub external_ids: Vec<u64>,
}

impl EdgeList {
    pub fn node_count(&self) -> usize {
        self.external_ids.len()
    }

    pub fn topology(&self) -> Result<Network> {
        Network::topology(self.node_count(), &self.edges)
    }
}

/// Reads `tail head` integer pairs, one per line. `#` starts a comment line;
/// blank lines are skipped and duplicate pairs are kept.
pub fn parse_edge_list(reader: impl BufRead) -> Result<EdgeList> {
    let mut raw: Vec<(u64, u64)> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let mut it = body.split_whitespace();
        let mut next_id = || -> Result<u64> {
            let tok = it.next().ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("expected two node ids, got {body:?}"),
            })?;
            tok.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("bad node id {tok:?}"),
            })
        };
        let pair = (next_id()?, next_id()?);
        if it.next().is_some() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("trailing tokens in {body:?}"),
            });
        }
        raw.push(pair);
    }
    let mut ids: Vec<u64> = raw.iter().flat_map(|&(a, b)| [a, b]).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() > NodeId::MAX as usize {
        return Err(Error::InvalidArgument(format!("{} nodes exceed the id range", ids.len())));
    }
    let dense = |x: u64| ids.binary_search(&x).expect("id collected above") as NodeId;
    let edges = raw.iter().map(|&(a, b)| (dense(a), dense(b))).collect();
    Ok(EdgeList {
        edges,
        external_ids: ids,
    })
}

pub fn read_edge_list(path: &Path) -> Result<EdgeList> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(BufReader::new(f))
}

/// Writes `tail\thead` lines with a comment header.
pub fn write_edge_list(net: &Network, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "# nodes: {} links: {}", net.node_count(), net.link_count())?;
    for (a, b) in net.edges() {
        writeln!(w, "{a}\t{b}")?;
    }
    Ok(())
}

/// Threshold law, seed fraction and the seed for the two permutations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentSpec {
    pub cdf: ThresholdCdf,
    pub upsilon: f64,
    pub seed: u64,
}

/// `round(n * upsilon)`.
pub fn seed_count(n: usize, upsilon: f64) -> usize {
    (n as f64 * upsilon).round() as usize
}

/// Gives node `i` the threshold `ceil(Theta_{pi'(i)} kappa_i)` and the state
/// `Sigma_{pi''(i)}`. `Theta` holds each atom the largest-remainder share of
/// `n` times; `Sigma` has `round(n upsilon)` ones first. `pi'` and `pi''`
/// come from separate streams of `spec.seed`.
pub fn assign(topology: &Network, spec: &AssignmentSpec) -> Result<Network> {
    if !(0.0..=1.0).contains(&spec.upsilon) {
        return Err(Error::InvalidArgument(format!("upsilon {} outside [0, 1]", spec.upsilon)));
    }
    let n = topology.node_count();
    let atoms = spec.cdf.atoms();
    let counts = apportion(n as u64, &atoms.iter().map(|a| a.1).collect::<Vec<_>>());
    let theta: Vec<Fraction> = atoms
        .iter()
        .zip(&counts)
        .flat_map(|(a, &c)| std::iter::repeat_n(a.0, c as usize))
        .collect();
    let pi1 = permutation(n, &mut stream(spec.seed, &[purpose::THRESHOLDS]));
    let pi2 = permutation(n, &mut stream(spec.seed, &[purpose::STATES]));
    let ones = seed_count(n, spec.upsilon);
    let thresholds = (0..n).map(|i| theta[pi1[i]].ceil_mul(topology.out_degree(i))).collect();
    let states = StateVector::from_bools(&(0..n).map(|i| pi2[i] < ones).collect::<Vec<_>>());
    topology.clone().with_attributes(thresholds, states)
}

/// Output format of the table writers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::InvalidArgument(format!("unknown format {s:?}"))),
        }
    }
}

/// A record with a fixed CSV layout. Floats use Rust's shortest round-trip
/// form, so identical values always print identically.
pub trait Table: Serialize {
    fn header(&self) -> &'static str;
    fn rows(&self, out: &mut String);
}

impl Table for TrajectoryRecord {
    fn header(&self) -> &'static str {
        "t,z,a"
    }

    fn rows(&self, out: &mut String) {
        for t in 0..=self.horizon.max(self.last_time()) {
            let _ = writeln!(out, "{t},{},{}", self.z_at(t), self.a_at(t));
        }
    }
}

impl Table for RecursionTrajectory {
    fn header(&self) -> &'static str {
        "t,x,y"
    }

    fn rows(&self, out: &mut String) {
        for t in 0..=self.horizon {
            let _ = writeln!(out, "{t},{},{}", self.x_at(t), self.y_at(t));
        }
    }
}

impl Table for Vec<LimitPoint> {
    fn header(&self) -> &'static str {
        "xi,x_star,y_star"
    }

    fn rows(&self, out: &mut String) {
        for p in self {
            let _ = writeln!(out, "{},{},{}", p.xi, p.x_star, p.y_star);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub upsilon: f64,
    pub rep: usize,
    #[serde(rename = "z_T")]
    pub z_t: f64,
    #[serde(rename = "a_T")]
    pub a_t: f64,
}

impl Table for Vec<SweepRow> {
    fn header(&self) -> &'static str {
        "upsilon,rep,z_T,a_T"
    }

    fn rows(&self, out: &mut String) {
        for r in self {
            let _ = writeln!(out, "{},{},{},{}", r.upsilon, r.rep, r.z_t, r.a_t);
        }
    }
}

pub fn render(table: &impl Table, format: Format) -> Result<String> {
    match format {
        Format::Csv => {
            let mut s = String::new();
            s.push_str(table.header());
            s.push('\n');
            table.rows(&mut s);
            Ok(s)
        }
        Format::Json => {
            let mut s = serde_json::to_string_pretty(table)?;
            s.push('\n');
            Ok(s)
        }
    }
}

/// Writes to `path`, or stdout when `path` is `None`.
pub fn write_text(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => {
            let mut f = BufWriter::new(File::create(p).map_err(|e| Error::io(p, e))?);
            f.write_all(text.as_bytes())
                .and_then(|_| f.flush())
                .map_err(|e| Error::io(p, e))
        }
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

pub fn write_results(table: &impl Table, path: Option<&Path>, format: Format) -> Result<()> {
    write_text(&render(table, format)?, path)
}

/// Attributes of an exported sample; the wiring lives in the edge list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSidecar {
    pub nodes: usize,
    pub links: usize,
    pub seed: u64,
    pub thresholds: Vec<u32>,
    pub states: StateVector,
}

/// Writes `<stem>.edges` and `<stem>.json`.
pub fn export_sample(sample: &EnsembleSample, stem: &Path) -> Result<()> {
    let edges_path = stem.with_extension("edges");
    let mut buf = Vec::new();
    write_edge_list(&sample.network, &mut buf).map_err(|e| Error::io(&edges_path, e))?;
    write_text(std::str::from_utf8(&buf).expect("ascii"), Some(&edges_path))?;
    let net = &sample.network;
    let side = SampleSidecar {
        nodes: net.node_count(),
        links: net.link_count(),
        seed: sample.seed,
        thresholds: net.thresholds().to_vec(),
        states: net.initial_state().clone(),
    };
    write_text(&serde_json::to_string(&side)?, Some(&stem.with_extension("json")))
}

/// Reads back an exported sample.
pub fn import_sample(stem: &Path) -> Result<Network> {
    let side_path = stem.with_extension("json");
    let text = std::fs::read_to_string(&side_path).map_err(|e| Error::io(&side_path, e))?;
    let side: SampleSidecar = serde_json::from_str(&text)?;
    let list = read_edge_list(&stem.with_extension("edges"))?;
    // ids in the file are already dense, but isolated nodes never appear
    let edges: Vec<(NodeId, NodeId)> = list
        .edges
        .iter()
        .map(|&(a, b)| (list.external_ids[a as usize] as NodeId, list.external_ids[b as usize] as NodeId))
        .collect();
    Network::build(&edges, side.thresholds, side.states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn comments_and_duplicates() {
        let l = parse_edge_list(Cursor::new("# c\n0 1\n1 0\n")).unwrap();
        assert_eq!((l.edges.len(), l.node_count()), (2, 2));
        let d = parse_edge_list(Cursor::new("0 1\n0 1\n")).unwrap();
        assert_eq!(d.topology().unwrap().out_degree(0), 2);
    }

    #[test]
    fn sparse_ids_are_compacted() {
        let l = parse_edge_list(Cursor::new("100\t7\n\n7 3000\n")).unwrap();
        assert_eq!(l.external_ids, vec![7, 100, 3000]);
        assert_eq!(l.edges, vec![(1, 0), (0, 2)]);
    }

    #[test]
    fn malformed_lines_report_line_number() {
        for (text, line) in [("0 1\nx 2\n", 2), ("0 1\n# ok\n3\n", 3), ("1 2 3\n", 1)] {
            match parse_edge_list(Cursor::new(text)) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn edge_list_round_trip() {
        let net = Network::topology(4, &[(0, 1), (1, 2), (1, 2), (2, 2), (3, 0)]).unwrap();
        let mut buf = Vec::new();
        write_edge_list(&net, &mut buf).unwrap();
        let back = parse_edge_list(Cursor::new(buf)).unwrap();
        assert_eq!(back.topology().unwrap(), net);
    }

    fn star(k: u32) -> Network {
        let edges: Vec<_> = (1..=k).map(|j| (0, j)).collect();
        Network::topology(k as usize + 1, &edges).unwrap()
    }

    #[test]
    fn half_threshold_rounds_up() {
        let spec = AssignmentSpec {
            cdf: "1/2".parse().unwrap(),
            upsilon: 1.0,
            seed: 3,
        };
        let net = assign(&star(7), &spec).unwrap();
        assert_eq!(net.threshold(0), 4);
        assert_eq!(net.initial_state().count_ones(), 8);
    }

    #[test]
    fn assignment_counts_are_exact() {
        // out-degree 10 everywhere, so each atom maps to its own threshold
        let edges: Vec<_> = (0..1000u32).flat_map(|i| (1..=10).map(move |j| (i, (i + j) % 1000))).collect();
        let topo = Network::topology(1000, &edges).unwrap();
        let spec = AssignmentSpec {
            cdf: "0.3@1/5,0.3@1/2,0.4@4/5".parse().unwrap(),
            upsilon: 0.2475,
            seed: 17,
        };
        let net = assign(&topo, &spec).unwrap();
        let count = |r| net.thresholds().iter().filter(|&&x| x == r).count();
        assert_eq!((count(2), count(5), count(8)), (300, 300, 400));
        assert_eq!(net.initial_state().count_ones(), 248);
        // the two permutations are not the same draw
        let spec2 = AssignmentSpec { seed: 18, ..spec.clone() };
        assert_ne!(assign(&topo, &spec2).unwrap(), net);
    }

    #[test]
    fn csv_headers() {
        let rows = vec![SweepRow {
            upsilon: 0.25,
            rep: 0,
            z_t: 1.0,
            a_t: 0.5,
        }];
        assert_eq!(render(&rows, Format::Csv).unwrap(), "upsilon,rep,z_T,a_T\n0.25,0,1,0.5\n");
        let lp = vec![LimitPoint {
            xi: 0.1,
            x_star: 0.0,
            y_star: 0.0,
        }];
        assert!(render(&lp, Format::Csv).unwrap().starts_with("xi,x_star,y_star\n"));
        let json = render(&rows, Format::Json).unwrap();
        assert!(json.contains("\"z_T\": 1.0"));
    }

    #[test]
    fn sample_export_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("s");
        let net = Network::build(&[(0, 1), (1, 0), (1, 1)], vec![1, 2, 0], StateVector::from_bools(&[true, false, false])).unwrap();
        let sample = EnsembleSample { network: net.clone(), seed: 4 };
        export_sample(&sample, &stem).unwrap();
        assert_eq!(import_sample(&stem).unwrap(), net);
    }
}
