use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, Sample, Target, TaskKind};
use crate::error::{GrdaError, Result};
use crate::graph::DomainGraph;

pub const MONTHS: usize = 12;
pub const HALF: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TptRecord {
    pub state: String,
    pub year: i32,
    /// Monthly mean temperatures in °F, January first.
    pub temps: [f64; MONTHS],
}

fn header() -> String {
    let mut h = String::from("state,year");
    for m in 1..=MONTHS {
        h.push_str(&format!(",m{m}"));
    }
    h
}

pub fn parse_tpt_csv(text: &str, path: &Path) -> Result<Vec<TptRecord>> {
    let err = |line: usize, message: String| GrdaError::Parse { path: path.to_path_buf(), line, message };
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let cols: Vec<&str> = first.split(',').map(str::trim).collect();
    let expected = header();
    if cols != expected.split(',').collect::<Vec<_>>() {
        return Err(err(1, format!("expected header \"{expected}\"")));
    }
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if fields.len() != MONTHS + 2 {
            return Err(err(line, format!("expected {} fields, found {}", MONTHS + 2, fields.len())));
        }
        let state = fields[0].to_string();
        if state.is_empty() {
            return Err(err(line, "empty state code".into()));
        }
        let year: i32 = fields[1].parse().map_err(|_| err(line, format!("bad year {:?}", fields[1])))?;
        let mut temps = [0.0; MONTHS];
        for (m, t) in temps.iter_mut().enumerate() {
            let f = fields[m + 2];
            *t = f
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(line, format!("m{} is not a finite number: {f:?}", m + 1)))?;
        }
        if let Some(prev) = seen.insert((state.clone(), year), line) {
            return Err(err(line, format!("duplicate ({state}, {year}), first seen on line {prev}")));
        }
        out.push(TptRecord { state, year, temps });
    }
    Ok(out)
}

pub fn load_tpt_csv(path: &Path) -> Result<Vec<TptRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| GrdaError::io(path, e))?;
    parse_tpt_csv(&text, path)
}

pub fn write_tpt_csv(records: &[TptRecord], path: &Path) -> Result<()> {
    let mut s = header();
    s.push('\n');
    for r in records {
        s.push_str(&format!("{},{}", r.state, r.year));
        for t in &r.temps {
            s.push_str(&format!(",{t:?}"));
        }
        s.push('\n');
    }
    std::fs::write(path, s).map_err(|e| GrdaError::io(path, e))
}

/// Which states are labeled, which are not, and how they border each other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub source: Vec<String>,
    pub target: Vec<String>,
    pub edges: Vec<[String; 2]>,
}

impl SplitConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GrdaError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Domain order: sources as listed, then targets.
    pub fn states(&self) -> Vec<String> {
        self.source.iter().chain(&self.target).cloned().collect()
    }

    pub fn graph(&self) -> Result<DomainGraph> {
        let states = self.states();
        let index: HashMap<&str, usize> = states.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        if index.len() != states.len() {
            return Err(GrdaError::input("split lists a state twice"));
        }
        let mut edges = Vec::with_capacity(self.edges.len());
        for [a, b] in &self.edges {
            let (Some(&i), Some(&j)) = (index.get(a.as_str()), index.get(b.as_str())) else {
                return Err(GrdaError::input(format!("edge {a}-{b} names a state outside the split")));
            };
            edges.push((i, j));
        }
        DomainGraph::from_edges(states.len(), &edges)
    }
}

const ADJACENCY: &str = include_str!("../../data/us48_adjacency.json");
const SPLIT_EW: &str = include_str!("../../data/split_ew.json");
const SPLIT_NS: &str = include_str!("../../data/split_ns.json");

#[derive(Deserialize)]
struct AdjacencyDoc {
    edges: Vec<[String; 2]>,
}

#[derive(Deserialize)]
struct SideDoc {
    note: Option<String>,
    source: Vec<String>,
    target: Vec<String>,
}

/// Bundled 48-state splits: `"ew"` (east labeled) or `"ns"` (north labeled).
pub fn builtin_split(name: &str) -> Result<SplitConfig> {
    let sides = match name {
        "ew" => SPLIT_EW,
        "ns" => SPLIT_NS,
        other => return Err(GrdaError::input(format!("unknown split {other:?}, expected ew or ns"))),
    };
    let sides: SideDoc = serde_json::from_str(sides)?;
    let adj: AdjacencyDoc = serde_json::from_str(ADJACENCY)?;
    Ok(SplitConfig { note: sides.note, source: sides.source, target: sides.target, edges: adj.edges })
}

/// Per-column affine map to zero mean and unit variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        let d = rows.first().map(|r| r.len()).ok_or_else(|| GrdaError::input("no rows to fit"))?;
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in &rows {
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; d];
        for r in &rows {
            for c in 0..d {
                var[c] += (r[c] - mean[c]).powi(2) / n;
            }
        }
        let std = var.iter().map(|v| if *v > 0.0 { v.sqrt() } else { 1.0 }).collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(self.mean.iter().zip(&self.std)).map(|(v, (m, s))| (v - m) / s).collect()
    }

    pub fn invert(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(self.mean.iter().zip(&self.std)).map(|(v, (m, s))| v * s + m).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TptMetadata {
    pub states: Vec<String>,
    pub years: Vec<i32>,
    pub x_scaler: Standardizer,
    pub y_scaler: Standardizer,
}

/// Six-months-ahead regression: the first half of each year predicts the
/// second. Inputs and outputs are standardized by source-state statistics.
pub fn build_tpt_task(records: &[TptRecord], split: &SplitConfig) -> Result<Dataset> {
    let graph = split.graph()?;
    let states = split.states();
    let src: BTreeSet<&str> = split.source.iter().map(String::as_str).collect();
    if split.target.iter().any(|t| src.contains(t.as_str())) {
        return Err(GrdaError::input("source and target splits overlap"));
    }
    let index: HashMap<&str, usize> = states.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut by_state: BTreeMap<usize, Vec<&TptRecord>> = BTreeMap::new();
    for r in records {
        if let Some(&u) = index.get(r.state.as_str()) {
            by_state.entry(u).or_default().push(r);
        }
    }
    if let Some(missing) = states.iter().enumerate().find(|(u, _)| !by_state.contains_key(u)) {
        return Err(GrdaError::input(format!("state {} has no records", missing.1)));
    }
    let n_sources = split.source.len();
    let is_source = |u: usize| u < n_sources;
    let source_rows = || by_state.iter().filter(|(u, _)| is_source(**u)).flat_map(|(_, rs)| rs.iter());
    let x_scaler = Standardizer::fit(source_rows().map(|r| &r.temps[..HALF]))?;
    let y_scaler = Standardizer::fit(source_rows().map(|r| &r.temps[HALF..]))?;

    let mut samples = Vec::new();
    let mut heldout = Vec::new();
    let mut years = BTreeSet::new();
    for (&u, rs) in &by_state {
        let mut rs = rs.clone();
        rs.sort_by_key(|r| r.year);
        for r in rs {
            years.insert(r.year);
            let x = x_scaler.apply(&r.temps[..HALF]);
            let y = Target::Real(y_scaler.apply(&r.temps[HALF..]));
            if is_source(u) {
                samples.push(Sample { x, y: Some(y), u });
                heldout.push(None);
            } else {
                samples.push(Sample { x, y: None, u });
                heldout.push(Some(y));
            }
        }
    }
    let ds = Dataset {
        graph,
        samples,
        heldout,
        source_domains: (0..n_sources).collect(),
        target_domains: (n_sources..states.len()).collect(),
        task: TaskKind::Regression { dim: HALF },
        seed: 0,
        dg: None,
        tpt: Some(TptMetadata { states, years: years.into_iter().collect(), x_scaler, y_scaler }),
    };
    ds.validate()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn synthetic(states: &[String], years: std::ops::Range<i32>) -> Vec<TptRecord> {
        let mut out = Vec::new();
        for (s, name) in states.iter().enumerate() {
            for y in years.clone() {
                let mut temps = [0.0; MONTHS];
                for (m, t) in temps.iter_mut().enumerate() {
                    *t = 50.0 + 25.0 * ((m as f64 - 3.5) * 0.5).sin() + s as f64 * 0.3 + (y % 3) as f64;
                }
                out.push(TptRecord { state: name.clone(), year: y, temps });
            }
        }
        out
    }

    #[test]
    fn parses_example_row() {
        let text = "state,year,m1,m2,m3,m4,m5,m6,m7,m8,m9,m10,m11,m12\n\
                    NY,2010,27.1,30,41,50,60,70,75,72,64,52,44,38.0\n";
        let r = parse_tpt_csv(text, Path::new("t.csv")).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].state, "NY");
        assert_eq!(r[0].temps[0], 27.1);
        assert_eq!(r[0].temps[11], 38.0);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let h = header();
        let bad = format!("{h}\nNY,2010,1,2,3,4,5,6,7,8,9,10,11,12\nNJ,2010,1,2,3,4,5,6,7,8,9,10,11\n");
        match parse_tpt_csv(&bad, Path::new("t.csv")) {
            Err(GrdaError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let nan = format!("{h}\nNY,2010,1,2,3,x,5,6,7,8,9,10,11,12\n");
        assert!(matches!(parse_tpt_csv(&nan, Path::new("t")), Err(GrdaError::Parse { line: 2, .. })));
        let dup = format!("{h}\nNY,2010,1,2,3,4,5,6,7,8,9,10,11,12\nNY,2010,1,2,3,4,5,6,7,8,9,10,11,12\n");
        assert!(matches!(parse_tpt_csv(&dup, Path::new("t")), Err(GrdaError::Parse { line: 3, .. })));
        assert!(matches!(parse_tpt_csv("state,year\n", Path::new("t")), Err(GrdaError::Parse { line: 1, .. })));
    }

    #[test]
    fn csv_round_trip() {
        let split = builtin_split("ew").unwrap();
        let records = synthetic(&split.states(), 2008..2020);
        assert_eq!(records.len(), 576);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_tpt_csv(&records, &path).unwrap();
        assert_eq!(load_tpt_csv(&path).unwrap(), records);
    }

    #[test]
    fn builtin_splits_cover_48_states() {
        for name in ["ew", "ns"] {
            let split = builtin_split(name).unwrap();
            assert_eq!(split.source.len(), 24, "{name}");
            assert_eq!(split.target.len(), 24, "{name}");
            let g = split.graph().unwrap();
            assert_eq!(g.n(), 48);
            assert_eq!(g.edge_count(), split.edges.len());
            assert!(g.is_connected());
        }
        assert!(builtin_split("xx").is_err());
    }

    #[test]
    fn task_shapes_and_standardization() {
        let split = builtin_split("ew").unwrap();
        let ds = build_tpt_task(&synthetic(&split.states(), 2008..2020), &split).unwrap();
        assert_eq!(ds.source_domains.len(), 24);
        assert_eq!(ds.target_domains.len(), 24);
        assert_eq!(ds.samples.len(), 576);
        assert_eq!(ds.task.output_dim(), 6);
        for (s, h) in ds.samples.iter().zip(&ds.heldout) {
            assert_eq!(s.x.len(), 6);
            let y = s.y.as_ref().or(h.as_ref()).unwrap();
            assert_eq!(y.real().unwrap().len(), 6);
        }
        let src: Vec<&Sample> = ds.labeled().collect();
        for c in 0..6 {
            let mean = src.iter().map(|s| s.x[c]).sum::<f64>() / src.len() as f64;
            let var = src.iter().map(|s| (s.x[c] - mean).powi(2)).sum::<f64>() / src.len() as f64;
            assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-9);
            assert_abs_diff_eq!(var, 1.0, epsilon = 1e-9);
        }
        let meta = ds.tpt.as_ref().unwrap();
        let back = meta.y_scaler.invert(ds.heldout.iter().flatten().next().unwrap().real().unwrap());
        assert!(back.iter().all(|v| *v > 0.0 && *v < 100.0));
    }

    #[test]
    fn missing_state_is_an_error() {
        let split = builtin_split("ns").unwrap();
        let mut records = synthetic(&split.states(), 2008..2010);
        records.retain(|r| r.state != "TX");
        assert!(matches!(build_tpt_task(&records, &split), Err(GrdaError::Input(_))));
    }
}
