//! Dataset directories: `dataset.csv`, `graph.json` and `metadata.json`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, DgMetadata, Sample, Target, TaskKind, TptMetadata};
use crate::error::{GrdaError, Result};
use crate::graph::DomainGraph;

pub const DATASET_CSV: &str = "dataset.csv";
pub const GRAPH_JSON: &str = "graph.json";
pub const METADATA_JSON: &str = "metadata.json";

#[derive(Serialize, Deserialize)]
struct Metadata {
    task: TaskKind,
    seed: u64,
    input_dim: usize,
    source_domains: Vec<usize>,
    target_domains: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dg: Option<DgMetadata>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tpt: Option<TptMetadata>,
}

fn csv_header(input_dim: usize, task: TaskKind) -> Vec<String> {
    let mut cols: Vec<String> = (1..=input_dim).map(|i| format!("x{i}")).collect();
    match task {
        TaskKind::Classification { .. } => cols.push("y".into()),
        TaskKind::Regression { dim } => cols.extend((1..=dim).map(|i| format!("y{i}"))),
    }
    cols.push("u".into());
    cols.push("is_source".into());
    cols
}

impl Dataset {
    /// CSV rows carry every label, including held-out ones; `is_source`
    /// decides which are exposed on load.
    pub fn to_csv(&self) -> String {
        let mut s = csv_header(self.input_dim(), self.task).join(",");
        s.push('\n');
        for (sample, held) in self.samples.iter().zip(&self.heldout) {
            for v in &sample.x {
                let _ = write!(s, "{v:?},");
            }
            match sample.y.as_ref().or(held.as_ref()) {
                Some(Target::Class(c)) => {
                    let _ = write!(s, "{c},");
                }
                Some(Target::Real(v)) => {
                    for x in v {
                        let _ = write!(s, "{x:?},");
                    }
                }
                None => {
                    let blanks = match self.task {
                        TaskKind::Classification { .. } => 1,
                        TaskKind::Regression { dim } => dim,
                    };
                    s.push_str(&",".repeat(blanks));
                }
            }
            let _ = writeln!(s, "{},{}", sample.u, u8::from(self.is_source(sample.u)));
        }
        s
    }

    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| GrdaError::io(dir, e))?;
        let write = |name: &str, body: String| {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| GrdaError::io(p, e))
        };
        write(DATASET_CSV, self.to_csv())?;
        self.graph.save(&dir.join(GRAPH_JSON))?;
        let meta = Metadata {
            task: self.task,
            seed: self.seed,
            input_dim: self.input_dim(),
            source_domains: self.source_domains.clone(),
            target_domains: self.target_domains.clone(),
            dg: self.dg.clone(),
            tpt: self.tpt.clone(),
        };
        write(METADATA_JSON, serde_json::to_string_pretty(&meta)?)
    }

    pub fn load_dir(dir: &Path) -> Result<Self> {
        let graph = DomainGraph::load(&dir.join(GRAPH_JSON))?;
        let meta_path = dir.join(METADATA_JSON);
        let meta_text = std::fs::read_to_string(&meta_path).map_err(|e| GrdaError::io(&meta_path, e))?;
        let meta: Metadata = serde_json::from_str(&meta_text)?;
        let csv_path = dir.join(DATASET_CSV);
        let text = std::fs::read_to_string(&csv_path).map_err(|e| GrdaError::io(&csv_path, e))?;
        let err = |line: usize, message: String| GrdaError::Parse { path: csv_path.clone(), line, message };

        let header = csv_header(meta.input_dim, meta.task);
        let mut lines = text.lines().enumerate();
        let first = lines.next().map(|(_, l)| l).unwrap_or("");
        if first.split(',').map(str::trim).ne(header.iter().map(String::as_str)) {
            return Err(err(1, format!("expected header \"{}\"", header.join(","))));
        }
        let num = |line: usize, f: &str| -> Result<f64> {
            f.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| err(line, format!("bad number {f:?}")))
        };
        let mut samples = Vec::new();
        let mut heldout = Vec::new();
        for (idx, raw) in lines {
            let line = idx + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = raw.split(',').map(str::trim).collect();
            if f.len() != header.len() {
                return Err(err(line, format!("expected {} fields, found {}", header.len(), f.len())));
            }
            let d = meta.input_dim;
            let x = f[..d].iter().map(|v| num(line, v)).collect::<Result<Vec<_>>>()?;
            let n_y = header.len() - d - 2;
            let y_fields = &f[d..d + n_y];
            let u: usize = f[d + n_y].parse().map_err(|_| err(line, format!("bad domain {:?}", f[d + n_y])))?;
            let src = match f[d + n_y + 1] {
                "1" => true,
                "0" => false,
                other => return Err(err(line, format!("is_source must be 0 or 1, got {other:?}"))),
            };
            let label = if y_fields.iter().all(|v| v.is_empty()) {
                None
            } else {
                Some(match meta.task {
                    TaskKind::Classification { .. } => Target::Class(
                        y_fields[0].parse().map_err(|_| err(line, format!("bad class {:?}", y_fields[0])))?,
                    ),
                    TaskKind::Regression { .. } => {
                        Target::Real(y_fields.iter().map(|v| num(line, v)).collect::<Result<Vec<_>>>()?)
                    }
                })
            };
            if src != meta.source_domains.contains(&u) {
                return Err(err(line, format!("is_source disagrees with metadata for domain {u}")));
            }
            if src && label.is_none() {
                return Err(err(line, "source sample without label".into()));
            }
            if src {
                samples.push(Sample { x, y: label, u });
                heldout.push(None);
            } else {
                samples.push(Sample { x, y: None, u });
                heldout.push(label);
            }
        }
        let ds = Dataset {
            graph,
            samples,
            heldout,
            source_domains: meta.source_domains,
            target_domains: meta.target_domains,
            task: meta.task,
            seed: meta.seed,
            dg: meta.dg,
            tpt: meta.tpt,
        };
        ds.validate()?;
        Ok(ds)
    }
}

#[cfg(test)]
mod tests {
    use super::super::generate_dg;
    use super::*;

    #[test]
    fn dg_round_trip() {
        let ds = generate_dg(15, 10, 6, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        ds.save_dir(dir.path()).unwrap();
        let back = Dataset::load_dir(dir.path()).unwrap();
        assert_eq!(back, ds);
        let head = std::fs::read_to_string(dir.path().join(DATASET_CSV)).unwrap();
        assert!(head.starts_with("x1,x2,y,u,is_source\n"));
    }

    #[test]
    fn corrupt_row_is_reported() {
        let ds = generate_dg(4, 2, 2, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        ds.save_dir(dir.path()).unwrap();
        let p = dir.path().join(DATASET_CSV);
        let mut text = std::fs::read_to_string(&p).unwrap();
        text.push_str("1.0,oops,1,0,1\n");
        std::fs::write(&p, text).unwrap();
        assert!(matches!(Dataset::load_dir(dir.path()), Err(GrdaError::Parse { line: 10, .. })));
    }
}
