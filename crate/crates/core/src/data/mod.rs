//! Datasets: the synthetic rotating-Gaussian domains, temperature records
//! turned into a regression task, and their on-disk form.

mod dg;
mod io;
mod tpt;

pub use dg::{bayes_label, generate_dg, DgMetadata};
pub use tpt::{
    build_tpt_task, builtin_split, load_tpt_csv, parse_tpt_csv, write_tpt_csv, SplitConfig, Standardizer,
    TptMetadata, TptRecord,
};

use serde::{Deserialize, Serialize};

use crate::error::{GrdaError, Result};
use crate::graph::DomainGraph;

/// Supervision attached to a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Target {
    Class(usize),
    Real(Vec<f64>),
}

impl Target {
    pub fn class(&self) -> Option<usize> {
        match self {
            Target::Class(c) => Some(*c),
            Target::Real(_) => None,
        }
    }

    pub fn real(&self) -> Option<&[f64]> {
        match self {
            Target::Real(v) => Some(v),
            Target::Class(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    /// Present only for samples from source domains.
    pub y: Option<Target>,
    pub u: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Classification { classes: usize },
    Regression { dim: usize },
}

impl TaskKind {
    pub fn output_dim(&self) -> usize {
        match *self {
            TaskKind::Classification { classes } => classes,
            TaskKind::Regression { dim } => dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graph: DomainGraph,
    pub samples: Vec<Sample>,
    /// Labels withheld from training, parallel to `samples`; `Some` for
    /// target-domain samples whose ground truth is known.
    pub heldout: Vec<Option<Target>>,
    pub source_domains: Vec<usize>,
    pub target_domains: Vec<usize>,
    pub task: TaskKind,
    pub seed: u64,
    pub dg: Option<DgMetadata>,
    pub tpt: Option<TptMetadata>,
}

impl Dataset {
    pub fn n_domains(&self) -> usize {
        self.graph.n()
    }

    pub fn input_dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.x.len())
    }

    pub fn is_source(&self, u: usize) -> bool {
        self.source_domains.contains(&u)
    }

    pub fn labeled(&self) -> impl Iterator<Item = &Sample> {
        self.samples.iter().filter(|s| s.y.is_some())
    }

    pub fn labeled_count(&self) -> usize {
        self.labeled().count()
    }

    pub fn domain_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_domains()];
        for s in &self.samples {
            counts[s.u] += 1;
        }
        counts
    }

    /// Indices of samples in domain `u`.
    pub fn domain_indices(&self, u: usize) -> Vec<usize> {
        (0..self.samples.len()).filter(|&i| self.samples[i].u == u).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_domains();
        if self.heldout.len() != self.samples.len() {
            return Err(GrdaError::input("held-out labels are not parallel to samples"));
        }
        let mut role = vec![0u8; n];
        for &u in &self.source_domains {
            if u >= n {
                return Err(GrdaError::input(format!("source domain {u} outside 0..{n}")));
            }
            role[u] |= 1;
        }
        for &u in &self.target_domains {
            if u >= n {
                return Err(GrdaError::input(format!("target domain {u} outside 0..{n}")));
            }
            role[u] |= 2;
        }
        if let Some(u) = role.iter().position(|&r| r != 1 && r != 2) {
            return Err(GrdaError::input(format!(
                "domain {u} must be exactly one of source or target"
            )));
        }
        let dim = self.input_dim();
        for (i, s) in self.samples.iter().enumerate() {
            if s.u >= n {
                return Err(GrdaError::input(format!("sample {i} has domain {} outside 0..{n}", s.u)));
            }
            if s.x.len() != dim || s.x.iter().any(|v| !v.is_finite()) {
                return Err(GrdaError::input(format!("sample {i} has malformed features")));
            }
            if s.y.is_some() != (role[s.u] == 1) {
                return Err(GrdaError::input(format!(
                    "sample {i}: labels must be present exactly for source domains"
                )));
            }
        }
        if let Some(u) = self.domain_counts().iter().position(|&c| c == 0) {
            return Err(GrdaError::input(format!("domain {u} has no samples")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_catches_overlap_and_leaks() {
        let mut ds = generate_dg(4, 4, 2, 1).unwrap();
        ds.validate().unwrap();
        let mut bad = ds.clone();
        bad.target_domains.push(bad.source_domains[0]);
        assert!(bad.validate().is_err());
        let t = ds.target_domains[0];
        let i = ds.domain_indices(t)[0];
        ds.samples[i].y = Some(Target::Class(1));
        assert!(ds.validate().is_err());
    }
}
