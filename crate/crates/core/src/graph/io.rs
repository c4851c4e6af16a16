use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DomainGraph, NodeEmbeddingTable};
use crate::error::{GrdaError, Result};

/// On-disk graph: `{"n": N, "edges": [[i, j], ...]}`, 0-based.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct GraphDoc {
    n: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphDoc> for DomainGraph {
    type Error = GrdaError;

    fn try_from(doc: GraphDoc) -> Result<Self> {
        let edges: Vec<(usize, usize)> = doc.edges.iter().map(|e| (e[0], e[1])).collect();
        DomainGraph::from_edges(doc.n, &edges)
    }
}

impl From<DomainGraph> for GraphDoc {
    fn from(g: DomainGraph) -> Self {
        GraphDoc {
            n: g.n(),
            edges: g.edges().into_iter().map(|(i, j)| [i, j]).collect(),
        }
    }
}

impl DomainGraph {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| GrdaError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path).map_err(|e| GrdaError::io(path, e))?;
        Self::from_json(&s)
    }
}

impl NodeEmbeddingTable {
    /// One row per domain, `k` comma-separated columns, no header.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(s: &str, path: &Path) -> Result<Self> {
        let mut rows = Vec::new();
        for (idx, line) in s.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| GrdaError::Parse {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    message: e.to_string(),
                })?;
            rows.push(row);
        }
        NodeEmbeddingTable::new(rows)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| GrdaError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path).map_err(|e| GrdaError::io(path, e))?;
        Self::from_csv(&s, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_json_format() {
        let g = DomainGraph::chain(3).unwrap();
        assert_eq!(g.to_json(), r#"{"n":3,"edges":[[0,1],[1,2]]}"#);
        assert_eq!(DomainGraph::from_json(&g.to_json()).unwrap(), g);
        assert!(DomainGraph::from_json(r#"{"n":2,"edges":[[0,0]]}"#).is_err());
        assert!(DomainGraph::from_json(r#"{"n":2,"edges":[[0,5]]}"#).is_err());
    }

    #[test]
    fn embedding_csv_round_trip() {
        let t = NodeEmbeddingTable::new(vec![vec![0.1, -2.5], vec![3.0, 1e-17]]).unwrap();
        let back = NodeEmbeddingTable::from_csv(&t.to_csv(), Path::new("t.csv")).unwrap();
        assert_eq!(back, t);
        let err = NodeEmbeddingTable::from_csv("1,2\n3,x\n", Path::new("t.csv")).unwrap_err();
        assert!(matches!(err, GrdaError::Parse { line: 2, .. }));
    }
}
