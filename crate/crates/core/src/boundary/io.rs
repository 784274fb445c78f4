use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BoundaryGraph, Edge, GraphParams};
use crate::complex::{contact_at, Structure};
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::linalg::point;

/// On-disk form of a boundary graph.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GraphFile {
    pub format: String,
    pub version: u32,
    pub params: GraphParams,
    pub k_used: usize,
    pub nodes: Vec<Vec<f64>>,
    pub edges: Vec<Edge>,
}

const FORMAT: &str = "hypkob-boundary-graph";

impl GraphFile {
    pub fn from_graph(g: &BoundaryGraph) -> Self {
        GraphFile {
            format: FORMAT.into(),
            version: 1,
            params: g.params().clone(),
            k_used: g.k_used(),
            nodes: g.nodes().iter().map(|p| p.iter().cloned().collect()).collect(),
            edges: g.edges().to_vec(),
        }
    }

    pub fn to_graph(&self, domain: &Domain, structure: &Structure) -> Result<BoundaryGraph> {
        if self.format != FORMAT || self.version != 1 {
            return Err(Error::Config(format!("unsupported graph file {} v{}", self.format, self.version)));
        }
        let n = self.nodes.len();
        if n < 2 {
            return Err(Error::Config("graph file has fewer than two nodes".into()));
        }
        if self.nodes.iter().any(|p| p.len() != domain.dim()) {
            return Err(Error::DimensionMismatch { expected: domain.dim(), got: self.nodes[0].len() });
        }
        if self.edges.iter().any(|e| e.a >= n || e.b >= n || e.frame >= n || !(e.weight > 0.0)) {
            return Err(Error::Config("graph file has an invalid edge".into()));
        }
        let nodes: Vec<_> = self.nodes.iter().map(|p| point(p)).collect();
        let contact = nodes
            .iter()
            .enumerate()
            .map(|(i, p)| {
                contact_at(domain, structure, p, self.params.contact_floor)
                    .map_err(|e| Error::ContactUnavailable { node: i, reason: e.to_string() })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BoundaryGraph::from_parts(self.params.clone(), self.k_used, nodes, contact, self.edges.clone()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}
