use serde::{Deserialize, Serialize};

use super::{validate_chain, ChainParams, CylinderGraph, GridSpec, SearchResult};
use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::geometry::ParabolicCylinder;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExportedNode {
    pub level: usize,
    pub cylinder: ParabolicCylinder,
}

/// Materialized cylinder graph with its provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExportedGraph {
    pub domain: DomainSpec,
    pub chain_params: ChainParams,
    pub grid: GridSpec,
    pub nodes: Vec<ExportedNode>,
    pub edges: Vec<(u32, u32)>,
}

fn check_cylinder(c: &ParabolicCylinder, domain: &DomainSpec) -> Result<()> {
    domain.metric.check_dim(c.center.x.len())?;
    if !(c.center.is_finite() && c.radius.is_finite() && c.radius > 0.0) {
        return Err(Error::invalid("cylinder needs a finite center and a finite radius > 0"));
    }
    Ok(())
}

impl ExportedGraph {
    pub fn from_graph(g: &CylinderGraph) -> ExportedGraph {
        ExportedGraph {
            domain: g.domain.clone(),
            chain_params: g.params,
            grid: g.grid.clone(),
            nodes: (0..g.node_count()).map(|id| ExportedNode { level: g.level_of(id), cylinder: g.cylinder(id) }).collect(),
            edges: g.edges(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serializes")
    }

    /// Parses and checks structural consistency (dimensions, radii, edge
    /// endpoints). Link validity is not re-checked here; see [`Self::verify_edges`].
    pub fn from_json(s: &str) -> Result<ExportedGraph> {
        let g: ExportedGraph = serde_json::from_str(s)?;
        g.domain.validate()?;
        g.chain_params.validate()?;
        g.grid.validate(&g.domain.metric, &g.chain_params)?;
        for node in &g.nodes {
            check_cylinder(&node.cylinder, &g.domain)?;
            if node.level >= g.grid.levels {
                return Err(Error::invalid(format!("node level {} outside grid levels", node.level)));
            }
        }
        let count = g.nodes.len() as u64;
        if let Some(&(u, v)) = g.edges.iter().find(|&&(u, v)| u as u64 >= count || v as u64 >= count) {
            return Err(Error::invalid(format!("edge ({u}, {v}) references a missing node")));
        }
        Ok(g)
    }

    /// Number of edges that fail the exact link test.
    pub fn verify_edges(&self) -> Result<usize> {
        let m = &self.domain.metric;
        let mut bad = 0;
        for &(u, v) in &self.edges {
            let (p, q) = (&self.nodes[u as usize].cylinder, &self.nodes[v as usize].cylinder);
            if !super::is_fit_link(p, q, &self.chain_params, m)? {
                bad += 1;
            }
        }
        Ok(bad)
    }
}

/// A shortest-chain result with the cylinders needed to replay it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub domain: DomainSpec,
    pub chain_params: ChainParams,
    pub source: usize,
    pub target: usize,
    pub distance: Option<u32>,
    pub nodes: Vec<usize>,
    pub chain: Vec<ParabolicCylinder>,
}

impl Witness {
    pub fn from_search(g: &CylinderGraph, source: usize, target: usize, r: &SearchResult) -> Witness {
        Witness {
            domain: g.domain.clone(),
            chain_params: g.params,
            source,
            target,
            distance: r.distance,
            nodes: r.witness.clone(),
            chain: r.witness.iter().map(|&i| g.cylinder(i)).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("witness serializes")
    }

    pub fn from_json(s: &str) -> Result<Witness> {
        let w: Witness = serde_json::from_str(s)?;
        w.domain.validate()?;
        w.chain_params.validate()?;
        for c in &w.chain {
            check_cylinder(c, &w.domain)?;
        }
        if w.nodes.len() != w.chain.len() {
            return Err(Error::invalid("witness node list and chain differ in length"));
        }
        Ok(w)
    }

    /// True iff the chain is a valid admissible FIT chain whose length is the
    /// recorded distance. An unreachable result replays as true when empty.
    pub fn replay(&self) -> Result<bool> {
        match self.distance {
            None => Ok(self.chain.is_empty()),
            Some(d) => {
                if self.chain.len() != d as usize || self.chain.is_empty() {
                    return Ok(false);
                }
                validate_chain(&self.chain, &self.chain_params, &self.domain)
            }
        }
    }
}
