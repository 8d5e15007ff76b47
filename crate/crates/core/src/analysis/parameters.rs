use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{ChainParams, CylinderGraph, DistanceField, GridSpec};
use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::geometry::ParabolicCylinder;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairDistance {
    pub source: ParabolicCylinder,
    pub target: ParabolicCylinder,
    pub first: u32,
    pub second: u32,
}

impl PairDistance {
    pub fn ratio(&self) -> f64 {
        self.first as f64 / self.second as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterComparison {
    pub first: ChainParams,
    pub second: ChainParams,
    pub t0: f64,
    pub sources: Vec<ParabolicCylinder>,
    pub pairs: Vec<PairDistance>,
    pub min_ratio: Option<f64>,
    pub max_ratio: Option<f64>,
    /// Smallest `C` with every ratio in `[1/C, C]`.
    pub constant: Option<f64>,
}

/// Past-slice nodes present in both graphs, evenly thinned to at most `count`.
pub fn shared_sources(a: &CylinderGraph, b: &CylinderGraph, t0: f64, count: usize) -> Vec<ParabolicCylinder> {
    let all: Vec<ParabolicCylinder> =
        a.past_nodes(t0).map(|id| a.cylinder(id)).filter(|c| b.find_cylinder(c).is_some()).collect();
    if all.len() <= count {
        return all;
    }
    (0..count).map(|i| all[i * all.len() / count].clone()).collect()
}

/// Distances from each source to every future-slice target reached under
/// both parameter sets on the same lattice.
pub fn parameter_comparison(
    domain: &DomainSpec,
    first: &ChainParams,
    second: &ChainParams,
    grid: &GridSpec,
    t0: f64,
    sources: Option<&[ParabolicCylinder]>,
    max_sources: usize,
) -> Result<ParameterComparison> {
    let ga = CylinderGraph::build(domain, first, grid)?;
    let gb = CylinderGraph::build(domain, second, grid)?;
    let sources = match sources {
        Some(s) => s.to_vec(),
        None => shared_sources(&ga, &gb, t0, max_sources),
    };
    if sources.is_empty() {
        return Err(Error::Resolution("no past-slice cylinder is admissible under both parameter sets".into()));
    }
    let p = domain.metric.p;
    let per_source: Vec<Vec<PairDistance>> = sources
        .par_iter()
        .map(|s| {
            let (Some(ia), Some(ib)) = (ga.find_cylinder(s), gb.find_cylinder(s)) else {
                return Err(Error::Resolution(format!("source {s:?} is missing from one of the graphs")));
            };
            let fa = DistanceField::new(&ga, ia)?;
            let fb = DistanceField::new(&gb, ib)?;
            let mut out = Vec::new();
            for v in 0..ga.node_count() {
                let Some(ka) = fa.node_distance(v) else { continue };
                let target = ga.cylinder(v);
                if v == ia || target.center.t - target.radius.powf(p) < t0 {
                    continue;
                }
                if let Some(kb) = gb.find_cylinder(&target).and_then(|w| fb.node_distance(w)) {
                    out.push(PairDistance { source: s.clone(), target, first: ka, second: kb });
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let pairs: Vec<PairDistance> = per_source.into_iter().flatten().collect();
    let min_ratio = pairs.iter().map(PairDistance::ratio).reduce(f64::min);
    let max_ratio = pairs.iter().map(PairDistance::ratio).reduce(f64::max);
    let constant = min_ratio.zip(max_ratio).map(|(lo, hi)| hi.max(1.0 / lo));
    Ok(ParameterComparison { first: *first, second: *second, t0, sources, pairs, min_ratio, max_ratio, constant })
}
