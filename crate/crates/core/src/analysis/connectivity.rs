use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::DistanceField;
use crate::domain::{AxisBox, SlicedDomain};
use crate::error::{Error, Result};
use crate::geometry::{ParabolicCylinder, ParabolicPoint};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConnectivitySample {
    pub z: ParabolicPoint,
    pub boundary_distance: f64,
    pub distance: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityReport {
    pub t0: f64,
    pub source: usize,
    pub source_cylinder: ParabolicCylinder,
    pub samples: Vec<ConnectivitySample>,
    pub unreachable_samples: usize,
    /// Graph nodes inside the future slice.
    pub future_nodes: usize,
    pub unreachable_nodes: usize,
    /// Future nodes with centers in the sweep region, when one is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_unreachable: Option<usize>,
}

/// Chain distances from the central cylinder to sampled points of the future
/// slice, plus an exhaustive sweep over every graph node inside the slice.
pub fn connectivity_sweep(
    field: &DistanceField,
    slice: &SlicedDomain,
    points: &[ParabolicPoint],
    region: Option<&AxisBox>,
) -> Result<ConnectivityReport> {
    let g = field.graph;
    let t0 = slice.t0;
    let src = field.source();
    let h = g.radius_of(src).powf(g.lattice.p);
    if g.center_time(src) + h > t0 {
        return Err(Error::invalid("central cylinder is not in the past slice"));
    }
    if let Some(r) = region {
        if r.lo.len() != g.metric().n + 1 {
            return Err(Error::DimensionMismatch { expected: g.metric().n + 1, got: r.lo.len() });
        }
    }
    let samples: Vec<ConnectivitySample> = points
        .par_iter()
        .map(|z| {
            Ok(ConnectivitySample {
                z: z.clone(),
                boundary_distance: slice.boundary_distance(z)?,
                distance: field.point_distance(z, t0)?,
            })
        })
        .collect::<Result<_>>()?;
    let unreachable_samples = samples.iter().filter(|s| s.distance.is_none()).count();
    let (mut future_nodes, mut unreachable_nodes, mut region_nodes, mut region_unreachable) = (0, 0, 0, 0);
    for id in 0..g.node_count() {
        let h = g.radius_of(id).powf(g.lattice.p);
        let t = g.center_time(id);
        if t - h < t0 {
            continue;
        }
        future_nodes += 1;
        let missed = field.node_distance(id).is_none();
        unreachable_nodes += missed as usize;
        if let Some(r) = region {
            let x = g.center_space(id);
            let inside = x.iter().chain(std::iter::once(&t)).zip(r.lo.iter().zip(&r.hi)).all(|(v, (lo, hi))| lo <= v && v <= hi);
            if inside {
                region_nodes += 1;
                region_unreachable += missed as usize;
            }
        }
    }
    Ok(ConnectivityReport {
        t0,
        source: src,
        source_cylinder: g.cylinder(src),
        samples,
        unreachable_samples,
        future_nodes,
        unreachable_nodes,
        region_nodes: region.map(|_| region_nodes),
        region_unreachable: region.map(|_| region_unreachable),
    })
}
