use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::layers::least_squares;
use super::law::freespace_law_raw;
use crate::chain::{ChainParams, CylinderGraph, DistanceField, GridSpec, LevelRegion};
use crate::domain::{free_space, AxisBox};
use crate::error::{Error, Result};
use crate::geometry::{euclid, MetricParams, ParabolicPoint, TimeBox};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeSpaceSample {
    pub target: ParabolicPoint,
    pub offset: f64,
    pub span: f64,
    pub law: f64,
    pub distance: Option<u32>,
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeSpaceReport {
    pub r0: f64,
    pub node_count: usize,
    pub samples: Vec<FreeSpaceSample>,
    pub min_ratio: Option<f64>,
    pub max_ratio: Option<f64>,
    /// Smallest `C` with every ratio in `[1/C, C]`.
    pub constant: Option<f64>,
    pub unreached: usize,
    /// Slope of `k̂` against `ln(s0 - t0)` over the zero-offset samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_slope: Option<f64>,
}

/// Scale used by a near-optimal chain to `(offset, span)`: lateral speed bounds
/// it by `(span / (6 offset))^(1/(p-1))`, duration by `(span / 8)^(1/p)`.
fn working_radius(offset: f64, span: f64, p: f64) -> f64 {
    let temporal = (span / 8.0).powf(1.0 / p);
    if offset <= 0.0 {
        temporal
    } else {
        temporal.min((span / (6.0 * offset)).powf(1.0 / (p - 1.0)))
    }
}

/// Free-space grid anchored at the origin with `r0` on the lattice, keeping on
/// each level only the region used by chains to the given targets.
pub fn freespace_grid(m: &MetricParams, r0: f64, targets: &[ParabolicPoint], sigma: f64, beta: f64) -> Result<(GridSpec, usize)> {
    if targets.is_empty() {
        return Err(Error::invalid("free-space grid needs at least one target"));
    }
    let p = m.p;
    let origin = vec![0.0; m.n];
    let work: Vec<(f64, f64, f64)> = targets
        .iter()
        .map(|z| {
            m.check_dim(z.x.len())?;
            let off = euclid(&z.x, &origin);
            Ok((off, z.t, working_radius(off, z.t, p)))
        })
        .collect::<Result<_>>()?;
    let r_hi = work.iter().map(|w| 2.0 * w.2.max(r0)).fold(r0, f64::max);
    let r_lo = work.iter().map(|w| r0.min(0.25 * w.2)).fold(r0, f64::min);
    let up = ((r_hi / r0).ln() / sigma.ln()).ceil().max(0.0) as i32;
    let down = ((r0 / r_lo).ln() / sigma.ln()).ceil().max(0.0) as i32;
    let r_max = r0 * sigma.powi(up);
    let levels = (up + down + 1) as usize;
    let reach = targets.iter().flat_map(|z| z.x.iter().map(|v| v.abs())).fold(0.0, f64::max) + 2.0 * r_max;
    let t_hi = targets.iter().map(|z| z.t).fold(0.0, f64::max);
    let mut grid = GridSpec::new(TimeBox::new(origin.clone(), reach, 0.0, t_hi)?, r_max, levels, sigma, beta);
    grid.anchor = Some(ParabolicPoint::new(origin, 0.0));
    for level in 0..levels {
        let r = grid.radius(level);
        let mut lo = vec![0.0; m.n + 1];
        let mut hi = vec![0.0; m.n + 1];
        let mut used = false;
        for (z, &(_, span, w)) in targets.iter().zip(&work) {
            let eps = 1.0 + 1e-9;
            if r * eps < r0.min(0.25 * w) || r > 2.0 * w.max(r0) * eps {
                continue;
            }
            if r * eps < 0.25 * w {
                // climbing from the source scale
                for k in 0..m.n {
                    lo[k] = f64::min(lo[k], -4.0 * r);
                    hi[k] = f64::max(hi[k], 4.0 * r);
                }
                hi[m.n] = hi[m.n].max(16.0 * r.powf(p));
            } else {
                for k in 0..m.n {
                    lo[k] = f64::min(lo[k], z.x[k] - 2.0 * r);
                    hi[k] = f64::max(hi[k], z.x[k] + 2.0 * r);
                }
                hi[m.n] = hi[m.n].max(span);
            }
            used = true;
        }
        if !used {
            lo = vec![0.0; m.n + 1];
            hi = lo.clone();
        }
        grid.level_regions.push(LevelRegion { min_level: level, max_level: level, region: AxisBox { lo, hi } });
    }
    Ok((grid, up as usize))
}

/// Targets `(f * min(max_offset, (s - 10 r0^p)^(1/p)) e_1, s)` for every
/// span `s` and fraction `f`: the spatial reach grows with the time left
/// after the comparability threshold.
pub fn freespace_targets(m: &MetricParams, r0: f64, spans: &[f64], fractions: &[f64], max_offset: f64) -> Vec<ParabolicPoint> {
    let h0 = r0.powf(m.p);
    let mut out = Vec::with_capacity(spans.len() * fractions.len());
    for &s in spans {
        for &f in fractions {
            let mut x = vec![0.0; m.n];
            x[0] = f * max_offset.min((s - 10.0 * h0).max(0.0).powf(1.0 / m.p));
            out.push(ParabolicPoint::new(x, s));
        }
    }
    out
}

/// Chain distance from the cylinder of radius `r0` centered at the origin to
/// each target, against the closed-form law. The source must be a lattice
/// node at `source_level` with all-zero coordinates.
pub fn freespace_law_check(
    m: &MetricParams,
    r0: f64,
    targets: &[ParabolicPoint],
    grid: &GridSpec,
    source_level: usize,
    params: &ChainParams,
) -> Result<FreeSpaceReport> {
    let h0 = r0.powf(m.p);
    if let Some(z) = targets.iter().find(|z| z.t < 10.0 * h0) {
        return Err(Error::invalid(format!("free-space target at time {} is below 10 r0^p", z.t)));
    }
    let extent = grid.window.spatial_radius + grid.window.time_hi.abs() + grid.r_max.powf(m.p) + grid.r_max;
    let domain = free_space(*m, 100.0 * extent)?;
    let g = CylinderGraph::build(&domain, params, grid)?;
    let source = g
        .lookup(source_level, &vec![0; m.n + 1])
        .filter(|&id| (g.radius_of(id) / r0 - 1.0).abs() < 1e-9)
        .ok_or_else(|| Error::invalid("source cylinder is not a node of the free-space grid"))?;
    let field = DistanceField::new(&g, source)?;
    let origin = vec![0.0; m.n];
    let samples: Vec<FreeSpaceSample> = targets
        .par_iter()
        .map(|z| {
            let law = freespace_law_raw(&origin, 0.0, r0, &z.x, z.t, m)?;
            let distance = field.point_distance(z, h0)?;
            Ok(FreeSpaceSample {
                target: z.clone(),
                offset: euclid(&z.x, &origin),
                span: z.t,
                law,
                distance,
                ratio: distance.map(|k| k as f64 / law),
            })
        })
        .collect::<Result<_>>()?;
    let ratios: Vec<f64> = samples.iter().filter_map(|s| s.ratio).collect();
    let min_ratio = ratios.iter().copied().reduce(f64::min);
    let max_ratio = ratios.iter().copied().reduce(f64::max);
    let unreached = samples.iter().filter(|s| s.distance.is_none()).count();
    let constant = match (min_ratio, max_ratio) {
        (Some(a), Some(b)) if unreached == 0 => Some(b.max(1.0 / a)),
        _ => None,
    };
    let line: Vec<(f64, f64)> =
        samples.iter().filter(|s| s.offset == 0.0).filter_map(|s| s.distance.map(|k| (s.span.ln(), k as f64))).collect();
    Ok(FreeSpaceReport {
        r0,
        node_count: g.node_count(),
        samples,
        min_ratio,
        max_ratio,
        constant,
        unreached,
        log_slope: least_squares(&line).map(|(s, _)| s),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_band() {
        let m = MetricParams::new(1, 2.0).unwrap();
        let targets: Vec<_> = [(0.0, 10.0), (2.0, 20.0), (0.0, 40.0), (5.0, 40.0), (0.0, 160.0)]
            .iter()
            .map(|&(x, t)| ParabolicPoint::new(vec![x], t))
            .collect();
        let (grid, level) = freespace_grid(&m, 1.0, &targets, 2f64.powf(1.0 / 3.0), 0.5).unwrap();
        assert!((grid.radius(level) - 1.0).abs() < 1e-12);
        let r = freespace_law_check(&m, 1.0, &targets, &grid, level, &ChainParams::default()).unwrap();
        assert_eq!(r.unreached, 0, "{r:?}");
        assert!(r.min_ratio.unwrap() > 0.0);
        assert!(r.log_slope.unwrap() > 0.0);
        let bad = [ParabolicPoint::new(vec![0.0], 5.0)];
        assert!(freespace_law_check(&m, 1.0, &bad, &grid, level, &ChainParams::default()).is_err());
    }
}
