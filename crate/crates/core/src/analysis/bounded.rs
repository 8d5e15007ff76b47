use serde::{Deserialize, Serialize};

use super::layers::least_squares;
use crate::domain::{AxisBox, SlicedDomain};
use crate::error::{Error, Result};
use crate::geometry::{par_distance_raw, ParabolicPoint};
use crate::sampling::StratifiedSampler;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundedRow {
    pub k: u32,
    /// Samples with boundary distance at least `2^(-k)`.
    pub samples: usize,
    /// Largest parabolic distance from those samples to the center.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_distance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlmostBoundedReport {
    pub center: ParabolicPoint,
    pub rows: Vec<BoundedRow>,
    /// Envelope `D1 k^D2`: `D2` from a log-log least-squares fit, `D1` the
    /// smallest constant covering every row.
    pub d1: Option<f64>,
    pub d2: Option<f64>,
    pub violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundedConfig {
    pub k_min: u32,
    pub k_max: u32,
    pub budget: usize,
    pub cells: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<AxisBox>,
}

/// Max parabolic distance to `center` over points at boundary distance at least `2^(-k)`.
pub fn almost_bounded_check(slice: &SlicedDomain, center: &ParabolicPoint, cfg: &BoundedConfig) -> Result<AlmostBoundedReport> {
    if cfg.k_min == 0 || cfg.k_min > cfg.k_max {
        return Err(Error::invalid("almost-bounded sweep needs 1 <= k_min <= k_max"));
    }
    let m = *slice.metric();
    m.check_dim(center.x.len())?;
    let window = match &cfg.window {
        Some(w) => w.clone(),
        None => slice.bounding_window().ok_or_else(|| Error::invalid("slice has no finite reference window; pass one"))?,
    };
    let sampler = StratifiedSampler::with_budget(window, cfg.budget, cfg.cells, cfg.seed)?;
    let measured: Vec<(f64, f64)> = sampler
        .points()
        .into_iter()
        .filter(|z| slice.contains_point_raw(&z.x, z.t))
        .map(|z| (slice.boundary_distance_raw(&z.x, z.t), par_distance_raw(&z.x, z.t, &center.x, center.t, m.p)))
        .collect();
    let rows: Vec<BoundedRow> = (cfg.k_min..=cfg.k_max)
        .map(|k| {
            let level = 0.5f64.powi(k as i32);
            let hits: Vec<f64> = measured.iter().filter(|(d, _)| *d >= level).map(|(_, r)| *r).collect();
            BoundedRow { k, samples: hits.len(), max_distance: hits.into_iter().reduce(f64::max) }
        })
        .collect();
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.max_distance.filter(|&d| d > 0.0).map(|d| ((r.k as f64).ln(), d.ln())))
        .collect();
    let d2 = match least_squares(&pts) {
        Some((slope, _)) => Some(slope.max(0.0)),
        None if !pts.is_empty() => Some(0.0),
        None => None,
    };
    let d1 = d2.and_then(|e| {
        rows.iter().filter_map(|r| r.max_distance.map(|d| d / (r.k as f64).powf(e))).reduce(f64::max)
    });
    let violations = match (d1, d2) {
        (Some(c), Some(e)) => rows.iter().filter(|r| r.max_distance.is_some_and(|d| d > c * (r.k as f64).powf(e))).count(),
        _ => 0,
    };
    Ok(AlmostBoundedReport { center: center.clone(), rows, d1, d2, violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{builtin_example, BuiltinParams};

    #[test]
    fn bounded_domain_envelope() {
        let d = builtin_example("1a", &BuiltinParams::default()).unwrap();
        let s = SlicedDomain::future(d, 0.0).unwrap();
        let cfg = BoundedConfig { k_min: 1, k_max: 8, budget: 20_000, cells: 64, seed: 2, window: None };
        let r = almost_bounded_check(&s, &ParabolicPoint::new(vec![0.0], 0.0), &cfg).unwrap();
        assert_eq!(r.violations, 0);
        // parabolic diameter of (-1,1) x (0,1) seen from the origin
        assert!(r.rows.iter().all(|row| row.max_distance.unwrap() <= 1.0));
        for w in r.rows.windows(2) {
            assert!(w[1].samples >= w[0].samples);
            assert!(w[1].max_distance >= w[0].max_distance);
        }
        assert!(r.d1.unwrap() <= 1.0 + 1e-12);
    }
}
