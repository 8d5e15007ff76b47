use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::DistanceField;
use crate::domain::{AxisBox, SlicedDomain};
use crate::error::{Error, Result};
use crate::geometry::ParabolicPoint;

/// Sampling of `Ω⁺_{t0}` stratified by dyadic boundary-distance shells
/// `2^(-k-1) < dist <= 2^(-k)`; the first shell also takes everything deeper.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellSampling {
    pub per_shell: usize,
    pub k_min: i32,
    pub k_max: i32,
    /// Rejection window; defaults to the slice's bounding window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<AxisBox>,
    pub seed: u64,
    pub max_attempts: usize,
}

impl ShellSampling {
    pub fn new(per_shell: usize, k_min: i32, k_max: i32, seed: u64) -> ShellSampling {
        ShellSampling { per_shell, k_min, k_max, window: None, seed, max_attempts: 2_000_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderSample {
    pub z: ParabolicPoint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shell: Option<i32>,
    /// Discrete chain distance; `None` when no chain reaches `z`.
    pub distance: Option<u32>,
    pub boundary_distance: f64,
    /// `distance / log2(1 + 1/boundary_distance)`.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderFitReport {
    pub t0: f64,
    pub source: usize,
    pub samples: Vec<HolderSample>,
    /// Largest finite ratio.
    pub k_hat: Option<f64>,
    /// Samples with no chain (connectivity failures).
    pub failures: usize,
    /// `max(K, K') / min(K, K')` across two nested grids, when computed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<f64>,
}

pub fn holder_ratio(distance: u32, boundary_distance: f64) -> f64 {
    distance as f64 / (1.0 + 1.0 / boundary_distance).log2()
}

/// Draws points of the slice shell by shell, each shell from its own stream.
pub fn sample_shells(slice: &SlicedDomain, cfg: &ShellSampling) -> Result<Vec<(ParabolicPoint, i32)>> {
    if cfg.k_min > cfg.k_max {
        return Err(Error::invalid("shell range is empty"));
    }
    let window = match &cfg.window {
        Some(w) => w.clone(),
        None => slice.bounding_window().ok_or_else(|| Error::invalid("slice has no bounding window; pass one"))?,
    };
    let n = slice.metric().n;
    if window.lo.len() != n + 1 {
        return Err(Error::DimensionMismatch { expected: n + 1, got: window.lo.len() });
    }
    let shells: Vec<i32> = (cfg.k_min..=cfg.k_max).collect();
    let per: Vec<Vec<(ParabolicPoint, i32)>> = shells
        .par_iter()
        .enumerate()
        .map(|(i, &k)| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            let hi = 0.5f64.powi(k);
            let mut out = Vec::new();
            for _ in 0..cfg.max_attempts {
                if out.len() >= cfg.per_shell {
                    break;
                }
                let v: Vec<f64> = (0..=n).map(|a| window.lo[a] + rng.random::<f64>() * (window.hi[a] - window.lo[a])).collect();
                let (x, t) = (&v[..n], v[n]);
                if !slice.contains_point_raw(x, t) {
                    continue;
                }
                let d = slice.boundary_distance_raw(x, t);
                if d > 0.5 * hi && (k == cfg.k_min || d <= hi) {
                    out.push((ParabolicPoint::new(x.to_vec(), t), k));
                }
            }
            out
        })
        .collect();
    let points: Vec<_> = per.concat();
    if points.is_empty() {
        return Err(Error::invalid("sampler found no interior points of the slice"));
    }
    Ok(points)
}

/// Chain distances and Hölder ratios at the given points.
pub fn holder_ratios(field: &DistanceField, slice: &SlicedDomain, points: &[(ParabolicPoint, Option<i32>)]) -> Result<Vec<HolderSample>> {
    points
        .par_iter()
        .map(|(z, shell)| {
            let delta = slice.boundary_distance(z)?;
            let distance = field.point_distance(z, slice.t0)?;
            Ok(HolderSample {
                z: z.clone(),
                shell: *shell,
                distance,
                boundary_distance: delta,
                ratio: distance.map(|k| holder_ratio(k, delta)),
            })
        })
        .collect()
}

pub fn summarize(t0: f64, source: usize, samples: Vec<HolderSample>) -> HolderFitReport {
    let k_hat = samples.iter().filter_map(|s| s.ratio).fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))));
    let failures = samples.iter().filter(|s| s.distance.is_none()).count();
    HolderFitReport { t0, source, samples, k_hat, failures, stability: None }
}

/// Samples the slice by boundary-distance shells and fits `K_hat`.
pub fn holder_fit(field: &DistanceField, slice: &SlicedDomain, cfg: &ShellSampling) -> Result<HolderFitReport> {
    let pts: Vec<(ParabolicPoint, Option<i32>)> = sample_shells(slice, cfg)?.into_iter().map(|(z, k)| (z, Some(k))).collect();
    Ok(summarize(slice.t0, field.source(), holder_ratios(field, slice, &pts)?))
}

/// Hölder fits on two nested grids over the same sample points.
pub fn holder_fit_two_level(
    coarse: &DistanceField,
    fine: &DistanceField,
    slice: &SlicedDomain,
    cfg: &ShellSampling,
) -> Result<(HolderFitReport, HolderFitReport)> {
    let pts: Vec<(ParabolicPoint, Option<i32>)> = sample_shells(slice, cfg)?.into_iter().map(|(z, k)| (z, Some(k))).collect();
    let mut a = summarize(slice.t0, coarse.source(), holder_ratios(coarse, slice, &pts)?);
    let mut b = summarize(slice.t0, fine.source(), holder_ratios(fine, slice, &pts)?);
    if let (Some(ka), Some(kb)) = (a.k_hat, b.k_hat) {
        let s = ka.max(kb) / ka.min(kb);
        a.stability = Some(s);
        b.stability = Some(s);
    }
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{ChainParams, CylinderGraph, GridSpec};
    use crate::domain::{builtin_example, BuiltinParams};
    use crate::geometry::TimeBox;

    #[test]
    fn shells_hold_their_distances() {
        let d = builtin_example("1a", &BuiltinParams::default()).unwrap();
        let s = SlicedDomain::future(d, 0.1).unwrap();
        let pts = sample_shells(&s, &ShellSampling::new(20, 1, 5, 3)).unwrap();
        assert_eq!(pts.len(), 100);
        for (z, k) in &pts {
            let dist = s.boundary_distance(z).unwrap();
            if *k > 1 {
                assert!(dist <= 0.5f64.powi(*k) && dist > 0.5f64.powi(k + 1));
            } else {
                assert!(dist > 0.25);
            }
        }
        assert_eq!(pts, sample_shells(&s, &ShellSampling::new(20, 1, 5, 3)).unwrap());
    }

    #[test]
    fn ratios_on_product_cylinder() {
        let d = builtin_example("1a", &BuiltinParams::default()).unwrap();
        let mut grid = GridSpec::new(TimeBox::new(vec![0.0], 1.0, 0.0, 1.0).unwrap(), 0.12, 6, 2f64.powf(1.0 / 3.0), 0.5);
        grid.grading = Some(8.0);
        let g = CylinderGraph::build(&d, &ChainParams::default(), &grid).unwrap();
        let src = g.auto_central(0.1, None).unwrap();
        let field = DistanceField::new(&g, src).unwrap();
        let s = SlicedDomain::future(d, 0.1).unwrap();
        let pts = vec![(ParabolicPoint::new(vec![0.0], 0.6), None), (ParabolicPoint::new(vec![0.3], 0.8), None)];
        let r = holder_ratios(&field, &s, &pts).unwrap();
        for smp in &r {
            let k = smp.distance.expect("interior points are reachable");
            assert!((smp.ratio.unwrap() - holder_ratio(k, smp.boundary_distance)).abs() < 1e-15);
        }
        let rep = summarize(0.1, src, r);
        assert_eq!(rep.failures, 0);
        assert!(rep.k_hat.unwrap() > 0.0);
    }
}
