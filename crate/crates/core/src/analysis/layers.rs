use serde::{Deserialize, Serialize};

use crate::domain::{AxisBox, SlicedDomain};
use crate::error::{Error, Result};
use crate::sampling::{Estimate, StratifiedSampler};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerShell {
    pub k: i32,
    pub measure: Estimate,
    /// One-sided 95% bound when no sample hit the shell.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper_bound: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    pub shells: Vec<LayerShell>,
    /// Points deeper than the first shell.
    pub interior: Estimate,
    /// Points closer to the boundary than the last shell.
    pub residual: Estimate,
    pub samples: usize,
    pub fit_ks: Vec<i32>,
    pub alpha: Option<f64>,
    pub d1: Option<f64>,
}

impl LayerReport {
    /// Sum of all classes; equals the slice measure.
    pub fn total(&self) -> Estimate {
        let parts = self.shells.iter().map(|s| s.measure).chain([self.interior, self.residual]);
        let (v, var) = parts.fold((0.0, 0.0), |(v, var), e| (v + e.value, var + e.std_error * e.std_error));
        Estimate { value: v, std_error: var.sqrt() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerConfig {
    pub k_min: i32,
    pub k_max: i32,
    pub budget: usize,
    pub cells: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<AxisBox>,
}

/// Monte Carlo measures of the outer layers
/// `L_k = {2^(-k-1) < dist(z, complement) <= 2^(-k)}` and a tail fit
/// `m_k ≈ D1 2^(-alpha k)` over the upper half of the `k` range.
pub fn layer_measures(slice: &SlicedDomain, cfg: &LayerConfig) -> Result<LayerReport> {
    if cfg.k_min > cfg.k_max {
        return Err(Error::invalid("layer range is empty"));
    }
    let window = match &cfg.window {
        Some(w) => w.clone(),
        None => slice.bounding_window().ok_or_else(|| Error::invalid("slice has no finite reference window; pass one"))?,
    };
    let sampler = StratifiedSampler::with_budget(window, cfg.budget, cfg.cells, cfg.seed)?;
    let count = (cfg.k_max - cfg.k_min + 1) as usize;
    let top = 0.5f64.powi(cfg.k_min);
    let bottom = 0.5f64.powi(cfg.k_max + 1);
    let m = sampler.class_measures(count + 2, |x, t| {
        if !slice.contains_point_raw(x, t) {
            return None;
        }
        let d = slice.boundary_distance_raw(x, t);
        if d > top {
            return Some(0);
        }
        if d <= bottom {
            return Some(count + 1);
        }
        // first k with d > 2^(-k-1)
        let mut k = cfg.k_min;
        while d <= 0.5f64.powi(k + 1) {
            k += 1;
        }
        Some(1 + (k - cfg.k_min) as usize)
    });
    let unit_bound = 3.0 * sampler.window.volume() / sampler.total() as f64;
    let shells: Vec<LayerShell> = (0..count)
        .map(|i| {
            let e = m[1 + i];
            LayerShell { k: cfg.k_min + i as i32, measure: e, upper_bound: (e.value == 0.0).then_some(unit_bound) }
        })
        .collect();
    let mid = cfg.k_min + (cfg.k_max - cfg.k_min + 1) / 2;
    let tail: Vec<(f64, f64)> =
        shells.iter().filter(|s| s.k >= mid && s.measure.value > 0.0).map(|s| (s.k as f64, s.measure.value.log2())).collect();
    let (alpha, d1) = match least_squares(&tail) {
        Some((slope, intercept)) => (Some(-slope), Some(intercept.exp2())),
        None => (None, None),
    };
    Ok(LayerReport {
        fit_ks: shells.iter().filter(|s| s.k >= mid && s.measure.value > 0.0).map(|s| s.k).collect(),
        shells,
        interior: m[0],
        residual: m[count + 1],
        samples: sampler.total(),
        alpha,
        d1,
    })
}

/// Slope and intercept of the least-squares line, for at least two distinct abscissae.
pub fn least_squares(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{builtin_example, BuiltinParams};

    #[test]
    fn least_squares_line() {
        let (s, i) = least_squares(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]).unwrap();
        assert!((s - 2.0).abs() < 1e-12 && (i - 1.0).abs() < 1e-12);
        assert!(least_squares(&[(1.0, 1.0)]).is_none());
        assert!(least_squares(&[(1.0, 1.0), (1.0, 2.0)]).is_none());
    }

    #[test]
    fn product_cylinder_partition() {
        let d = builtin_example("1a", &BuiltinParams::default()).unwrap();
        let s = SlicedDomain::future(d, 0.0).unwrap();
        let cfg = LayerConfig { k_min: 1, k_max: 6, budget: 40_000, cells: 100, seed: 5, window: None };
        let r = layer_measures(&s, &cfg).unwrap();
        let total = r.total();
        assert!((total.value - 2.0).abs() < 1e-9, "{total:?}");
        assert!(r.alpha.unwrap() > 0.0);
        assert_eq!(r, layer_measures(&s, &cfg).unwrap());
    }
}
