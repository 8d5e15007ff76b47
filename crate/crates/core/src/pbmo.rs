//! Numerical PBMO⁺ seminorms, exponential integrability, level-set measures,
//! the telescoping bound along chains and seminorm comparability.
//!
//! Averages over lagged boxes use fixed midpoint quadrature nodes, so the
//! minimization over the constant `c` is deterministic.

use std::collections::HashMap;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{is_fit_link, ChainParams, CountingParams, CountingStatus, DistanceField};
use crate::domain::{AxisBox, DomainSpec, SlicedDomain};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{MetricParams, ParabolicCylinder, ParabolicPoint, TimeBox, TimeSign};
use crate::sampling::{Estimate, StratifiedSampler};

/// Largest tolerated fraction of missing field values.
pub const MAX_MISSING: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeminormParams {
    pub a: f64,
    pub q: f64,
    pub theta: f64,
}

impl SeminormParams {
    pub fn new(a: f64, q: f64, theta: f64) -> Result<SeminormParams> {
        let s = SeminormParams { a, q, theta };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 1.0 && self.a.is_finite() && self.q > 0.0 && self.q.is_finite() && self.theta >= 1.0 && self.theta.is_finite()) {
            return Err(Error::invalid(format!("seminorm parameters need a > 1, q > 0, theta >= 1; got {self:?}")));
        }
        Ok(())
    }
}

/// Midpoint rule: a spatial cube grid clipped to the ball, times a uniform
/// time grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub space_per_axis: usize,
    pub time_nodes: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature { space_per_axis: 8, time_nodes: 16 }
    }
}

impl Quadrature {
    pub fn validate(&self) -> Result<()> {
        if self.space_per_axis == 0 || self.time_nodes == 0 {
            return Err(Error::invalid("quadrature needs at least one node per axis"));
        }
        Ok(())
    }

    /// Nodes of the box, spatial part first.
    pub fn nodes(&self, b: &TimeBox) -> Vec<(Vec<f64>, f64)> {
        let n = b.dim();
        let m = self.space_per_axis;
        let mut unit: Vec<Vec<f64>> = Vec::new();
        let total = m.pow(n as u32);
        for idx in 0..total {
            let mut rest = idx;
            let u: Vec<f64> = (0..n)
                .map(|_| {
                    let i = rest % m;
                    rest /= m;
                    -1.0 + (2 * i + 1) as f64 / m as f64
                })
                .collect();
            if u.iter().map(|v| v * v).sum::<f64>() < 1.0 {
                unit.push(u);
            }
        }
        if unit.is_empty() {
            unit.push(vec![0.0; n]);
        }
        let len = b.time_length();
        let mut out = Vec::with_capacity(unit.len() * self.time_nodes);
        for k in 0..self.time_nodes {
            let t = b.time_lo + (k as f64 + 0.5) * len / self.time_nodes as f64;
            for u in &unit {
                out.push((u.iter().zip(&b.spatial_center).map(|(v, c)| c + v * b.spatial_radius).collect(), t));
            }
        }
        out
    }
}

/// The counting function as a field, memoized on exact revisits.
pub struct CountingField<'g> {
    pub field: &'g DistanceField<'g>,
    pub slice: SlicedDomain,
    pub params: CountingParams,
    memo: Mutex<HashMap<Vec<u64>, Option<f64>>>,
}

impl<'g> CountingField<'g> {
    pub fn new(field: &'g DistanceField<'g>, slice: SlicedDomain, params: CountingParams) -> Result<CountingField<'g>> {
        params.validate()?;
        Ok(CountingField { field, slice, params, memo: Mutex::new(HashMap::new()) })
    }

    pub fn cached(&self) -> usize {
        self.memo.lock().expect("memo lock").len()
    }

    fn eval(&self, x: &[f64], t: f64) -> Option<f64> {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).chain(std::iter::once(t.to_bits())).collect();
        if let Some(v) = self.memo.lock().expect("memo lock").get(&key) {
            return *v;
        }
        let z = ParabolicPoint::new(x.to_vec(), t);
        let v = match self.field.counting_function(&z, &self.slice, &self.params) {
            Ok(cv) if cv.status == CountingStatus::Finite => cv.value.map(f64::from),
            _ => None,
        };
        self.memo.lock().expect("memo lock").insert(key, v);
        v
    }
}

pub enum FieldFunction<'g> {
    Constant(f64),
    /// `slope * t`.
    LinearTime(f64),
    Expression(Expr),
    Counting(CountingField<'g>),
}

impl FieldFunction<'_> {
    /// Value at `(x, t)`; `None` marks missing data (unreachable or non-finite).
    pub fn eval(&self, x: &[f64], t: f64) -> Option<f64> {
        let v = match self {
            FieldFunction::Constant(c) => Some(*c),
            FieldFunction::LinearTime(s) => Some(s * t),
            FieldFunction::Expression(e) => Some(e.eval(x, t)),
            FieldFunction::Counting(cf) => cf.eval(x, t),
        };
        v.filter(|v| v.is_finite())
    }

    fn eval_all(&self, pts: &[(Vec<f64>, f64)]) -> Vec<Option<f64>> {
        match self {
            FieldFunction::Counting(_) => pts.par_iter().map(|(x, t)| self.eval(x, *t)).collect(),
            _ => pts.iter().map(|(x, t)| self.eval(x, *t)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Oscillation {
    /// `(min_c g(c))^(1/q)`.
    pub value: f64,
    /// A minimizing constant.
    pub c: f64,
    /// Interval of minimizers found (a single point unless the minimum is flat).
    pub interval: (f64, f64),
    /// True when some `c` separates the future values from the past values.
    pub zero: bool,
    pub missing_fraction: f64,
}

fn present(values: Vec<Option<f64>>, what: &str) -> Result<(Vec<f64>, usize)> {
    let total = values.len();
    let kept: Vec<f64> = values.into_iter().flatten().collect();
    let missing = total - kept.len();
    if kept.is_empty() || missing as f64 > MAX_MISSING * total as f64 {
        return Err(Error::Resolution(format!("{what}: {missing} of {total} field values are missing")));
    }
    Ok((kept, missing))
}

/// `mean((u - c)_+^q) + mean((c - v)_+^q)`.
pub fn lag_objective(u: &[f64], v: &[f64], q: f64, c: f64) -> f64 {
    let up: f64 = u.iter().map(|&x| (x - c).max(0.0).powf(q)).sum::<f64>() / u.len() as f64;
    let dn: f64 = v.iter().map(|&x| (c - x).max(0.0).powf(q)).sum::<f64>() / v.len() as f64;
    up + dn
}

/// Minimum of [`lag_objective`] over `c`: `(value, lo, hi)` with `[lo, hi]`
/// the minimizers found.
pub fn minimize_lag(u: &[f64], v: &[f64], q: f64) -> (f64, f64, f64) {
    let umax = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let vmin = v.iter().copied().fold(f64::INFINITY, f64::min);
    if umax <= vmin {
        return (0.0, umax, vmin);
    }
    let lo = u.iter().chain(v).copied().fold(f64::INFINITY, f64::min);
    let hi = u.iter().chain(v).copied().fold(f64::NEG_INFINITY, f64::max);
    if q == 1.0 {
        return minimize_piecewise_linear(u, v);
    }
    let g = |c: f64| lag_objective(u, v, q, c);
    let tol = 1e-8 * (hi - lo);
    if q > 1.0 {
        let (mut a, mut b) = (lo, hi);
        for _ in 0..400 {
            if b - a <= tol {
                break;
            }
            let m1 = a + (b - a) / 3.0;
            let m2 = b - (b - a) / 3.0;
            if g(m1) <= g(m2) {
                b = m2;
            } else {
                a = m1;
            }
        }
        let c = 0.5 * (a + b);
        return (g(c), c, c);
    }
    let (mut a, mut b) = (lo, hi);
    let steps = 64;
    for _ in 0..60 {
        let w = (b - a) / steps as f64;
        let best = (0..=steps).min_by(|&i, &j| g(a + i as f64 * w).total_cmp(&g(a + j as f64 * w))).unwrap_or(0);
        let c = a + best as f64 * w;
        a = (c - w).max(lo);
        b = (c + w).min(hi);
        if b - a <= tol {
            break;
        }
    }
    let c = 0.5 * (a + b);
    (g(c), c, c)
}

/// Exact minimization for `q = 1`: the objective is convex piecewise linear
/// with kinks at the data, so a minimizer is the first kink where the right
/// slope `#{v <= c} / |v| - #{u > c} / |u|` turns nonnegative.
fn minimize_piecewise_linear(u: &[f64], v: &[f64]) -> (f64, f64, f64) {
    let mut us = u.to_vec();
    let mut vs = v.to_vec();
    us.sort_by(f64::total_cmp);
    vs.sort_by(f64::total_cmp);
    let mut kinks: Vec<f64> = us.iter().chain(&vs).copied().collect();
    kinks.sort_by(f64::total_cmp);
    kinks.dedup();
    let (nu, nv) = (us.len() as u128, vs.len() as u128);
    // sign of the right slope at c, as nv * nu * slope
    let right = |c: f64| -> i128 {
        let above = (us.len() - us.partition_point(|&x| x <= c)) as u128;
        let below = vs.partition_point(|&x| x <= c) as u128;
        (below * nu) as i128 - (above * nv) as i128
    };
    let first = kinks.partition_point(|&c| right(c) < 0).min(kinks.len() - 1);
    let c_lo = kinks[first];
    let c_hi = if right(c_lo) == 0 { kinks[kinks.partition_point(|&c| right(c) <= 0).min(kinks.len() - 1)] } else { c_lo };
    (lag_objective(u, v, 1.0, c_lo), c_lo, c_hi)
}

/// Local oscillation of `f` on `P` with lag `a` and exponent `q`.
pub fn local_oscillation(
    f: &FieldFunction,
    p: &ParabolicCylinder,
    m: &MetricParams,
    sp: &SeminormParams,
    quad: &Quadrature,
) -> Result<Oscillation> {
    sp.validate()?;
    quad.validate()?;
    m.check_dim(p.center.x.len())?;
    let plus = quad.nodes(&p.lagged(TimeSign::Plus, sp.a, m)?);
    let minus = quad.nodes(&p.lagged(TimeSign::Minus, sp.a, m)?);
    let (u, mu) = present(f.eval_all(&plus), "future lagged part")?;
    let (v, mv) = present(f.eval_all(&minus), "past lagged part")?;
    let (g, lo, hi) = minimize_lag(&u, &v, sp.q);
    let zero = g == 0.0;
    Ok(Oscillation {
        value: if zero { 0.0 } else { g.powf(1.0 / sp.q) },
        c: if zero { lo } else { 0.5 * (lo + hi) },
        interval: (lo, hi),
        zero,
        missing_fraction: (mu + mv) as f64 / (plus.len() + minus.len()) as f64,
    })
}

/// Test cylinders for the seminorm supremum: a centered lattice of
/// `centers_per_axis` points per axis over the window, each with the largest
/// radius whose `theta`-dilated hull fits, scaled by every fraction, plus
/// `random` cylinders with random centers and fractions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderSampler {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<AxisBox>,
    pub centers_per_axis: usize,
    pub radius_fractions: Vec<f64>,
    #[serde(default)]
    pub random: usize,
    pub seed: u64,
}

impl Default for CylinderSampler {
    fn default() -> Self {
        CylinderSampler { window: None, centers_per_axis: 9, radius_fractions: vec![1.0, 0.5, 0.25], random: 0, seed: 0 }
    }
}

fn hull_fits(domain: &DomainSpec, x: &[f64], t: f64, r: f64, sp: &SeminormParams) -> Result<bool> {
    let m = &domain.metric;
    let span = r.powf(m.p) * (sp.a + 1.0) * sp.theta.powf(m.p);
    let b = TimeBox { spatial_center: x.to_vec(), spatial_radius: r * sp.theta, time_lo: t - span, time_hi: t + span };
    Ok(domain.contains_box(&b)?.is_inside())
}

/// Largest radius with `theta * hull(P, a)` inside the domain, or `None`.
pub fn max_admissible_radius(domain: &DomainSpec, x: &[f64], t: f64, sp: &SeminormParams, upper: f64) -> Result<Option<f64>> {
    let (mut lo, mut hi) = (0.0, upper);
    if hull_fits(domain, x, t, hi, sp)? {
        return Ok(Some(hi));
    }
    if !hull_fits(domain, x, t, hi * 1e-9, sp)? {
        return Ok(None);
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if hull_fits(domain, x, t, mid, sp)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo > 0.0).then_some(lo))
}

impl CylinderSampler {
    pub fn validate(&self) -> Result<()> {
        if self.centers_per_axis == 0 {
            return Err(Error::invalid("cylinder sampler needs at least one center per axis"));
        }
        if self.radius_fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            return Err(Error::invalid("radius fractions must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Cylinders whose dilated hulls are inside the domain, and the number of centers tried.
    pub fn cylinders(&self, domain: &DomainSpec, sp: &SeminormParams) -> Result<(Vec<ParabolicCylinder>, usize)> {
        self.validate()?;
        let m = domain.metric;
        let window = match &self.window {
            Some(w) => w.clone(),
            None => domain.bounding_window().ok_or_else(|| Error::invalid("domain has no finite window; give the sampler one"))?,
        };
        let d = m.n + 1;
        if window.lo.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: window.lo.len() });
        }
        let upper = (0..d)
            .map(|k| {
                let w = window.hi[k] - window.lo[k];
                if k < m.n { w } else { w.powf(1.0 / m.p) }
            })
            .fold(0.0, f64::max);
        let k = self.centers_per_axis;
        let mut centers: Vec<(Vec<f64>, f64, Option<f64>)> = Vec::new();
        for idx in 0..k.pow(d as u32) {
            let mut rest = idx;
            let v: Vec<f64> = (0..d)
                .map(|a| {
                    let i = rest % k;
                    rest /= k;
                    window.lo[a] + (i as f64 + 0.5) * (window.hi[a] - window.lo[a]) / k as f64
                })
                .collect();
            centers.push((v[..m.n].to_vec(), v[m.n], None));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        for _ in 0..self.random {
            let v: Vec<f64> = (0..d).map(|a| window.lo[a] + rng.random::<f64>() * (window.hi[a] - window.lo[a])).collect();
            let frac = 1.0 - rng.random::<f64>();
            centers.push((v[..m.n].to_vec(), v[m.n], Some(frac)));
        }
        let tried = centers.len();
        let per: Vec<Vec<ParabolicCylinder>> = centers
            .par_iter()
            .map(|(x, t, frac)| -> Result<Vec<ParabolicCylinder>> {
                let Some(rmax) = max_admissible_radius(domain, x, *t, sp, upper)? else { return Ok(Vec::new()) };
                let fracs: Vec<f64> = match frac {
                    Some(f) => vec![*f],
                    None => self.radius_fractions.clone(),
                };
                Ok(fracs.iter().map(|f| ParabolicCylinder { center: ParabolicPoint::new(x.clone(), *t), radius: rmax * f }).collect())
            })
            .collect::<Result<_>>()?;
        Ok((per.concat(), tried))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderRecord {
    pub cylinder: ParabolicCylinder,
    pub oscillation: Oscillation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeminormEstimate {
    pub params: SeminormParams,
    /// Largest sampled local oscillation: a lower bound for the supremum.
    pub value: f64,
    pub best: usize,
    pub centers_tried: usize,
    pub records: Vec<CylinderRecord>,
}

impl SeminormEstimate {
    /// True when every sampled cylinder has a separating constant.
    pub fn all_zero(&self) -> bool {
        self.records.iter().all(|r| r.oscillation.zero)
    }
}

pub fn pbmo_seminorm(
    f: &FieldFunction,
    domain: &DomainSpec,
    sp: &SeminormParams,
    sampler: &CylinderSampler,
    quad: &Quadrature,
) -> Result<SeminormEstimate> {
    sp.validate()?;
    let (cyls, tried) = sampler.cylinders(domain, sp)?;
    if cyls.is_empty() {
        return Err(Error::Resolution("no sampled cylinder has its dilated hull inside the domain".into()));
    }
    let m = domain.metric;
    let records: Vec<CylinderRecord> = cyls
        .into_par_iter()
        .map(|c| Ok(CylinderRecord { oscillation: local_oscillation(f, &c, &m, sp, quad)?, cylinder: c }))
        .collect::<Result<_>>()?;
    let best = (0..records.len())
        .max_by(|&i, &j| records[i].oscillation.value.total_cmp(&records[j].oscillation.value).then(j.cmp(&i)))
        .unwrap_or(0);
    Ok(SeminormEstimate { params: *sp, value: records[best].oscillation.value, best, centers_tried: tried, records })
}

/// Field values on the nodes of a stratified sampler over a slice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSamples {
    pub sampler: StratifiedSampler,
    /// `None` outside the slice or where the field is missing.
    pub values: Vec<Option<f64>>,
    pub inside: usize,
    pub missing: usize,
}

impl FieldSamples {
    /// Missing mass as a fraction of the nodes inside the slice.
    pub fn excluded_fraction(&self) -> f64 {
        if self.inside == 0 { 0.0 } else { self.missing as f64 / self.inside as f64 }
    }

    pub fn max_value(&self) -> Option<f64> {
        self.values.iter().flatten().copied().reduce(f64::max)
    }

    pub fn min_value(&self) -> Option<f64> {
        self.values.iter().flatten().copied().reduce(f64::min)
    }

    pub fn slice_measure(&self) -> Estimate {
        self.sampler.integrate(&self.values.iter().map(|v| if v.is_some() { 1.0 } else { 0.0 }).collect::<Vec<_>>())
    }

    /// `∫ exp(eta (f - c)_+)` over the slice.
    pub fn exp_integral_at(&self, eta: f64, c: f64) -> Estimate {
        let vals: Vec<f64> = self.values.iter().map(|v| v.map_or(0.0, |f| (eta * (f - c).max(0.0)).exp())).collect();
        self.sampler.integrate(&vals)
    }

    /// Measure of `{(f - c)_+ > lambda}`.
    pub fn level_measure(&self, c: f64, lambda: f64) -> Estimate {
        let vals: Vec<f64> = self.values.iter().map(|v| v.map_or(0.0, |f| f64::from(u8::from((f - c).max(0.0) > lambda)))).collect();
        self.sampler.integrate(&vals)
    }
}

pub fn sample_field(f: &FieldFunction, slice: &SlicedDomain, sampler: &StratifiedSampler) -> Result<FieldSamples> {
    sampler.validate()?;
    let pts = sampler.points();
    let inside: Vec<bool> = pts.iter().map(|p| slice.contains_point_raw(&p.x, p.t)).collect();
    let values: Vec<Option<f64>> = pts
        .par_iter()
        .zip(&inside)
        .map(|(p, &ins)| if ins { f.eval(&p.x, p.t) } else { None })
        .collect();
    let n_in = inside.iter().filter(|&&b| b).count();
    let missing = inside.iter().zip(&values).filter(|(i, v)| **i && v.is_none()).count();
    let s = FieldSamples { sampler: sampler.clone(), values, inside: n_in, missing };
    if n_in == 0 {
        return Err(Error::invalid("no sample node lies in the slice"));
    }
    if s.excluded_fraction() > MAX_MISSING {
        return Err(Error::Resolution(format!(
            "{missing} of {n_in} slice nodes have no field value (limit {:.0}%)",
            100.0 * MAX_MISSING
        )));
    }
    Ok(s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpIntegral {
    pub eta: f64,
    /// Infimum over `c` on the shared nodes.
    pub value: Estimate,
    /// Smallest minimizing `c`.
    pub c_star: f64,
    pub excluded_fraction: f64,
}

/// `inf_c ∫ exp(eta (f - c)_+)`. On fixed nodes the integral is
/// non-increasing in `c` and constant once `c >= max f`, strictly larger
/// below, so the infimum is attained exactly at `c = max f`.
pub fn exp_integral_on(samples: &FieldSamples, eta: f64) -> Result<ExpIntegral> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::invalid("eta must be finite and > 0"));
    }
    let c_star = samples.max_value().ok_or_else(|| Error::invalid("no field values in the slice"))?;
    Ok(ExpIntegral { eta, value: samples.exp_integral_at(eta, c_star), c_star, excluded_fraction: samples.excluded_fraction() })
}

pub fn exp_integral(f: &FieldFunction, slice: &SlicedDomain, eta: f64, sampler: &StratifiedSampler) -> Result<ExpIntegral> {
    exp_integral_on(&sample_field(f, slice, sampler)?, eta)
}

/// Agreement of the exponential integral between two independent sample sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpStability {
    pub eta: f64,
    /// Common reference level (smallest value seen in either set).
    pub c_ref: f64,
    pub first: Estimate,
    pub second: Estimate,
    pub first_inf: Estimate,
    pub second_inf: Estimate,
    /// `|first - second| / sqrt(se1^2 + se2^2)` at `c_ref`; 0 when both errors vanish and the values agree.
    pub z: f64,
    pub stable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpStabilityReport {
    pub rows: Vec<ExpStability>,
    /// Largest `eta` such that every `eta' <= eta` on the grid is stable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_star: Option<f64>,
    pub excluded_fraction: (f64, f64),
}

/// Two-budget stability of `∫ exp(eta (f - c)_+)` at a shared reference
/// level, within `sigmas` combined standard errors. The infimum over `c` is
/// also reported for both sets.
pub fn exp_stability(a: &FieldSamples, b: &FieldSamples, etas: &[f64], sigmas: f64) -> Result<ExpStabilityReport> {
    let c_ref = match (a.min_value(), b.min_value()) {
        (Some(x), Some(y)) => x.min(y),
        _ => return Err(Error::invalid("no field values in the slice")),
    };
    let mut sorted = etas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut rows = Vec::with_capacity(sorted.len());
    let mut eta_star = None;
    let mut prefix = true;
    for eta in sorted {
        let ia = exp_integral_on(a, eta)?;
        let ib = exp_integral_on(b, eta)?;
        let (first, second) = (a.exp_integral_at(eta, c_ref), b.exp_integral_at(eta, c_ref));
        let se = first.std_error.hypot(second.std_error);
        let diff = (first.value - second.value).abs();
        let z = if se > 0.0 { diff / se } else if diff == 0.0 { 0.0 } else { f64::INFINITY };
        let stable = first.value.is_finite() && second.value.is_finite() && z <= sigmas;
        prefix &= stable;
        if prefix {
            eta_star = Some(eta);
        }
        rows.push(ExpStability { eta, c_ref, first, second, first_inf: ia.value, second_inf: ib.value, z, stable });
    }
    Ok(ExpStabilityReport { rows, eta_star, excluded_fraction: (a.excluded_fraction(), b.excluded_fraction()) })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelPoint {
    pub lambda: f64,
    pub measure: Estimate,
}

pub fn levelset_curve_on(samples: &FieldSamples, c: f64, lambdas: &[f64]) -> Vec<LevelPoint> {
    lambdas.iter().map(|&lambda| LevelPoint { lambda, measure: samples.level_measure(c, lambda) }).collect()
}

/// Least-squares slope of `ln(measure)` against `lambda` over the points
/// with positive measure.
pub fn levelset_log_slope(curve: &[LevelPoint]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = curve.iter().filter(|p| p.measure.value > 0.0).map(|p| (p.lambda, p.measure.value.ln())).collect();
    crate::analysis::least_squares(&pts).map(|(s, _)| s)
}

pub fn levelset_curve(f: &FieldFunction, slice: &SlicedDomain, c: f64, lambdas: &[f64], sampler: &StratifiedSampler) -> Result<Vec<LevelPoint>> {
    Ok(levelset_curve_on(&sample_field(f, slice, sampler)?, c, lambdas))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelescopingReport {
    /// `a_R` per chain cylinder (midpoint of the minimizer interval, lag 3, q = 1).
    pub a_values: Vec<f64>,
    pub oscillations: Vec<f64>,
    /// `(a_last - a_first)_+`.
    pub lhs: f64,
    pub max_oscillation: f64,
    pub count: usize,
    pub a2: f64,
    /// `A2 * #C * max oscillation`, i.e. `A2 D #C ‖f‖` with `D = max osc / ‖f‖`.
    pub rhs: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    pub holds: bool,
    pub slack: f64,
    /// Seminorm estimate 0 while some oscillation is positive.
    pub degenerate: bool,
}

pub fn telescoping_check(
    f: &FieldFunction,
    chain: &[ParabolicCylinder],
    params: &ChainParams,
    m: &MetricParams,
    quad: &Quadrature,
    norm: Option<f64>,
) -> Result<TelescopingReport> {
    if chain.is_empty() {
        return Err(Error::invalid("telescoping needs a nonempty chain"));
    }
    for (i, w) in chain.windows(2).enumerate() {
        if !is_fit_link(&w[0], &w[1], params, m)? {
            return Err(Error::invalid(format!("chain cylinders {i} and {} are not linked", i + 1)));
        }
    }
    let sp = SeminormParams { a: 3.0, q: 1.0, theta: 1.0 };
    let osc: Vec<Oscillation> = chain.iter().map(|c| local_oscillation(f, c, m, &sp, quad)).collect::<Result<_>>()?;
    let a_values: Vec<f64> = osc.iter().map(|o| 0.5 * (o.interval.0 + o.interval.1)).collect();
    let oscillations: Vec<f64> = osc.iter().map(|o| o.value).collect();
    let lhs = (a_values[a_values.len() - 1] - a_values[0]).max(0.0);
    let max_oscillation = oscillations.iter().copied().fold(0.0, f64::max);
    let rhs = params.a2 * chain.len() as f64 * max_oscillation;
    let degenerate = norm == Some(0.0) && max_oscillation > 0.0;
    let d = norm.filter(|&n| n > 0.0).map(|n| max_oscillation / n);
    Ok(TelescopingReport {
        a_values,
        oscillations,
        lhs,
        max_oscillation,
        count: chain.len(),
        a2: params.a2,
        rhs,
        d,
        holds: lhs <= rhs,
        slack: rhs - lhs,
        degenerate,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparability {
    pub estimates: Vec<SeminormEstimate>,
    /// `ratios[i][j] = value_i / value_j`, `None` when the denominator is 0.
    pub ratios: Vec<Vec<Option<f64>>>,
    pub degenerate: bool,
}

pub fn seminorm_comparability(
    f: &FieldFunction,
    domain: &DomainSpec,
    params: &[SeminormParams],
    sampler: &CylinderSampler,
    quad: &Quadrature,
) -> Result<Comparability> {
    if params.is_empty() {
        return Err(Error::invalid("comparability needs at least one parameter triple"));
    }
    let estimates: Vec<SeminormEstimate> = params.iter().map(|sp| pbmo_seminorm(f, domain, sp, sampler, quad)).collect::<Result<_>>()?;
    let ratios: Vec<Vec<Option<f64>>> = estimates
        .iter()
        .map(|a| estimates.iter().map(|b| (b.value > 0.0).then(|| a.value / b.value)).collect())
        .collect();
    let degenerate = estimates.iter().any(|e| e.value == 0.0);
    Ok(Comparability { estimates, ratios, degenerate })
}
