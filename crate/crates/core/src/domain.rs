//! Space-time domains with membership, box-inclusion and boundary-distance
//! oracles, plus the built-in example domains.

use serde::{Deserialize, Serialize};
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::expr::{Expr, Interval};
use crate::geometry::{euclid, MetricParams, ParabolicPoint, TimeBox, TimeSign};

/// Closed axis-aligned box; the last coordinate is time when used in space-time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<AxisBox> {
        let b = AxisBox { lo, hi };
        b.validate(None)?;
        Ok(b)
    }

    fn validate(&self, dim: Option<usize>) -> Result<()> {
        if self.lo.len() != self.hi.len() || self.lo.is_empty() {
            return Err(Error::invalid("box lo/hi must be nonempty and of equal length"));
        }
        if let Some(d) = dim {
            if self.lo.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: self.lo.len() });
            }
        }
        for (a, b) in self.lo.iter().zip(&self.hi) {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::invalid(format!("box sides must be finite with lo < hi, got [{a}, {b}]")));
            }
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn contains_open(&self, z: &[f64]) -> bool {
        z.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *a < *v && *v < *b)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum SpatialPiece {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum DomainVariant {
    /// Interior of a union of closed space-time boxes.
    BoxUnion { boxes: Vec<AxisBox> },
    /// `(time_lo, time_hi)` times the interior of a union of spatial pieces.
    Product { time_lo: f64, time_hi: f64, spatial: Vec<SpatialPiece> },
    /// `{(x, t) in R^2 : t < exp(-m |x|)}`.
    SubgraphExp { m: f64 },
    /// `{g > 0}` intersected with the open window.
    Implicit { g: Expr, window: AxisBox },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inclusion {
    Inside,
    NotInside,
}

impl Inclusion {
    pub fn is_inside(self) -> bool {
        self == Inclusion::Inside
    }

    fn from_bool(b: bool) -> Inclusion {
        if b {
            Inclusion::Inside
        } else {
            Inclusion::NotInside
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DomainSpec {
    pub metric: MetricParams,
    #[serde(flatten)]
    pub variant: DomainVariant,
    #[serde(skip)]
    cache: OnceLock<Option<Arc<CellGrid>>>,
}

impl PartialEq for DomainSpec {
    fn eq(&self, o: &Self) -> bool {
        self.metric == o.metric && self.variant == o.variant
    }
}

/// Leaves allowed when subdividing a box for interval evaluation.
const IMPLICIT_LEAVES: usize = 256;
/// Relative tolerance of bisected boundary distances.
pub const DISTANCE_RTOL: f64 = 1e-6;

impl DomainSpec {
    pub fn new(metric: MetricParams, variant: DomainVariant) -> Result<DomainSpec> {
        let d = DomainSpec { metric, variant, cache: OnceLock::new() };
        d.validate()?;
        Ok(d)
    }

    pub fn from_json(s: &str) -> Result<DomainSpec> {
        let d: DomainSpec = serde_json::from_str(s)?;
        d.validate()?;
        Ok(d)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("domain serialization cannot fail")
    }

    pub fn validate(&self) -> Result<()> {
        self.metric.validate()?;
        let n = self.metric.n;
        match &self.variant {
            DomainVariant::BoxUnion { boxes } => {
                if boxes.is_empty() {
                    return Err(Error::invalid("box_union needs at least one box"));
                }
                for b in boxes {
                    b.validate(Some(n + 1))?;
                }
            }
            DomainVariant::Product { time_lo, time_hi, spatial } => {
                if !(time_lo.is_finite() && time_hi.is_finite() && time_lo < time_hi) {
                    return Err(Error::invalid("product needs finite time_lo < time_hi"));
                }
                if spatial.is_empty() {
                    return Err(Error::invalid("product needs at least one spatial piece"));
                }
                for piece in spatial {
                    match piece {
                        SpatialPiece::Box { lo, hi } => AxisBox { lo: lo.clone(), hi: hi.clone() }.validate(Some(n))?,
                        SpatialPiece::Ball { center, radius } => {
                            self.metric.check_dim(center.len())?;
                            if !(radius.is_finite() && *radius > 0.0) || center.iter().any(|v| !v.is_finite()) {
                                return Err(Error::invalid("ball needs a finite center and radius > 0"));
                            }
                        }
                    }
                }
            }
            DomainVariant::SubgraphExp { m } => {
                if n != 1 {
                    return Err(Error::invalid("subgraph_exp requires n = 1"));
                }
                if !(m.is_finite() && *m > 0.0) {
                    return Err(Error::invalid("subgraph_exp requires finite m > 0"));
                }
            }
            DomainVariant::Implicit { g, window } => {
                window.validate(Some(n + 1))?;
                if g.spatial_arity() > n {
                    return Err(Error::invalid(format!("expression references x{} but n = {}", g.spatial_arity() - 1, n)));
                }
            }
        }
        Ok(())
    }

    fn grid(&self) -> Option<&CellGrid> {
        self.cache
            .get_or_init(|| {
                let boxes: Vec<(Vec<f64>, Vec<f64>)> = match &self.variant {
                    DomainVariant::BoxUnion { boxes } => boxes.iter().map(|b| (b.lo.clone(), b.hi.clone())).collect(),
                    DomainVariant::Product { spatial, .. } => spatial
                        .iter()
                        .filter_map(|p| match p {
                            SpatialPiece::Box { lo, hi } => Some((lo.clone(), hi.clone())),
                            SpatialPiece::Ball { .. } => None,
                        })
                        .collect(),
                    _ => Vec::new(),
                };
                (!boxes.is_empty()).then(|| Arc::new(CellGrid::new(&boxes)))
            })
            .as_deref()
    }

    /// True for variants whose inclusion test and boundary distance are exact.
    pub fn is_exact(&self) -> bool {
        match &self.variant {
            DomainVariant::BoxUnion { .. } | DomainVariant::SubgraphExp { .. } => true,
            DomainVariant::Product { spatial, .. } => {
                let balls = spatial.iter().filter(|p| matches!(p, SpatialPiece::Ball { .. })).count();
                balls == 0 || spatial.len() == 1
            }
            DomainVariant::Implicit { .. } => false,
        }
    }

    /// Axis-aligned bounding window over `n + 1` coordinates, if finite.
    pub fn bounding_window(&self) -> Option<AxisBox> {
        let n = self.metric.n;
        match &self.variant {
            DomainVariant::BoxUnion { boxes } => {
                let mut lo = vec![f64::INFINITY; n + 1];
                let mut hi = vec![f64::NEG_INFINITY; n + 1];
                for b in boxes {
                    for k in 0..=n {
                        lo[k] = lo[k].min(b.lo[k]);
                        hi[k] = hi[k].max(b.hi[k]);
                    }
                }
                Some(AxisBox { lo, hi })
            }
            DomainVariant::Product { time_lo, time_hi, spatial } => {
                let mut lo = vec![f64::INFINITY; n + 1];
                let mut hi = vec![f64::NEG_INFINITY; n + 1];
                for p in spatial {
                    let (a, b): (Vec<f64>, Vec<f64>) = match p {
                        SpatialPiece::Box { lo, hi } => (lo.clone(), hi.clone()),
                        SpatialPiece::Ball { center, radius } => {
                            (center.iter().map(|c| c - radius).collect(), center.iter().map(|c| c + radius).collect())
                        }
                    };
                    for k in 0..n {
                        lo[k] = lo[k].min(a[k]);
                        hi[k] = hi[k].max(b[k]);
                    }
                }
                lo[n] = *time_lo;
                hi[n] = *time_hi;
                Some(AxisBox { lo, hi })
            }
            DomainVariant::SubgraphExp { .. } => None,
            DomainVariant::Implicit { window, .. } => Some(window.clone()),
        }
    }

    pub fn contains_point(&self, z: &ParabolicPoint) -> Result<bool> {
        self.metric.check_dim(z.x.len())?;
        Ok(self.contains_point_raw(&z.x, z.t))
    }

    pub(crate) fn contains_point_raw(&self, x: &[f64], t: f64) -> bool {
        match &self.variant {
            DomainVariant::BoxUnion { .. } => {
                let mut z = x.to_vec();
                z.push(t);
                self.grid().expect("box union has a grid").point_interior(&z)
            }
            DomainVariant::Product { time_lo, time_hi, spatial } => {
                if !(t > *time_lo && t < *time_hi) {
                    return false;
                }
                let in_ball = spatial.iter().any(|p| match p {
                    SpatialPiece::Ball { center, radius } => euclid(x, center) < *radius,
                    SpatialPiece::Box { .. } => false,
                });
                in_ball || self.grid().is_some_and(|g| g.point_interior(x))
            }
            DomainVariant::SubgraphExp { m } => t < (-m * x[0].abs()).exp(),
            DomainVariant::Implicit { g, window } => {
                let mut z = x.to_vec();
                z.push(t);
                window.contains_open(&z) && g.eval(x, t) > 0.0
            }
        }
    }

    pub fn contains_box(&self, b: &TimeBox) -> Result<Inclusion> {
        self.metric.check_dim(b.dim())?;
        Ok(Inclusion::from_bool(self.contains_box_raw(&b.spatial_center, b.spatial_radius, b.time_lo, b.time_hi)))
    }

    /// Inclusion of the open set `B(c, rad) x (tlo, thi)`.
    pub(crate) fn contains_box_raw(&self, c: &[f64], rad: f64, tlo: f64, thi: f64) -> bool {
        match &self.variant {
            DomainVariant::BoxUnion { .. } => {
                let grid = self.grid().expect("box union has a grid");
                let mut ranges: Vec<(f64, f64)> = c.iter().map(|v| (v - rad, v + rad)).collect();
                ranges.push((tlo, thi));
                grid.covers_open(&ranges, Some((c, rad)))
            }
            DomainVariant::Product { time_lo, time_hi, spatial } => {
                if tlo < *time_lo || thi > *time_hi {
                    return false;
                }
                let in_ball = spatial.iter().any(|p| match p {
                    SpatialPiece::Ball { center, radius } => euclid(c, center) + rad <= *radius,
                    SpatialPiece::Box { .. } => false,
                });
                if in_ball {
                    return true;
                }
                match self.grid() {
                    Some(g) => {
                        let ranges: Vec<(f64, f64)> = c.iter().map(|v| (v - rad, v + rad)).collect();
                        g.covers_open(&ranges, Some((c, rad)))
                    }
                    None => false,
                }
            }
            DomainVariant::SubgraphExp { m } => {
                let reach = Interval::new(c[0].abs() + rad, c[0].abs() + rad);
                // lower enclosure of exp(-m * reach), rounded down
                let v = (-m * reach.hi).exp();
                thi <= v - v * 4e-16
            }
            DomainVariant::Implicit { g, window } => {
                let n = c.len();
                for k in 0..n {
                    if c[k] - rad < window.lo[k] || c[k] + rad > window.hi[k] {
                        return false;
                    }
                }
                if tlo < window.lo[n] || thi > window.hi[n] {
                    return false;
                }
                let xs: Vec<Interval> = c.iter().map(|v| Interval::new(v - rad, v + rad)).collect();
                implicit_positive(g, xs, Interval::new(tlo, thi), c, rad)
            }
        }
    }

    /// Parabolic distance from `z` to the complement of the (unsliced) domain.
    pub fn distance_to_complement(&self, z: &ParabolicPoint) -> Result<f64> {
        self.metric.check_dim(z.x.len())?;
        if !self.contains_point_raw(&z.x, z.t) {
            return Ok(0.0);
        }
        Ok(self.complement_distance_raw(&z.x, z.t, None))
    }

    /// Distance to the complement of `Ω ∩ {sign (t - t0) > 0}` (or of Ω when
    /// `slice` is `None`), for a point already known to be inside.
    pub(crate) fn complement_distance_raw(&self, x: &[f64], t: f64, slice: Option<(f64, TimeSign)>) -> f64 {
        let p = self.metric.p;
        let slice_dist = match slice {
            Some((t0, TimeSign::Plus)) => (t - t0).max(0.0).powf(1.0 / p),
            Some((t0, TimeSign::Minus)) => (t0 - t).max(0.0).powf(1.0 / p),
            None => f64::INFINITY,
        };
        let own = match &self.variant {
            DomainVariant::BoxUnion { .. } => {
                let grid = self.grid().expect("box union has a grid");
                let mut z = x.to_vec();
                z.push(t);
                grid.distance_to_uncovered(&z, |gaps| {
                    let n = gaps.len() - 1;
                    let sp = gaps[..n].iter().map(|g| g * g).sum::<f64>().sqrt();
                    sp.max(gaps[n].powf(1.0 / p))
                })
            }
            DomainVariant::Product { time_lo, time_hi, spatial } => {
                let dt = (t - time_lo).min(time_hi - t).max(0.0).powf(1.0 / p);
                let mut ds: f64 = 0.0;
                for piece in spatial {
                    if let SpatialPiece::Ball { center, radius } = piece {
                        ds = ds.max(radius - euclid(x, center));
                    }
                }
                if let Some(g) = self.grid() {
                    ds = ds.max(g.distance_to_uncovered(x, |gaps| gaps.iter().map(|g| g * g).sum::<f64>().sqrt()));
                }
                dt.min(ds.max(0.0))
            }
            DomainVariant::SubgraphExp { .. } | DomainVariant::Implicit { .. } => {
                return self.bisect_distance(x, t, slice);
            }
        };
        own.min(slice_dist)
    }

    fn sliced_contains_box_raw(&self, c: &[f64], rad: f64, tlo: f64, thi: f64, slice: Option<(f64, TimeSign)>) -> bool {
        match slice {
            Some((t0, TimeSign::Plus)) if tlo < t0 => false,
            Some((t0, TimeSign::Minus)) if thi > t0 => false,
            _ => self.contains_box_raw(c, rad, tlo, thi),
        }
    }

    /// Largest `s` with `B_d(z, s)` certified inside, to relative tolerance.
    fn bisect_distance(&self, x: &[f64], t: f64, slice: Option<(f64, TimeSign)>) -> f64 {
        let p = self.metric.p;
        let fits = |s: f64| {
            let h = s.powf(p);
            self.sliced_contains_box_raw(x, s, t - h, t + h, slice)
        };
        let mut hi = match (&self.variant, slice) {
            (DomainVariant::SubgraphExp { m }, _) => {
                let gap = ((-m * x[0].abs()).exp() - t).max(0.0);
                gap.powf(1.0 / p) * (1.0 + 1e-9) + 1e-300
            }
            _ => {
                let w = self.bounding_window().expect("implicit domains carry a window");
                let ext = w.lo.iter().zip(&w.hi).map(|(a, b)| b - a).fold(0.0, f64::max);
                ext.max(ext.powf(1.0 / p)) + 1.0
            }
        };
        if let Some((t0, _)) = slice {
            hi = hi.min((t - t0).abs().powf(1.0 / p) * (1.0 + 1e-9) + 1e-300);
        }
        let mut lo = 0.0;
        // find a certified positive lower end
        let mut probe = hi * 0.5;
        while probe > hi * 1e-12 {
            if fits(probe) {
                lo = probe;
                break;
            }
            hi = probe;
            probe *= 0.5;
        }
        if lo == 0.0 {
            return 0.0;
        }
        while hi - lo > DISTANCE_RTOL * 0.5 * lo {
            let mid = 0.5 * (lo + hi);
            if fits(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

fn implicit_positive(g: &Expr, xs: Vec<Interval>, ts: Interval, c: &[f64], rad: f64) -> bool {
    let mut stack = vec![(xs, ts)];
    let mut leaves = 0usize;
    while let Some((xs, ts)) = stack.pop() {
        // skip sub-boxes that miss the ball
        let gap2: f64 = xs
            .iter()
            .zip(c)
            .map(|(iv, v)| {
                let d = if *v < iv.lo { iv.lo - v } else if *v > iv.hi { v - iv.hi } else { 0.0 };
                d * d
            })
            .sum();
        if gap2 >= rad * rad {
            continue;
        }
        if g.eval_interval(&xs, ts).lo > 0.0 {
            continue;
        }
        leaves += 1 + stack.len();
        if leaves > IMPLICIT_LEAVES {
            return false;
        }
        // split the widest coordinate, time measured on its own scale
        let mut best = (xs.len(), ts.hi - ts.lo);
        for (k, iv) in xs.iter().enumerate() {
            if iv.hi - iv.lo > best.1 {
                best = (k, iv.hi - iv.lo);
            }
        }
        let (k, _) = best;
        if k == xs.len() {
            let mid = 0.5 * (ts.lo + ts.hi);
            stack.push((xs.clone(), Interval::new(ts.lo, mid)));
            stack.push((xs, Interval::new(mid, ts.hi)));
        } else {
            let mid = 0.5 * (xs[k].lo + xs[k].hi);
            let mut a = xs.clone();
            let mut b = xs;
            a[k] = Interval::new(a[k].lo, mid);
            b[k] = Interval::new(mid, b[k].hi);
            stack.push((a, ts));
            stack.push((b, ts));
        }
    }
    true
}

/// Breakpoint decomposition of a union of closed boxes into open cells.
#[derive(Debug)]
struct CellGrid {
    bps: Vec<Vec<f64>>,
    covered: Vec<bool>,
    strides: Vec<usize>,
}

impl CellGrid {
    fn new(boxes: &[(Vec<f64>, Vec<f64>)]) -> CellGrid {
        let d = boxes[0].0.len();
        let mut bps = Vec::with_capacity(d);
        for k in 0..d {
            let mut v: Vec<f64> = boxes.iter().flat_map(|(lo, hi)| [lo[k], hi[k]]).collect();
            v.sort_by(|a, b| a.total_cmp(b));
            v.dedup();
            bps.push(v);
        }
        let mut strides = vec![1usize; d];
        for k in (0..d.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * (bps[k + 1].len() + 1);
        }
        let total = strides[0] * (bps[0].len() + 1);
        let mut covered = vec![false; total];
        let mut idx = vec![0usize; d];
        for (flat, slot) in covered.iter_mut().enumerate() {
            let mut rem = flat;
            for k in 0..d {
                idx[k] = rem / strides[k];
                rem %= strides[k];
            }
            let interior = (0..d).all(|k| idx[k] > 0 && idx[k] < bps[k].len());
            if !interior {
                continue;
            }
            *slot = boxes.iter().any(|(lo, hi)| {
                (0..d).all(|k| {
                    let mid = 0.5 * (bps[k][idx[k] - 1] + bps[k][idx[k]]);
                    lo[k] <= mid && mid <= hi[k]
                })
            });
        }
        CellGrid { bps, covered, strides }
    }

    fn cell_bounds(&self, k: usize, i: usize) -> (f64, f64) {
        let b = &self.bps[k];
        let lo = if i == 0 { f64::NEG_INFINITY } else { b[i - 1] };
        let hi = if i == b.len() { f64::INFINITY } else { b[i] };
        (lo, hi)
    }

    fn point_interior(&self, z: &[f64]) -> bool {
        let cands: Vec<(usize, usize)> = z
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let j = self.bps[k].partition_point(|b| b < v);
                if j < self.bps[k].len() && self.bps[k][j] == *v {
                    (j, j + 1)
                } else {
                    (j, j)
                }
            })
            .collect();
        self.all_covered(&cands, |_| true)
    }

    /// Whether the open box given by per-axis ranges (optionally intersected
    /// with an open ball on the leading axes) lies in the union.
    fn covers_open(&self, ranges: &[(f64, f64)], ball: Option<(&[f64], f64)>) -> bool {
        let cands: Vec<(usize, usize)> = ranges
            .iter()
            .enumerate()
            .map(|(k, (a, b))| {
                let lo = self.bps[k].partition_point(|v| v <= a);
                let hi = self.bps[k].partition_point(|v| v < b);
                (lo, hi)
            })
            .collect();
        self.all_covered(&cands, |idx| match ball {
            None => true,
            Some((c, r)) => {
                let mut s = 0.0;
                for (k, ck) in c.iter().enumerate() {
                    let (lo, hi) = self.cell_bounds(k, idx[k]);
                    let g = if *ck < lo { lo - ck } else if *ck > hi { ck - hi } else { 0.0 };
                    s += g * g;
                }
                s < r * r
            }
        })
    }

    fn all_covered(&self, cands: &[(usize, usize)], relevant: impl Fn(&[usize]) -> bool) -> bool {
        let d = cands.len();
        let mut idx: Vec<usize> = cands.iter().map(|c| c.0).collect();
        loop {
            if relevant(&idx) {
                let flat: usize = idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum();
                if !self.covered[flat] {
                    return false;
                }
            }
            let mut k = d;
            loop {
                if k == 0 {
                    return true;
                }
                k -= 1;
                if idx[k] < cands[k].1 {
                    idx[k] += 1;
                    break;
                }
                idx[k] = cands[k].0;
            }
        }
    }

    /// Minimum of `metric(per-axis gaps)` over the closures of uncovered cells.
    fn distance_to_uncovered(&self, z: &[f64], metric: impl Fn(&[f64]) -> f64) -> f64 {
        let d = z.len();
        let mut best = f64::INFINITY;
        let mut gaps = vec![0.0; d];
        for (flat, cov) in self.covered.iter().enumerate() {
            if *cov {
                continue;
            }
            let mut rem = flat;
            for k in 0..d {
                let i = rem / self.strides[k];
                rem %= self.strides[k];
                let (lo, hi) = self.cell_bounds(k, i);
                gaps[k] = if z[k] < lo { lo - z[k] } else if z[k] > hi { z[k] - hi } else { 0.0 };
            }
            best = best.min(metric(&gaps));
        }
        best
    }
}

/// `Ω⁺_{t0}` or `Ω⁻_{t0}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlicedDomain {
    pub base: DomainSpec,
    pub t0: f64,
    pub sign: TimeSign,
}

impl SlicedDomain {
    pub fn new(base: DomainSpec, t0: f64, sign: TimeSign) -> Result<SlicedDomain> {
        if !t0.is_finite() {
            return Err(Error::invalid("slice time must be finite"));
        }
        Ok(SlicedDomain { base, t0, sign })
    }

    pub fn future(base: DomainSpec, t0: f64) -> Result<SlicedDomain> {
        SlicedDomain::new(base, t0, TimeSign::Plus)
    }

    pub fn metric(&self) -> &MetricParams {
        &self.base.metric
    }

    fn slice(&self) -> Option<(f64, TimeSign)> {
        Some((self.t0, self.sign))
    }

    pub fn contains_point(&self, z: &ParabolicPoint) -> Result<bool> {
        self.base.metric.check_dim(z.x.len())?;
        Ok(self.contains_point_raw(&z.x, z.t))
    }

    pub(crate) fn contains_point_raw(&self, x: &[f64], t: f64) -> bool {
        let side = match self.sign {
            TimeSign::Plus => t > self.t0,
            TimeSign::Minus => t < self.t0,
        };
        side && self.base.contains_point_raw(x, t)
    }

    pub fn contains_box(&self, b: &TimeBox) -> Result<Inclusion> {
        self.base.metric.check_dim(b.dim())?;
        Ok(Inclusion::from_bool(self.contains_box_raw(&b.spatial_center, b.spatial_radius, b.time_lo, b.time_hi)))
    }

    pub(crate) fn contains_box_raw(&self, c: &[f64], rad: f64, tlo: f64, thi: f64) -> bool {
        self.base.sliced_contains_box_raw(c, rad, tlo, thi, self.slice())
    }

    /// Parabolic distance from `z` to the complement of the slice.
    pub fn boundary_distance(&self, z: &ParabolicPoint) -> Result<f64> {
        self.base.metric.check_dim(z.x.len())?;
        if !self.contains_point_raw(&z.x, z.t) {
            return Err(Error::invalid("boundary_distance: point is outside the sliced domain"));
        }
        Ok(self.boundary_distance_raw(&z.x, z.t))
    }

    pub(crate) fn boundary_distance_raw(&self, x: &[f64], t: f64) -> f64 {
        self.base.complement_distance_raw(x, t, self.slice())
    }

    /// Bounding window of the slice when the base domain has one.
    pub fn bounding_window(&self) -> Option<AxisBox> {
        let mut w = self.base.bounding_window()?;
        let n = self.base.metric.n;
        match self.sign {
            TimeSign::Plus => w.lo[n] = w.lo[n].max(self.t0),
            TimeSign::Minus => w.hi[n] = w.hi[n].min(self.t0),
        }
        if w.lo[n] >= w.hi[n] {
            return None;
        }
        Some(w)
    }
}

/// Parameters of the built-in example domains.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuiltinParams {
    /// Spatial dimension (only used by `1a` and `1b`).
    pub n: usize,
    pub p: f64,
    /// Decay rate of example `4`.
    pub m: f64,
}

impl Default for BuiltinParams {
    fn default() -> Self {
        BuiltinParams { n: 1, p: 2.0, m: 2.0 }
    }
}

pub const BUILTIN_IDS: [&str; 5] = ["1a", "1b", "2", "3", "4"];

fn unit_squares(centers: &[(f64, f64)]) -> Vec<AxisBox> {
    centers
        .iter()
        .map(|(x, t)| AxisBox { lo: vec![x - 0.5, t - 0.5], hi: vec![x + 0.5, t + 0.5] })
        .collect()
}

/// The example domains: `1a` unit-ball cylinder over `(0, 1)`, `1b` the
/// graphical domain under `psi(x', t) = 1 + |x'|/2` inside `B_d(0, 1)`, `2`
/// the five-square arch, `3` the three-square hook, `4` the subgraph of
/// `exp(-m|x|)`.
pub fn builtin_example(id: &str, params: &BuiltinParams) -> Result<DomainSpec> {
    let p = params.p;
    match id {
        "1a" => DomainSpec::new(
            MetricParams::new(params.n, p)?,
            DomainVariant::Product {
                time_lo: 0.0,
                time_hi: 1.0,
                spatial: vec![SpatialPiece::Ball { center: vec![0.0; params.n], radius: 1.0 }],
            },
        ),
        "1b" => {
            let n = params.n.max(2);
            let tail: Vec<String> = (1..n).map(|i| format!("x{i}^2")).collect();
            let src = format!("min(min(1 - r, 1 - abs(t)), min(x0 + 1, 1 + sqrt({})/2 - x0))", tail.join(" + "));
            let g = Expr::parse(&src)?;
            let mut lo = vec![-1.0; n + 1];
            let mut hi = vec![1.0; n + 1];
            lo[n] = -1.0;
            hi[n] = 1.0;
            DomainSpec::new(MetricParams::new(n, p)?, DomainVariant::Implicit { g, window: AxisBox { lo, hi } })
        }
        "2" => DomainSpec::new(
            MetricParams::new(1, p)?,
            DomainVariant::BoxUnion { boxes: unit_squares(&[(-1.0, 0.0), (-1.0, 1.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.0)]) },
        ),
        "3" => DomainSpec::new(
            MetricParams::new(1, p)?,
            DomainVariant::BoxUnion { boxes: unit_squares(&[(-1.0, 0.0), (-1.0, 1.0), (0.0, 1.0)]) },
        ),
        "4" => {
            if !(params.m > 1.0) {
                return Err(Error::invalid(format!("example 4 needs m > 1, got {}", params.m)));
            }
            DomainSpec::new(MetricParams::new(1, p)?, DomainVariant::SubgraphExp { m: params.m })
        }
        other => Err(Error::invalid(format!("unknown builtin example '{other}' (expected one of 1a, 1b, 2, 3, 4)"))),
    }
}

/// A domain covering the whole window `[lo, hi]` generously, used for free-space runs.
pub fn free_space(metric: MetricParams, half_extent: f64) -> Result<DomainSpec> {
    let n = metric.n;
    DomainSpec::new(
        metric,
        DomainVariant::BoxUnion { boxes: vec![AxisBox { lo: vec![-half_extent; n + 1], hi: vec![half_extent; n + 1] }] },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(x: f64, t: f64) -> ParabolicPoint {
        ParabolicPoint::new(vec![x], t)
    }

    fn product_1d() -> DomainSpec {
        builtin_example("1a", &BuiltinParams::default()).unwrap()
    }

    fn ex4(m: f64) -> DomainSpec {
        DomainSpec::new(MetricParams::new(1, 2.0).unwrap(), DomainVariant::SubgraphExp { m }).unwrap()
    }

    #[test]
    fn membership_examples() {
        let e4 = ex4(1.0);
        assert!(e4.contains_point(&pt(0.0, 0.5)).unwrap());
        assert!(!e4.contains_point(&pt(0.0, 2.0)).unwrap());
        assert!(e4.contains_point(&pt(2.0, (-3f64).exp())).unwrap());
        let s = SlicedDomain::future(product_1d(), 0.0).unwrap();
        assert!(s.contains_point(&pt(0.0, 0.5)).unwrap());
        assert!(!s.contains_point(&pt(0.0, -0.5)).unwrap());
        let e2 = builtin_example("2", &BuiltinParams::default()).unwrap();
        assert!(e2.contains_point(&pt(1.0, 0.0)).unwrap());
        assert!(!e2.contains_point(&pt(0.0, 0.0)).unwrap());
        // shared edge between adjacent squares is interior
        assert!(e2.contains_point(&pt(-1.0, 0.5)).unwrap());
        assert!(!e2.contains_point(&pt(-0.5, 0.0)).unwrap());
        let e3 = builtin_example("3", &BuiltinParams::default()).unwrap();
        assert!(e3.contains_point(&pt(0.0, 1.0)).unwrap());
        assert!(!e3.contains_point(&pt(1.0, 1.0)).unwrap());
        assert!(e3.contains_point(&ParabolicPoint::new(vec![0.0, 0.0], 1.0)).is_err());
    }

    #[test]
    fn builtin_param_checks() {
        assert!(builtin_example("4", &BuiltinParams { m: 1.0, ..Default::default() }).is_err());
        assert!(builtin_example("5", &BuiltinParams::default()).is_err());
        let b = builtin_example("1b", &BuiltinParams { n: 2, p: 2.0, m: 2.0 }).unwrap();
        assert!(b.contains_point(&ParabolicPoint::new(vec![0.0, 0.0], 0.0)).unwrap());
        assert!(!b.contains_point(&ParabolicPoint::new(vec![0.9, 0.9], 0.0)).unwrap());
    }

    #[test]
    fn box_inclusion_examples() {
        let d = product_1d();
        let inside = TimeBox::new(vec![0.0], 0.1, 0.1, 0.2).unwrap();
        assert_eq!(d.contains_box(&inside).unwrap(), Inclusion::Inside);
        let touching = TimeBox::new(vec![0.0], 0.1, -0.05, 0.2).unwrap();
        assert_eq!(d.contains_box(&touching).unwrap(), Inclusion::NotInside);
        let e4 = ex4(1.0);
        let b = TimeBox::new(vec![0.0], 0.1, -1.0, 0.5).unwrap();
        assert_eq!(e4.contains_box(&b).unwrap(), Inclusion::Inside);
        let b = TimeBox::new(vec![0.0], 0.1, -1.0, 0.91).unwrap();
        assert_eq!(e4.contains_box(&b).unwrap(), Inclusion::NotInside);
    }

    /// Inclusion against dense sampling of the boundary curve `t = exp(-|x|)`.
    #[test]
    fn subgraph_inclusion_matches_boundary_sampling() {
        let e4 = ex4(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let c: f64 = rng.random_range(-2.0..2.0);
            let r: f64 = rng.random_range(0.01..0.5);
            let thi: f64 = rng.random_range(0.0..1.0);
            let b = TimeBox::new(vec![c], r, thi - 0.3, thi).unwrap();
            let mut min_curve = f64::INFINITY;
            for i in 0..=2000 {
                let x = c - r + 2.0 * r * i as f64 / 2000.0;
                min_curve = min_curve.min((-x.abs()).exp());
            }
            let got = e4.contains_box(&b).unwrap().is_inside();
            if (thi - min_curve).abs() > 1e-3 {
                assert_eq!(got, thi < min_curve, "c={c} r={r} thi={thi}");
            }
        }
    }

    #[test]
    fn boundary_distance_examples() {
        let s = SlicedDomain::future(product_1d(), 0.0).unwrap();
        assert_eq!(s.boundary_distance(&pt(0.0, 0.25)).unwrap(), 0.5);
        assert!((s.boundary_distance(&pt(0.9, 0.5)).unwrap() - 0.1).abs() < 1e-15);
        assert!(s.boundary_distance(&pt(0.0, -0.5)).is_err());
        let e3 = SlicedDomain::future(builtin_example("3", &BuiltinParams::default()).unwrap(), 0.0).unwrap();
        for eps in [1e-2, 1e-4, 1e-6] {
            let d = e3.boundary_distance(&pt(0.0, 0.5 + eps)).unwrap();
            assert!((d - eps.sqrt()).abs() < 1e-12, "{eps}: {d}");
        }
    }

    /// Cross-check of the closed-form distance against dense sampling of the
    /// boundary of example 3 (sliced at 0).
    #[test]
    fn box_union_distance_matches_boundary_sampling() {
        let e3 = SlicedDomain::future(builtin_example("3", &BuiltinParams::default()).unwrap(), 0.0).unwrap();
        // boundary polygon of the slice
        let poly = [(-1.5, 0.0), (-0.5, 0.0), (-0.5, 0.5), (0.5, 0.5), (0.5, 1.5), (-1.5, 1.5), (-1.5, 0.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut checked = 0;
        while checked < 200 {
            let z = pt(rng.random_range(-1.5..0.5), rng.random_range(0.0..1.5));
            if !e3.contains_point(&z).unwrap() {
                continue;
            }
            checked += 1;
            let mut best = f64::INFINITY;
            for w in poly.windows(2) {
                let ((x0, t0), (x1, t1)) = (w[0], w[1]);
                for i in 0..=4000 {
                    let s = i as f64 / 4000.0;
                    let q = pt(x0 + s * (x1 - x0), t0 + s * (t1 - t0));
                    best = best.min(crate::geometry::par_distance_raw(&z.x, z.t, &q.x, q.t, 2.0));
                }
            }
            let d = e3.boundary_distance(&z).unwrap();
            assert!(d <= best + 1e-12, "{z:?}: {d} > {best}");
            assert!(best - d < 2e-2, "{z:?}: {d} vs {best}");
        }
    }

    #[test]
    fn subgraph_distance_by_bisection() {
        let s = SlicedDomain::future(ex4(1.0), 0.0).unwrap();
        let z = pt(0.0, 0.5);
        let d = s.boundary_distance(&z).unwrap();
        // the ball B_d(z, d) fits, a slightly larger one does not
        let fits = |r: f64| s.contains_box(&TimeBox::new(vec![0.0], r, 0.5 - r * r, 0.5 + r * r).unwrap()).unwrap().is_inside();
        assert!(fits(d));
        assert!(!fits(d * (1.0 + 2e-6)));
        assert!(d < 0.5f64.sqrt());
    }

    #[test]
    fn implicit_distance_is_certified_lower_bound() {
        let g = Expr::parse("1 - x^2 - t^2").unwrap();
        let d = DomainSpec::new(
            MetricParams::new(1, 2.0).unwrap(),
            DomainVariant::Implicit { g, window: AxisBox::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap() },
        )
        .unwrap();
        let s = SlicedDomain::future(d, -5.0).unwrap();
        let z = pt(0.0, 0.0);
        let dist = s.boundary_distance(&z).unwrap();
        // true distance: largest r with r^2 + r^4 <= 1 at the corner
        let exact = ((5f64.sqrt() - 1.0) / 2.0).sqrt();
        assert!(dist <= exact * (1.0 + 1e-9) && dist > 0.8 * exact, "{dist} vs {exact}");
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let mut specs: Vec<DomainSpec> = BUILTIN_IDS
            .iter()
            .map(|id| builtin_example(id, &BuiltinParams { n: 2, p: 2.5, m: 3.1 }).unwrap())
            .collect();
        specs.push(
            DomainSpec::new(
                MetricParams::new(2, 1.7).unwrap(),
                DomainVariant::Product {
                    time_lo: 0.1,
                    time_hi: 0.3,
                    spatial: vec![
                        SpatialPiece::Box { lo: vec![0.1, 0.2], hi: vec![0.7, 1.0 / 3.0] },
                        SpatialPiece::Ball { center: vec![0.0, 1e-300], radius: 0.1 },
                    ],
                },
            )
            .unwrap(),
        );
        for s in specs {
            let back = DomainSpec::from_json(&s.to_json()).unwrap();
            assert_eq!(back, s);
            assert_eq!(back.to_json(), s.to_json());
        }
        assert!(DomainSpec::from_json(r#"{"metric":{"n":1,"p":2.0},"variant":"subgraph_exp","m":-1}"#).is_err());
        assert!(DomainSpec::from_json(r#"{"metric":{"n":2,"p":2.0},"variant":"subgraph_exp","m":1}"#).is_err());
        assert!(DomainSpec::from_json(r#"{"metric":{"n":1,"p":2.0},"variant":"box_union","boxes":[{"lo":[0,0],"hi":[0,1]}]}"#).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        #[allow(unused_imports)]
        use rand::Rng;

        fn domains() -> Vec<SlicedDomain> {
            let bp = BuiltinParams::default();
            vec![
                SlicedDomain::future(product_1d(), 0.1).unwrap(),
                SlicedDomain::future(builtin_example("2", &bp).unwrap(), 0.0).unwrap(),
                SlicedDomain::future(builtin_example("3", &bp).unwrap(), -0.3).unwrap(),
                SlicedDomain::future(ex4(2.0), 0.0).unwrap(),
            ]
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn inside_boxes_contain_their_samples(which in 0usize..4, c in -1.6..1.6f64, r in 0.01..0.6f64,
                                                  tlo in -0.6..1.6f64, len in 0.01..0.6f64, seed in 0u64..1000) {
                let s = &domains()[which];
                if s.contains_box(&TimeBox::new(vec![c], r, tlo, tlo + len).unwrap()).unwrap().is_inside() {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    for _ in 0..10_000 {
                        let z = pt(c + r * rng.random_range(-1.0..1.0), tlo + len * rng.random_range(0.0..1.0));
                        if z.t > tlo && (z.x[0] - c).abs() < r {
                            prop_assert!(s.contains_point(&z).unwrap());
                        }
                    }
                }
            }

            #[test]
            fn distance_ball_fits(which in 0usize..3, x in -1.6..1.6f64, t in -0.6..1.6f64) {
                let s = &domains()[which];
                let z = pt(x, t);
                if s.contains_point(&z).unwrap() {
                    let d = s.boundary_distance(&z).unwrap() * (1.0 - 1e-6);
                    if d > 0.0 {
                        let b = TimeBox::new(vec![x], d, t - d * d, t + d * d).unwrap();
                        prop_assert!(s.contains_box(&b).unwrap().is_inside());
                    }
                }
            }

            #[test]
            fn nested_future_slices(t0 in -0.6..1.0f64, dt in 0.0..0.8f64, x in -1.6..1.6f64, t in -0.6..1.6f64) {
                let base = builtin_example("2", &BuiltinParams::default()).unwrap();
                let outer = SlicedDomain::future(base.clone(), t0).unwrap();
                let inner = SlicedDomain::future(base, t0 + dt).unwrap();
                let z = pt(x, t);
                let twice = outer.contains_point(&z).unwrap() && inner.contains_point(&z).unwrap();
                prop_assert_eq!(twice, inner.contains_point(&z).unwrap());
            }
        }
    }
}
