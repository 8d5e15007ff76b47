use serde::{Deserialize, Serialize};

use super::{admissible_raw, ChainParams, LinkKernel};
use crate::domain::{AxisBox, DomainSpec};
use crate::error::{Error, Result};
use crate::geometry::{euclid, MetricParams, ParabolicCylinder, ParabolicPoint, TimeBox};

const MAX_LEVELS: usize = 200;
const LEAF_POINTS: u64 = 64;

/// Restricts the levels `min_level..=max_level` to the given region: a level
/// listed in some region only keeps centers inside one of its regions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRegion {
    pub min_level: usize,
    pub max_level: usize,
    pub region: AxisBox,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Centers are kept inside this box (closed).
    pub window: TimeBox,
    pub r_max: f64,
    pub levels: usize,
    pub scale_ratio: f64,
    pub spacing_factor: f64,
    /// Lattice origin; defaults to the window's spatial center at `time_lo`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<ParabolicPoint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub level_regions: Vec<LevelRegion>,
    /// On levels >= 1, keep only centers with boundary distance <= grading * r.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grading: Option<f64>,
    /// Node budget; exceeding it is a budget error.
    #[serde(default = "default_max_nodes")]
    pub max_nodes: usize,
}

fn default_max_nodes() -> usize {
    30_000_000
}

impl GridSpec {
    pub fn new(window: TimeBox, r_max: f64, levels: usize, scale_ratio: f64, spacing_factor: f64) -> GridSpec {
        GridSpec {
            window,
            r_max,
            levels,
            scale_ratio,
            spacing_factor,
            anchor: None,
            level_regions: Vec::new(),
            grading: None,
            max_nodes: default_max_nodes(),
        }
    }

    pub fn validate(&self, m: &MetricParams, a: &ChainParams) -> Result<()> {
        m.check_dim(self.window.dim())?;
        if !(self.r_max.is_finite() && self.r_max > 0.0) {
            return Err(Error::invalid("grid r_max must be finite and > 0"));
        }
        if self.levels == 0 || self.levels > MAX_LEVELS {
            return Err(Error::invalid(format!("grid levels must be in 1..={MAX_LEVELS}")));
        }
        if !(self.scale_ratio.is_finite() && self.scale_ratio > 1.0) {
            return Err(Error::invalid("grid scale ratio must be > 1"));
        }
        if !(self.spacing_factor > 0.0 && self.spacing_factor <= 1.0) {
            return Err(Error::invalid("grid spacing factor must be in (0, 1]"));
        }
        if self.scale_ratio.powf(m.homogeneous_dim()) > a.a1 * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "scale ratio {} violates sigma^(n+p) <= A1 = {}",
                self.scale_ratio, a.a1
            )));
        }
        if !(self.window.spatial_radius > 0.0 && self.window.time_lo < self.window.time_hi) {
            return Err(Error::invalid("grid window must be nonempty"));
        }
        if let Some(anchor) = &self.anchor {
            m.check_dim(anchor.x.len())?;
            if !anchor.is_finite() {
                return Err(Error::invalid("grid anchor must be finite"));
            }
        }
        for lr in &self.level_regions {
            if lr.region.lo.len() != m.n + 1 || lr.region.hi.len() != m.n + 1 {
                return Err(Error::DimensionMismatch { expected: m.n + 1, got: lr.region.lo.len() });
            }
            if lr.min_level > lr.max_level || lr.region.lo.iter().zip(&lr.region.hi).any(|(a, b)| !(a <= b)) {
                return Err(Error::invalid("level region needs min_level <= max_level and lo <= hi"));
            }
        }
        if let Some(g) = self.grading {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::invalid("grading factor must be finite and > 0"));
            }
        }
        Ok(())
    }

    pub fn radius(&self, level: usize) -> f64 {
        self.r_max * self.scale_ratio.powi(-(level as i32))
    }

    pub(crate) fn anchor_point(&self) -> (Vec<f64>, f64) {
        match &self.anchor {
            Some(a) => (a.x.clone(), a.t),
            None => (self.window.spatial_center.clone(), self.window.time_lo),
        }
    }

    /// Same lattice with the spacing halved.
    pub fn refined(&self) -> GridSpec {
        let mut g = self.clone();
        g.spacing_factor *= 0.5;
        g
    }
}

/// Per-level lattice geometry.
#[derive(Clone, Debug)]
pub(crate) struct Lattice {
    pub n: usize,
    pub p: f64,
    pub anchor_x: Vec<f64>,
    pub anchor_t: f64,
    pub r_max: f64,
    pub sigma: f64,
    pub beta: f64,
}

impl Lattice {
    pub fn new(grid: &GridSpec, m: &MetricParams) -> Lattice {
        let (anchor_x, anchor_t) = grid.anchor_point();
        Lattice { n: m.n, p: m.p, anchor_x, anchor_t, r_max: grid.r_max, sigma: grid.scale_ratio, beta: grid.spacing_factor }
    }

    pub fn radius(&self, level: usize) -> f64 {
        self.r_max * self.sigma.powi(-(level as i32))
    }

    pub fn pitch_x(&self, level: usize) -> f64 {
        self.beta * self.radius(level)
    }

    pub fn pitch_t(&self, level: usize) -> f64 {
        self.beta * self.radius(level).powf(self.p)
    }

    pub fn x(&self, level: usize, axis: usize, i: impl Into<i64>) -> f64 {
        self.anchor_x[axis] + i.into() as f64 * self.pitch_x(level)
    }

    pub fn t(&self, level: usize, k: impl Into<i64>) -> f64 {
        self.anchor_t + k.into() as f64 * self.pitch_t(level)
    }

    /// Index range of lattice values within `[lo, hi]` on a spatial axis.
    pub fn x_range(&self, level: usize, axis: usize, lo: f64, hi: f64) -> (i64, i64) {
        let px = self.pitch_x(level);
        let a = ((lo - self.anchor_x[axis]) / px).ceil();
        let b = ((hi - self.anchor_x[axis]) / px).floor();
        (clamp_i(a), clamp_i(b))
    }

    pub fn t_range(&self, level: usize, lo: f64, hi: f64) -> (i64, i64) {
        let pt = self.pitch_t(level);
        let a = ((lo - self.anchor_t) / pt).ceil();
        let b = ((hi - self.anchor_t) / pt).floor();
        (clamp_i(a), clamp_i(b))
    }

    /// Stored coordinates are `i32`; the finest level of the window must fit.
    fn check_index_range(&self, grid: &GridSpec) -> Result<()> {
        let level = grid.levels - 1;
        let w = &grid.window;
        let mut ranges: Vec<(i64, i64)> = (0..self.n)
            .map(|k| self.x_range(level, k, w.spatial_center[k] - w.spatial_radius, w.spatial_center[k] + w.spatial_radius))
            .collect();
        ranges.push(self.t_range(level, w.time_lo, w.time_hi));
        if ranges.iter().any(|r| r.0 < i32::MIN as i64 || r.1 > i32::MAX as i64) {
            return Err(Error::invalid(format!("grid level {level} has lattice indices beyond the 32-bit range")));
        }
        Ok(())
    }

    /// Number of levels on either side that can pass the volume-ratio test.
    pub fn level_reach(&self, a1: f64) -> usize {
        let per = self.sigma.ln() * (self.n as f64 + self.p);
        ((a1.ln() / per) * (1.0 + 1e-12)).floor() as usize
    }
}

const LATTICE_INDEX_BOUND: f64 = (1u64 << 53) as f64;

fn clamp_i(v: f64) -> i64 {
    if v.is_nan() {
        0
    } else {
        v.clamp(-LATTICE_INDEX_BOUND, LATTICE_INDEX_BOUND) as i64
    }
}

/// Handle to a node: level and lattice coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeRef {
    pub level: usize,
    pub coords: Vec<i32>,
}

/// Discretized directed graph of admissible lattice cylinders. Edges (FIT
/// links) are generated on demand from the lattice structure.
#[derive(Clone, Debug)]
pub struct CylinderGraph {
    pub domain: DomainSpec,
    pub params: ChainParams,
    pub grid: GridSpec,
    pub(crate) lattice: Lattice,
    pub(crate) kernel: LinkKernel,
    /// Flat lattice coordinates, `n + 1` per node (spatial then time).
    pub(crate) coords: Vec<i32>,
    /// `level_start[l]..level_start[l + 1]` are the nodes of level `l`.
    pub(crate) level_start: Vec<usize>,
    pub(crate) reach: usize,
}

impl CylinderGraph {
    pub fn build(domain: &DomainSpec, params: &ChainParams, grid: &GridSpec) -> Result<CylinderGraph> {
        params.validate()?;
        domain.validate()?;
        grid.validate(&domain.metric, params)?;
        let m = domain.metric;
        let lattice = Lattice::new(grid, &m);
        lattice.check_index_range(grid)?;
        let stride = m.n + 1;
        let mut coords: Vec<i32> = Vec::new();
        let mut level_start = vec![0usize];
        for level in 0..grid.levels {
            let mut level_coords = enumerate_level(domain, params, grid, &lattice, level)?;
            if coords.len() / stride + level_coords.len() / stride > grid.max_nodes {
                return Err(Error::Budget(format!("graph exceeds {} nodes at level {level}", grid.max_nodes)));
            }
            sort_rows(&mut level_coords, stride);
            coords.extend_from_slice(&level_coords);
            level_start.push(coords.len() / stride);
        }
        let reach = lattice.level_reach(params.a1);
        Ok(CylinderGraph {
            domain: domain.clone(),
            params: *params,
            grid: grid.clone(),
            kernel: LinkKernel::new(&m, params),
            lattice,
            coords,
            level_start,
            reach,
        })
    }

    pub fn metric(&self) -> &MetricParams {
        &self.domain.metric
    }

    pub fn node_count(&self) -> usize {
        self.coords.len() / self.stride()
    }

    pub fn is_empty(&self) -> bool {
        self.node_count() == 0
    }

    pub(crate) fn stride(&self) -> usize {
        self.lattice.n + 1
    }

    pub fn level_count(&self) -> usize {
        self.level_start.len() - 1
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        self.level_start.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Node ids of one level.
    pub fn level_range(&self, level: usize) -> std::ops::Range<usize> {
        self.level_start[level]..self.level_start[level + 1]
    }

    pub fn level_of(&self, id: usize) -> usize {
        self.level_start.partition_point(|&s| s <= id) - 1
    }

    pub(crate) fn row(&self, id: usize) -> &[i32] {
        let s = self.stride();
        &self.coords[id * s..(id + 1) * s]
    }

    pub fn node_ref(&self, id: usize) -> NodeRef {
        NodeRef { level: self.level_of(id), coords: self.row(id).to_vec() }
    }

    pub fn radius_of(&self, id: usize) -> f64 {
        self.lattice.radius(self.level_of(id))
    }

    pub fn center_time(&self, id: usize) -> f64 {
        let level = self.level_of(id);
        self.lattice.t(level, self.row(id)[self.lattice.n])
    }

    pub fn center_space(&self, id: usize) -> Vec<f64> {
        let level = self.level_of(id);
        let row = self.row(id);
        (0..self.lattice.n).map(|k| self.lattice.x(level, k, row[k])).collect()
    }

    pub fn cylinder(&self, id: usize) -> ParabolicCylinder {
        ParabolicCylinder { center: ParabolicPoint::new(self.center_space(id), self.center_time(id)), radius: self.radius_of(id) }
    }

    /// `lookup` for keys that may fall outside the stored index range.
    pub(crate) fn lookup_wide(&self, level: usize, key: &[i64]) -> Option<usize> {
        let mut buf = [0i32; 8];
        let mut heap = Vec::new();
        let k32: &mut [i32] = if key.len() <= 8 {
            &mut buf[..key.len()]
        } else {
            heap.resize(key.len(), 0);
            &mut heap
        };
        for (d, &v) in k32.iter_mut().zip(key) {
            *d = i32::try_from(v).ok()?;
        }
        self.lookup(level, k32)
    }

    pub fn lookup(&self, level: usize, key: &[i32]) -> Option<usize> {
        if level >= self.level_count() {
            return None;
        }
        let (lo, hi) = (self.level_start[level], self.level_start[level + 1]);
        let s = self.stride();
        let pos = lo + partition(lo, hi, |id| &self.coords[id * s..(id + 1) * s] < key);
        (pos < hi && self.row(pos) == key).then_some(pos)
    }

    /// The node whose cylinder equals `c` up to rounding, if any.
    pub fn find_cylinder(&self, c: &ParabolicCylinder) -> Option<usize> {
        let lat = &self.lattice;
        if c.center.x.len() != lat.n || !(c.radius > 0.0) {
            return None;
        }
        let level = (lat.r_max / c.radius).ln() / lat.sigma.ln();
        let lr = level.round();
        if !(lr >= 0.0 && (level - lr).abs() < 1e-6) {
            return None;
        }
        let level = lr as usize;
        let near = |v: f64| {
            let r = v.round();
            ((v - r).abs() < 1e-6 && r.abs() < i32::MAX as f64).then_some(r as i32)
        };
        let mut key = Vec::with_capacity(lat.n + 1);
        for k in 0..lat.n {
            key.push(near((c.center.x[k] - lat.anchor_x[k]) / lat.pitch_x(level))?);
        }
        key.push(near((c.center.t - lat.anchor_t) / lat.pitch_t(level))?);
        self.lookup(level, &key)
    }

    /// First node of `level` at or after the key `(spatial, k)` in lattice order.
    pub(crate) fn column_start(&self, level: usize, spatial: &[i32], k: i32) -> usize {
        let (lo, hi) = (self.level_start[level], self.level_start[level + 1]);
        let s = self.stride();
        let n = self.lattice.n;
        lo + partition(lo, hi, |id| {
            let row = &self.coords[id * s..(id + 1) * s];
            match row[..n].cmp(spatial) {
                std::cmp::Ordering::Less => true,
                std::cmp::Ordering::Greater => false,
                std::cmp::Ordering::Equal => row[n] < k,
            }
        })
    }

    /// Successor ids (FIT links out of `u`), in increasing id order.
    pub fn successors(&self, u: usize, out: &mut Vec<u32>) {
        out.clear();
        let lat = &self.lattice;
        let n = lat.n;
        let lu = self.level_of(u);
        let xu = self.center_space(u);
        let tu = self.center_time(u);
        let ru = lat.radius(lu);
        let hu = ru.powf(lat.p);
        let vu = self.kernel.volume(ru, hu);
        let lmin = lu.saturating_sub(self.reach);
        let lmax = (lu + self.reach).min(self.level_count() - 1);
        let mut spatial = vec![0i32; n];
        for lv in lmin..=lmax {
            if self.level_start[lv] == self.level_start[lv + 1] {
                continue;
            }
            let rv = lat.radius(lv);
            let hv = rv.powf(lat.p);
            let vv = self.kernel.volume(rv, hv);
            if !self.kernel.ratio_ok(vu, vv) {
                continue;
            }
            let reach_x = ru + rv;
            let ranges: Vec<(i64, i64)> = (0..n).map(|k| lat.x_range(lv, k, xu[k] - reach_x, xu[k] + reach_x)).collect();
            let (klo, khi) = lat.t_range(lv, tu + 2.0 * (hu + hv), tu + 4.0 * (hu + hv));
            if klo > khi || ranges.iter().any(|r| r.0 > r.1) {
                continue;
            }
            let mut xv = vec![0.0; n];
            for_each_index(&ranges, &mut spatial, |spatial| {
                for k in 0..n {
                    xv[k] = lat.x(lv, k, spatial[k]);
                }
                let gap = euclid(&xu, &xv);
                if gap >= reach_x {
                    return;
                }
                let lens = self.kernel.lens(gap, ru, rv);
                let Some((dlo, dhi)) = self.kernel.dt_window(vu, vv, hu, hv, lens) else { return };
                let (klo, khi) = lat.t_range(lv, tu + dlo, tu + dhi);
                if klo > khi {
                    return;
                }
                let end = self.level_start[lv + 1];
                let mut id = self.column_start(lv, spatial, klo as i32);
                while id < end {
                    let row = self.row(id);
                    if row[..n] != *spatial || row[n] as i64 > khi {
                        break;
                    }
                    let dt = lat.t(lv, row[n]) - tu;
                    if self.kernel.overlap_ok(vu, vv, hu, hv, lens, dt) {
                        out.push(id as u32);
                    }
                    id += 1;
                }
            });
        }
        out.sort_unstable();
    }

    /// Materialized edge list, for export and small graphs.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut buf = Vec::new();
        let mut out = Vec::new();
        for u in 0..self.node_count() {
            self.successors(u, &mut buf);
            out.extend(buf.iter().map(|&v| (u as u32, v)));
        }
        out
    }

    /// Nodes whose cylinders lie in `{t <= t0}` (so `Q ⊂ Ω⁻_{t0}`).
    pub fn past_nodes(&self, t0: f64) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count()).filter(move |&id| {
            let h = self.radius_of(id).powf(self.lattice.p);
            self.center_time(id) + h <= t0
        })
    }

    /// Largest node in the past slice `Ω⁻_{t0}` (lowest index among equals),
    /// optionally restricted to centers in `region`.
    pub fn auto_central(&self, t0: f64, region: Option<&AxisBox>) -> Option<usize> {
        self.past_nodes(t0).find(|&id| match region {
            None => true,
            Some(b) => {
                let x = self.center_space(id);
                let t = self.center_time(id);
                x.iter().chain(std::iter::once(&t)).zip(b.lo.iter().zip(&b.hi)).all(|(v, (lo, hi))| lo <= v && v <= hi)
            }
        })
    }

    /// Summary of the lattice sufficient to re-derive the node count.
    pub fn metadata(&self) -> serde_json::Value {
        serde_json::json!({
            "grid": self.grid,
            "chain_params": self.params,
            "node_count": self.node_count(),
            "level_sizes": self.level_sizes(),
            "level_radii": (0..self.level_count()).map(|l| self.lattice.radius(l)).collect::<Vec<_>>(),
        })
    }
}

pub(crate) fn partition(lo: usize, hi: usize, pred: impl Fn(usize) -> bool) -> usize {
    let (mut a, mut b) = (lo, hi);
    while a < b {
        let mid = a + (b - a) / 2;
        if pred(mid) {
            a = mid + 1;
        } else {
            b = mid;
        }
    }
    a - lo
}

pub(crate) trait LatticeIndex: Copy + Into<i64> + TryFrom<i64> {
    const MIN: i64;
    const MAX: i64;
    fn step(self) -> Self;
}

impl LatticeIndex for i32 {
    const MIN: i64 = i32::MIN as i64;
    const MAX: i64 = i32::MAX as i64;
    fn step(self) -> Self {
        self + 1
    }
}

impl LatticeIndex for i64 {
    const MIN: i64 = i64::MIN;
    const MAX: i64 = i64::MAX;
    fn step(self) -> Self {
        self + 1
    }
}

/// Calls `f` for every integer vector in the box that `T` can represent, in
/// lexicographic order.
pub(crate) fn for_each_index<T: LatticeIndex>(ranges: &[(i64, i64)], buf: &mut [T], mut f: impl FnMut(&[T])) {
    let d = ranges.len();
    let clipped: Vec<(i64, i64)> = ranges.iter().map(|r| (r.0.max(T::MIN), r.1.min(T::MAX))).collect();
    if clipped.iter().any(|r| r.0 > r.1) {
        return;
    }
    let first = |v: i64| T::try_from(v).ok().expect("clipped to the representable range");
    for k in 0..d {
        buf[k] = first(clipped[k].0);
    }
    loop {
        f(buf);
        let mut k = d;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            if buf[k].into() < clipped[k].1 {
                buf[k] = buf[k].step();
                break;
            }
            buf[k] = first(clipped[k].0);
        }
    }
}

fn sort_rows(flat: &mut Vec<i32>, stride: usize) {
    let mut rows: Vec<&[i32]> = flat.chunks(stride).collect();
    rows.sort_unstable();
    rows.dedup();
    let sorted: Vec<i32> = rows.concat();
    *flat = sorted;
}

/// Admissible lattice points of one level, in no particular order.
fn enumerate_level(domain: &DomainSpec, params: &ChainParams, grid: &GridSpec, lat: &Lattice, level: usize) -> Result<Vec<i32>> {
    let n = lat.n;
    let w = &grid.window;
    let mut zones: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let (mut wlo, mut whi): (Vec<f64>, Vec<f64>) = (
        w.spatial_center.iter().map(|c| c - w.spatial_radius).collect(),
        w.spatial_center.iter().map(|c| c + w.spatial_radius).collect(),
    );
    wlo.push(w.time_lo);
    whi.push(w.time_hi);
    let listed: Vec<&LevelRegion> =
        grid.level_regions.iter().filter(|lr| lr.min_level <= level && level <= lr.max_level).collect();
    if listed.is_empty() {
        zones.push((wlo, whi));
    } else {
        for lr in listed {
            let lo: Vec<f64> = (0..=n).map(|k| lr.region.lo[k].max(wlo[k])).collect();
            let hi: Vec<f64> = (0..=n).map(|k| lr.region.hi[k].min(whi[k])).collect();
            if lo.iter().zip(&hi).all(|(a, b)| a <= b) {
                zones.push((lo, hi));
            }
        }
    }
    let mut out = Vec::new();
    let ctx = LevelCtx { domain, params, grid, lat, level, r: lat.radius(level) };
    for (lo, hi) in zones {
        let mut ranges: Vec<(i64, i64)> = (0..n).map(|k| lat.x_range(level, k, lo[k], hi[k])).collect();
        ranges.push(lat.t_range(level, lo[n], hi[n]));
        if ranges.iter().any(|r| r.0 > r.1) {
            continue;
        }
        let total: f64 = ranges.iter().map(|r| (r.1 - r.0 + 1) as f64).product();
        if total > 4e12 {
            return Err(Error::Budget(format!("level {level} lattice has {total:.3e} candidate points")));
        }
        out.extend(ctx.scan(ranges)?);
        if out.len() / (n + 1) > grid.max_nodes {
            return Err(Error::Budget(format!("graph exceeds {} nodes at level {level}", grid.max_nodes)));
        }
    }
    Ok(out)
}

struct LevelCtx<'a> {
    domain: &'a DomainSpec,
    params: &'a ChainParams,
    grid: &'a GridSpec,
    lat: &'a Lattice,
    level: usize,
    r: f64,
}

impl LevelCtx<'_> {
    fn point(&self, idx: &[i32]) -> (Vec<f64>, f64) {
        let n = self.lat.n;
        ((0..n).map(|k| self.lat.x(self.level, k, idx[k])).collect(), self.lat.t(self.level, idx[n]))
    }

    fn graded(&self) -> Option<f64> {
        if self.level == 0 {
            None
        } else {
            self.grid.grading
        }
    }

    fn in_window(&self, x: &[f64], t: f64) -> bool {
        let w = &self.grid.window;
        t >= w.time_lo && t <= w.time_hi && euclid(x, &w.spatial_center) <= w.spatial_radius
    }

    /// Distance to the complement of the domain, zero outside.
    fn dist(&self, x: &[f64], t: f64) -> f64 {
        if !self.domain.contains_point_raw(x, t) {
            return 0.0;
        }
        self.domain.complement_distance_raw(x, t, None)
    }

    fn accept(&self, idx: &[i32]) -> bool {
        let (x, t) = self.point(idx);
        if !self.in_window(&x, t) {
            return false;
        }
        if let Some(g) = self.graded() {
            if self.dist(&x, t) > g * self.r {
                return false;
            }
        }
        admissible_raw(self.domain, self.params.a3, &x, t, self.r)
    }

    fn scan(&self, ranges: Vec<(i64, i64)>) -> Result<Vec<i32>> {
        let count: u64 = ranges.iter().map(|r| (r.1 - r.0 + 1) as u64).product();
        let d = ranges.len();
        if count <= LEAF_POINTS {
            let mut out = Vec::new();
            let mut buf = vec![0i32; d];
            for_each_index(&ranges, &mut buf, |idx| {
                if self.accept(idx) {
                    out.extend_from_slice(idx);
                }
            });
            return Ok(out);
        }
        // prune with the 1-Lipschitz boundary distance at the block center
        let n = self.lat.n;
        let px = self.lat.pitch_x(self.level);
        let pt = self.lat.pitch_t(self.level);
        let mid: Vec<f64> = ranges.iter().map(|r| 0.5 * (r.0 + r.1) as f64).collect();
        let cx: Vec<f64> = (0..n).map(|k| self.lat.anchor_x[k] + mid[k] * px).collect();
        let ct = self.lat.anchor_t + mid[n] * pt;
        let half_sp = (0..n).map(|k| (0.5 * (ranges[k].1 - ranges[k].0) as f64 * px).powi(2)).sum::<f64>().sqrt();
        let half_t = 0.5 * (ranges[n].1 - ranges[n].0) as f64 * pt;
        let rho = half_sp.max(half_t.powf(1.0 / self.lat.p));
        let exact = self.domain.is_exact();
        if exact || self.graded().is_some() {
            let dc = self.dist(&cx, ct);
            if exact && dc + rho < self.params.a3 * self.r * (1.0 - 1e-6) {
                return Ok(Vec::new());
            }
            if let Some(g) = self.graded() {
                if dc - rho > g * self.r * (1.0 + 1e-6) {
                    return Ok(Vec::new());
                }
            }
        }
        // split the longest side in metric units
        let mut axis = n;
        let mut best = ((ranges[n].1 - ranges[n].0) as f64 * pt).powf(1.0 / self.lat.p);
        for (k, r) in ranges.iter().enumerate().take(n) {
            let ext = (r.1 - r.0) as f64 * px;
            if ext > best && r.1 > r.0 {
                best = ext;
                axis = k;
            }
        }
        if ranges[axis].1 == ranges[axis].0 {
            axis = (0..d).max_by_key(|&k| ranges[k].1 - ranges[k].0).unwrap();
        }
        let split = ranges[axis].0 + (ranges[axis].1 - ranges[axis].0) / 2;
        let mut a = ranges.clone();
        let mut b = ranges;
        a[axis].1 = split;
        b[axis].0 = split + 1;
        let big = count > 1 << 16;
        let (ra, rb) = if big { rayon::join(|| self.scan(a), || self.scan(b)) } else { (self.scan(a), self.scan(b)) };
        let mut out = ra?;
        out.extend(rb?);
        Ok(out)
    }
}

impl super::ChainGraph for CylinderGraph {
    fn node_count(&self) -> usize {
        CylinderGraph::node_count(self)
    }

    fn successors_into(&self, u: usize, out: &mut Vec<u32>) {
        self.successors(u, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::is_fit_link;
    use crate::domain::{builtin_example, free_space, BuiltinParams};

    fn m1() -> MetricParams {
        MetricParams::new(1, 2.0).unwrap()
    }

    fn free_grid(levels: usize, beta: f64) -> GridSpec {
        GridSpec::new(TimeBox::new(vec![0.0], 3.0, 0.0, 12.0).unwrap(), 1.0, levels, 2f64.powf(1.0 / 3.0), beta)
    }

    #[test]
    fn thin_domain_has_no_nodes() {
        let d = crate::domain::DomainSpec::new(
            m1(),
            crate::domain::DomainVariant::BoxUnion {
                boxes: vec![AxisBox::new(vec![-0.01, 0.0], vec![0.01, 1.0]).unwrap()],
            },
        )
        .unwrap();
        let g = GridSpec::new(TimeBox::new(vec![0.0], 1.0, 0.0, 1.0).unwrap(), 0.1, 2, 1.2, 0.5);
        let graph = CylinderGraph::build(&d, &ChainParams::default(), &g).unwrap();
        assert_eq!(graph.node_count(), 0);
        assert!(graph.is_empty());
    }

    /// Brute-force pairwise link oracle on a one-level free-space grid.
    #[test]
    fn one_level_edges_match_pairwise_check() {
        let d = free_space(m1(), 1e3).unwrap();
        for a in [ChainParams::new(2.0, 2.0, 2.0).unwrap(), ChainParams::new(4.0, 4.0, 2.0).unwrap()] {
            let graph = CylinderGraph::build(&d, &a, &free_grid(1, 0.5)).unwrap();
            let nodes: Vec<ParabolicCylinder> = (0..graph.node_count()).map(|i| graph.cylinder(i)).collect();
            let mut expect = Vec::new();
            for (i, p) in nodes.iter().enumerate() {
                for (j, q) in nodes.iter().enumerate() {
                    if is_fit_link(p, q, &a, &d.metric).unwrap() {
                        expect.push((i as u32, j as u32));
                    }
                }
            }
            assert!(!expect.is_empty());
            assert_eq!(graph.edges(), expect);
        }
    }

    #[test]
    fn multi_level_edges_match_pairwise_check() {
        let d = free_space(m1(), 1e3).unwrap();
        let a = ChainParams::new(4.0, 4.0, 2.0).unwrap();
        let mut grid = free_grid(3, 0.5);
        grid.scale_ratio = 4f64.powf(1.0 / 3.0);
        grid.window = TimeBox::new(vec![0.0], 2.0, 0.0, 6.0).unwrap();
        let graph = CylinderGraph::build(&d, &a, &grid).unwrap();
        assert!(graph.level_sizes().iter().all(|&s| s > 0));
        let nodes: Vec<ParabolicCylinder> = (0..graph.node_count()).map(|i| graph.cylinder(i)).collect();
        let mut expect = Vec::new();
        for (i, p) in nodes.iter().enumerate() {
            for (j, q) in nodes.iter().enumerate() {
                if is_fit_link(p, q, &a, &d.metric).unwrap() {
                    expect.push((i as u32, j as u32));
                }
            }
        }
        assert_eq!(graph.edges(), expect);
    }

    #[test]
    fn nodes_are_admissible_and_ordered() {
        let d = builtin_example("2", &BuiltinParams::default()).unwrap();
        let a = ChainParams::default();
        let grid = GridSpec::new(TimeBox::new(vec![0.0], 1.5, -0.5, 1.5).unwrap(), 0.2, 3, 1.25, 0.5);
        let graph = CylinderGraph::build(&d, &a, &grid).unwrap();
        assert!(graph.node_count() > 0);
        for id in 0..graph.node_count() {
            assert!(crate::chain::is_admissible(&graph.cylinder(id), &a, &d).unwrap());
            if id > 0 {
                let prev = graph.node_ref(id - 1);
                assert!(prev < graph.node_ref(id));
            }
            assert_eq!(graph.lookup(graph.level_of(id), graph.row(id)), Some(id));
        }
    }

    #[test]
    fn pruned_enumeration_matches_exhaustive_scan() {
        let d = builtin_example("3", &BuiltinParams::default()).unwrap();
        let a = ChainParams::default();
        let grid = GridSpec::new(TimeBox::new(vec![-0.5], 1.0, -0.5, 1.5).unwrap(), 0.15, 3, 1.25, 0.25);
        let graph = CylinderGraph::build(&d, &a, &grid).unwrap();
        let lat = Lattice::new(&grid, &d.metric);
        let mut count = 0;
        for level in 0..3 {
            let r = lat.radius(level);
            let (i0, i1) = lat.x_range(level, 0, -1.5, 0.5);
            let (k0, k1) = lat.t_range(level, -0.5, 1.5);
            for i in i0..=i1 {
                for k in k0..=k1 {
                    let x = lat.x(level, 0, i as i32);
                    let t = lat.t(level, k as i32);
                    if admissible_raw(&d, a.a3, &[x], t, r) {
                        count += 1;
                        assert!(graph.lookup(level, &[i as i32, k as i32]).is_some());
                    }
                }
            }
        }
        assert_eq!(count, graph.node_count());
    }

    #[test]
    fn refinement_gives_node_superset() {
        let d = builtin_example("1a", &BuiltinParams::default()).unwrap();
        let a = ChainParams::default();
        let mut grid = GridSpec::new(TimeBox::new(vec![0.0], 1.0, 0.0, 1.0).unwrap(), 0.1, 2, 1.5, 0.5);
        grid.grading = Some(6.0);
        let coarse = CylinderGraph::build(&d, &a, &grid).unwrap();
        let mut fine_spec = grid.refined();
        fine_spec.levels = 3;
        let fine = CylinderGraph::build(&d, &a, &fine_spec).unwrap();
        assert!(fine.node_count() > coarse.node_count());
        for id in 0..coarse.node_count() {
            let c = coarse.cylinder(id);
            let level = coarse.level_of(id);
            let key: Vec<i32> = coarse.row(id).iter().map(|v| v * 2).collect();
            let fid = fine.lookup(level, &key).expect("refined grid keeps the node");
            assert_eq!(fine.find_cylinder(&c), Some(fid));
            assert_eq!(coarse.find_cylinder(&c), Some(id));
            let fc = fine.cylinder(fid);
            assert!((fc.center.t - c.center.t).abs() < 1e-12 && (fc.center.x[0] - c.center.x[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_validation() {
        let m = m1();
        let a = ChainParams::new(2.0, 2.0, 2.0).unwrap();
        let mut g = free_grid(1, 0.5);
        assert!(g.validate(&m, &a).is_ok());
        g.scale_ratio = 1.5;
        assert!(g.validate(&m, &a).is_err());
        let mut g = free_grid(1, 0.0);
        assert!(g.validate(&m, &a).is_err());
        g.spacing_factor = 1.5;
        assert!(g.validate(&m, &a).is_err());
    }

    #[test]
    fn level_regions_restrict_levels() {
        let d = free_space(m1(), 1e3).unwrap();
        let a = ChainParams::default();
        let mut grid = free_grid(2, 0.5);
        grid.scale_ratio = 1.5;
        grid.level_regions.push(LevelRegion {
            min_level: 1,
            max_level: 1,
            region: AxisBox::new(vec![-0.5, 0.0], vec![0.5, 1.0]).unwrap(),
        });
        let g = CylinderGraph::build(&d, &a, &grid).unwrap();
        for id in g.level_start[1]..g.level_start[2] {
            let c = g.cylinder(id);
            assert!(c.center.x[0].abs() <= 0.5 && (0.0..=1.0).contains(&c.center.t));
        }
        assert!(g.level_sizes()[1] > 0);
    }
}
