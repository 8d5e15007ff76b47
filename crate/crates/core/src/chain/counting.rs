use serde::{Deserialize, Serialize};
use super::graph::{for_each_index, Lattice};
use super::search::{DistanceField, UNREACHED};
use super::admissible_raw;
use crate::domain::SlicedDomain;
use crate::error::{Error, Result};
use crate::geometry::{euclid, par_distance_raw, ParabolicCylinder, ParabolicPoint};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountingParams {
    /// Fraction of the boundary distance in the radius cap `1e-2 * delta * dist`.
    pub delta: f64,
    /// Number of dyadic halvings below the cap.
    pub ladder: usize,
    /// Qualifying centers lie within `center_factor * rho` of `z`; defaults to
    /// the grid spacing factor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center_factor: Option<f64>,
    /// Spatial half-width of the local refinement window, in radii.
    pub window_space: f64,
    /// Backward temporal extent of the local window, in units of `r^p`.
    pub window_time: f64,
    /// Levels finer than the stored graph beyond which the cap is reported as
    /// below resolution.
    pub max_extra_levels: usize,
    pub max_local_nodes: usize,
}

impl Default for CountingParams {
    fn default() -> Self {
        CountingParams {
            delta: 0.1,
            ladder: 4,
            center_factor: None,
            window_space: 4.0,
            window_time: 24.0,
            max_extra_levels: 64,
            max_local_nodes: 4_000_000,
        }
    }
}

impl CountingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid("counting delta must be in (0, 1)"));
        }
        if let Some(c) = self.center_factor {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::invalid("center factor must be finite and > 0"));
            }
        }
        if !(self.window_space > 0.0 && self.window_time > 0.0) {
            return Err(Error::invalid("counting windows must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountingStatus {
    Finite,
    /// No lattice cylinder of the admissible size sits close enough to `z`.
    CapBelowResolution,
    /// Qualifying cylinders exist but none is reached from the source.
    Unreachable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountingValue {
    pub value: Option<u32>,
    pub status: CountingStatus,
    pub cap: f64,
    pub boundary_distance: f64,
    pub qualifying: usize,
    pub local_nodes: usize,
    /// A chain realizing `value`, from the source to a qualifying cylinder.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub witness: Vec<ParabolicCylinder>,
}

impl DistanceField<'_> {
    /// Counting function `k(z)`: the least chain length from the source to a
    /// lattice cylinder `B_d(z', rho)` with `rho` in the dyadic ladder below
    /// `1e-2 * delta * dist(z)` and `d(z', z) <= center_factor * rho`.
    ///
    /// Levels the stored graph lacks near `z` are added in a local backward
    /// window; distances there are propagated from stored BFS values, so the
    /// result is still the length of a concrete admissible chain.
    pub fn counting_function(&self, z: &ParabolicPoint, slice: &SlicedDomain, cp: &CountingParams) -> Result<CountingValue> {
        cp.validate()?;
        let g = self.graph;
        let lat = &g.lattice;
        let p = lat.p;
        let dist = slice.boundary_distance(z)?;
        let cap = 1e-2 * cp.delta * dist;
        let floor = cap * 0.5f64.powi(cp.ladder as i32);
        let cf = cp.center_factor.unwrap_or(lat.beta);
        let mut result = CountingValue {
            value: None,
            status: CountingStatus::CapBelowResolution,
            cap,
            boundary_distance: dist,
            qualifying: 0,
            local_nodes: 0,
            witness: Vec::new(),
        };
        if !(cap > 0.0) {
            return Ok(result);
        }
        // levels with radius in [floor, cap]
        let first_target = level_at_most(lat.r_max, lat.sigma, cap);
        let mut last_target = first_target;
        while lat.radius(last_target + 1) >= floor * (1.0 - 1e-12) {
            last_target += 1;
        }
        if lat.radius(first_target) < floor * (1.0 - 1e-12) {
            return Ok(result);
        }
        if last_target > g.level_count() + cp.max_extra_levels {
            return Ok(result);
        }
        let dist_omega = g.domain.complement_distance_raw(&z.x, z.t, None);
        // no gap between the stored levels and the local ones
        let top = level_at_most(lat.r_max, lat.sigma, 2.0 * dist_omega / g.params.a3).min(first_target).min(g.level_count());

        let blocks = self.local_blocks(z, top, last_target, cp)?;
        result.local_nodes = blocks.iter().map(|b| b.admissible.iter().filter(|&&a| a).count()).sum();
        let (dist_local, parent) = self.propagate(&blocks);

        let mut best: Option<(u32, usize, usize)> = None;
        for (bi, b) in blocks.iter().enumerate() {
            if b.level < first_target || b.level > last_target {
                continue;
            }
            let r = lat.radius(b.level);
            for flat in 0..b.len() {
                if !b.admissible[flat] {
                    continue;
                }
                let (x, t) = b.point(lat, flat);
                if par_distance_raw(&x, t, &z.x, z.t, p) > cf * r {
                    continue;
                }
                result.qualifying += 1;
                let d = dist_local[bi][flat];
                if d != UNREACHED && best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, bi, flat));
                }
            }
        }
        if let Some((d, bi, flat)) = best {
            result.value = Some(d);
            result.witness = self.unwind(&blocks, &parent, bi, flat);
        }
        result.status = match (result.value, result.qualifying) {
            (Some(_), _) => CountingStatus::Finite,
            (None, 0) => CountingStatus::CapBelowResolution,
            (None, _) => CountingStatus::Unreachable,
        };
        Ok(result)
    }

    /// Dense lattice blocks of the local window, one per level.
    fn local_blocks(&self, z: &ParabolicPoint, top: usize, last: usize, cp: &CountingParams) -> Result<Vec<Block>> {
        let g = self.graph;
        let lat = &g.lattice;
        let n = lat.n;
        let mut blocks = Vec::new();
        let mut total = 0usize;
        for level in top..=last {
            let r = lat.radius(level);
            let h = r.powf(lat.p);
            let mut ranges: Vec<(i64, i64)> =
                (0..n).map(|k| lat.x_range(level, k, z.x[k] - cp.window_space * r, z.x[k] + cp.window_space * r)).collect();
            ranges.push(lat.t_range(level, z.t - cp.window_time * h, z.t + h));
            if ranges.iter().any(|r| r.0 > r.1) {
                continue;
            }
            let dims: Vec<usize> = ranges.iter().map(|r| (r.1 - r.0 + 1) as usize).collect();
            let len: usize = dims.iter().product();
            total += len;
            if total > cp.max_local_nodes {
                return Err(Error::Budget(format!("counting function needs more than {} local nodes", cp.max_local_nodes)));
            }
            let mut b = Block { level, lo: ranges.iter().map(|r| r.0).collect(), dims, admissible: vec![false; len] };
            let mut x = vec![0.0; n];
            for flat in 0..len {
                let t = b.fill_point(lat, flat, &mut x);
                b.admissible[flat] = admissible_raw(&g.domain, g.params.a3, &x, t, r);
            }
            blocks.push(b);
        }
        Ok(blocks)
    }

    /// Shortest-chain values on the local blocks, seeded by stored BFS values
    /// and relaxed over link predecessors in order of center time.
    fn propagate(&self, blocks: &[Block]) -> (Vec<Vec<u32>>, Vec<Vec<Pred>>) {
        let g = self.graph;
        let lat = &g.lattice;
        let kern = &g.kernel;
        let n = lat.n;
        let p = lat.p;
        let mut dist: Vec<Vec<u32>> = blocks.iter().map(|b| vec![UNREACHED; b.len()]).collect();
        let mut parent: Vec<Vec<Pred>> = blocks.iter().map(|b| vec![Pred::None; b.len()]).collect();
        let mut order: Vec<(f64, usize, usize)> = Vec::new();
        for (bi, b) in blocks.iter().enumerate() {
            let tn = b.dims.len() - 1;
            for flat in 0..b.len() {
                if b.admissible[flat] {
                    let kt = b.lo[tn] + (flat % b.dims[tn]) as i64;
                    order.push((lat.t(b.level, kt), bi, flat));
                }
            }
        }
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let first = blocks.iter().map(|b| b.level).min().unwrap_or(0);
        let mut by_level = vec![None; blocks.iter().map(|b| b.level + 1).max().unwrap_or(0).saturating_sub(first)];
        for (bi, b) in blocks.iter().enumerate() {
            by_level[b.level - first] = Some(bi);
        }
        let block_of = |level: usize| if level < first { None } else { by_level.get(level - first).copied().flatten() };
        let mut xv = vec![0.0; n];
        let mut xu = vec![0.0; n];
        let mut key = vec![0i64; n + 1];
        let mut cand = vec![0i64; n];
        let mut coords = vec![0i64; n + 1];
        let mut ranges: Vec<(i64, i64)> = vec![(0, 0); n];
        for &(tv, bv, fv) in &order {
            let b = &blocks[bv];
            let lv = b.level;
            b.fill_coords(fv, &mut coords);
            for k in 0..n {
                xv[k] = lat.x(lv, k, coords[k]);
            }
            let own = g.lookup_wide(lv, &coords);
            let (mut best, mut from) = match own.and_then(|id| self.tree.distance(id).map(|d| (d, id))) {
                Some((d, id)) => (d, Pred::Stored(id as u32)),
                None => (UNREACHED, Pred::None),
            };
            let rv = lat.radius(lv);
            let hv = rv.powf(p);
            let vv = kern.volume(rv, hv);
            for lu in lv.saturating_sub(g.reach)..=lv + g.reach {
                let ru = lat.radius(lu);
                let hu = ru.powf(p);
                let vu = kern.volume(ru, hu);
                if !kern.ratio_ok(vu, vv) {
                    continue;
                }
                let bu = block_of(lu);
                let stored = lu < g.level_count();
                if bu.is_none() && !stored {
                    continue;
                }
                let reach_x = ru + rv;
                for k in 0..n {
                    ranges[k] = lat.x_range(lu, k, xv[k] - reach_x, xv[k] + reach_x);
                }
                let (klo, khi) = lat.t_range(lu, tv - 4.0 * (hu + hv), tv - 2.0 * (hu + hv));
                if klo > khi {
                    continue;
                }
                for_each_index(&ranges, &mut cand, |sp| {
                    for k in 0..n {
                        xu[k] = lat.x(lu, k, sp[k]);
                    }
                    let gap = euclid(&xu, &xv);
                    if gap >= reach_x {
                        return;
                    }
                    let lens = kern.lens(gap, ru, rv);
                    let Some((dlo, dhi)) = kern.dt_window(vu, vv, hu, hv, lens) else { return };
                    let (klo, khi) = lat.t_range(lu, tv - dhi, tv - dlo);
                    key[..n].copy_from_slice(sp);
                    for k in klo..=khi {
                        let tu = lat.t(lu, k);
                        if !kern.overlap_ok(vu, vv, hu, hv, lens, tv - tu) {
                            continue;
                        }
                        key[n] = k;
                        let local = bu.and_then(|bi| blocks[bi].flat(&key).map(|f| (bi, f)));
                        let (du, pred) = match local {
                            Some((bi, f)) => {
                                if !blocks[bi].admissible[f] {
                                    continue;
                                }
                                (dist[bi][f], Pred::Local(bi as u32, f as u32))
                            }
                            None if stored => match g.lookup_wide(lu, &key).and_then(|id| self.tree.distance(id).map(|d| (d, id))) {
                                Some((d, id)) => (d, Pred::Stored(id as u32)),
                                None => continue,
                            },
                            None => continue,
                        };
                        if du != UNREACHED && du + 1 < best {
                            best = du + 1;
                            from = pred;
                        }
                    }
                });
            }
            // a stored node keeps its own tree path unless the local relaxation improved it
            if matches!(from, Pred::Stored(id) if own == Some(id as usize)) {
                from = Pred::Root;
            }
            dist[bv][fv] = best;
            parent[bv][fv] = from;
        }
        (dist, parent)
    }

    fn unwind(&self, blocks: &[Block], parent: &[Vec<Pred>], bi: usize, flat: usize) -> Vec<ParabolicCylinder> {
        let g = self.graph;
        let lat = &g.lattice;
        let mut tail = Vec::new();
        let (mut bi, mut flat) = (bi, flat);
        loop {
            let b = &blocks[bi];
            let (x, t) = b.point(lat, flat);
            tail.push(ParabolicCylinder { center: ParabolicPoint::new(x, t), radius: lat.radius(b.level) });
            match parent[bi][flat] {
                Pred::Local(b2, f2) => {
                    bi = b2 as usize;
                    flat = f2 as usize;
                }
                Pred::Stored(id) => {
                    let mut chain: Vec<ParabolicCylinder> =
                        self.tree.path_to(id as usize).into_iter().map(|v| g.cylinder(v)).collect();
                    chain.extend(tail.into_iter().rev());
                    return chain;
                }
                Pred::Root => {
                    let own = g.lookup_wide(b.level, &b.coords(flat)).expect("root nodes are stored");
                    let mut chain: Vec<ParabolicCylinder> = self.tree.path_to(own).into_iter().map(|v| g.cylinder(v)).collect();
                    chain.pop();
                    chain.extend(tail.into_iter().rev());
                    return chain;
                }
                Pred::None => return Vec::new(),
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Pred {
    None,
    /// Value taken from the stored BFS tree at the node itself.
    Root,
    Stored(u32),
    Local(u32, u32),
}

/// Dense box of lattice indices on one level (spatial axes then time, row-major).
struct Block {
    level: usize,
    lo: Vec<i64>,
    dims: Vec<usize>,
    admissible: Vec<bool>,
}

impl Block {
    fn len(&self) -> usize {
        self.admissible.len()
    }

    fn coords(&self, flat: usize) -> Vec<i64> {
        let mut c = vec![0i64; self.dims.len()];
        self.fill_coords(flat, &mut c);
        c
    }

    fn fill_coords(&self, mut flat: usize, c: &mut [i64]) {
        for k in (0..self.dims.len()).rev() {
            c[k] = self.lo[k] + (flat % self.dims[k]) as i64;
            flat /= self.dims[k];
        }
    }

    fn flat(&self, key: &[i64]) -> Option<usize> {
        let mut f = 0usize;
        for k in 0..self.dims.len() {
            let off = key[k] - self.lo[k];
            if off < 0 || off as usize >= self.dims[k] {
                return None;
            }
            f = f * self.dims[k] + off as usize;
        }
        Some(f)
    }

    fn fill_point(&self, lat: &Lattice, flat: usize, x: &mut [f64]) -> f64 {
        let n = x.len();
        let mut buf = [0i64; 8];
        let mut heap = Vec::new();
        let c: &mut [i64] = if n < 8 {
            &mut buf[..n + 1]
        } else {
            heap.resize(n + 1, 0);
            &mut heap
        };
        self.fill_coords(flat, c);
        for k in 0..n {
            x[k] = lat.x(self.level, k, c[k]);
        }
        lat.t(self.level, c[n])
    }

    fn point(&self, lat: &Lattice, flat: usize) -> (Vec<f64>, f64) {
        let mut x = vec![0.0; self.dims.len() - 1];
        let t = self.fill_point(lat, flat, &mut x);
        (x, t)
    }
}

/// Smallest level whose radius is at most `r`.
fn level_at_most(r_max: f64, sigma: f64, r: f64) -> usize {
    if r >= r_max {
        return 0;
    }
    let mut l = ((r_max / r).ln() / sigma.ln()).floor().max(0.0) as usize;
    while r_max * sigma.powi(-(l as i32)) > r * (1.0 + 1e-12) {
        l += 1;
    }
    while l > 0 && r_max * sigma.powi(-(l as i32 - 1)) <= r * (1.0 + 1e-12) {
        l -= 1;
    }
    l
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{validate_chain, ChainParams, CylinderGraph, GridSpec};
    use crate::domain::{builtin_example, BuiltinParams};
    use crate::geometry::{TimeBox, TimeSign};

    fn setup(beta: f64, levels: usize) -> (CylinderGraph, SlicedDomain) {
        let d = builtin_example("1a", &BuiltinParams::default()).unwrap();
        let grid = GridSpec::new(TimeBox::new(vec![0.0], 1.0, 0.0, 1.0).unwrap(), 0.12, levels, 2f64.powf(1.0 / 3.0), beta);
        let g = CylinderGraph::build(&d, &ChainParams::default(), &grid).unwrap();
        let s = SlicedDomain::new(d, 0.3, TimeSign::Plus).unwrap();
        (g, s)
    }

    #[test]
    fn tiny_caps_past_32_bit_time_indices() {
        let (g, s) = setup(0.5, 2);
        let src = g.auto_central(0.3, Some(&crate::chain::middle_region())).unwrap();
        let field = DistanceField::new(&g, src).unwrap();
        let z = ParabolicPoint::new(vec![0.995], 0.9);
        let cp = CountingParams { delta: 0.5, ladder: 2, ..Default::default() };
        let v = field.counting_function(&z, &s, &cp).unwrap();
        let last = g.lattice.radius(level_at_most(g.lattice.r_max, g.lattice.sigma, v.cap * 0.25));
        assert!(0.9 / g.lattice.pitch_t(0) * (0.12 / last).powi(2) > i32::MAX as f64);
        assert!(v.qualifying > 0, "{v:?}");
        assert_eq!(v.status, CountingStatus::Finite);
        assert!(validate_chain(&v.witness, &g.params, &g.domain).unwrap());
    }

    #[test]
    fn level_lookup() {
        assert_eq!(level_at_most(1.0, 2.0, 1.0), 0);
        assert_eq!(level_at_most(1.0, 2.0, 0.5), 1);
        assert_eq!(level_at_most(1.0, 2.0, 0.49), 2);
        assert_eq!(level_at_most(1.0, 2.0, 7.0), 0);
    }

    #[test]
    fn counting_is_finite_and_realized_by_a_chain() {
        let (g, s) = setup(0.5, 2);
        let src = g.auto_central(0.3, Some(&crate::chain::middle_region())).unwrap();
        let field = DistanceField::new(&g, src).unwrap();
        let z = ParabolicPoint::new(vec![0.1], 0.7);
        let cp = CountingParams { delta: 0.5, ..Default::default() };
        let v = field.counting_function(&z, &s, &cp).unwrap();
        assert_eq!(v.status, CountingStatus::Finite, "{v:?}");
        assert!(v.value.unwrap() > 2);
        assert!(v.qualifying > 0);
        assert_eq!(v.witness.len(), v.value.unwrap() as usize);
        assert_eq!(v.witness[0], g.cylinder(src));
        assert!(validate_chain(&v.witness, &g.params, &g.domain).unwrap());
        let last = v.witness.last().unwrap();
        assert!(last.radius <= v.cap * (1.0 + 1e-12));
    }

    #[test]
    fn counting_at_source_center_is_one_when_cap_allows() {
        // source radius below the cap: the source itself qualifies
        let d = crate::domain::free_space(crate::geometry::MetricParams::new(1, 2.0).unwrap(), 1e4).unwrap();
        let grid = GridSpec::new(TimeBox::new(vec![0.0], 1.0, 0.0, 1.0).unwrap(), 0.1, 1, 2f64.powf(1.0 / 3.0), 0.5);
        let g = CylinderGraph::build(&d, &ChainParams::default(), &grid).unwrap();
        let src = g.lookup(0, &[0, 10]).unwrap();
        let field = DistanceField::new(&g, src).unwrap();
        let s = SlicedDomain::new(d, -1e3, TimeSign::Plus).unwrap();
        let c = g.cylinder(src);
        let cp = CountingParams { delta: 0.5, ladder: 2, ..Default::default() };
        let v = field.counting_function(&c.center, &s, &cp).unwrap();
        assert_eq!(v.value, Some(1), "{v:?}");
    }

    #[test]
    fn counting_non_increasing_under_refinement() {
        let cp = CountingParams { delta: 0.5, center_factor: Some(0.5), ..Default::default() };
        let (g1, s) = setup(0.5, 2);
        let (g2, _) = setup(0.25, 3);
        let src1 = g1.auto_central(0.3, Some(&crate::chain::middle_region())).unwrap();
        let c = g1.cylinder(src1);
        let src2 = g2.lookup(g1.level_of(src1), &g1.row(src1).iter().map(|v| v * 2).collect::<Vec<_>>()).unwrap();
        assert_eq!(g2.cylinder(src2).center.t, c.center.t);
        let f1 = DistanceField::new(&g1, src1).unwrap();
        let f2 = DistanceField::new(&g2, src2).unwrap();
        for (x, t) in [(0.0, 0.6), (0.5, 0.8), (-0.7, 0.5)] {
            let z = ParabolicPoint::new(vec![x], t);
            let a = f1.counting_function(&z, &s, &cp).unwrap();
            let b = f2.counting_function(&z, &s, &cp).unwrap();
            assert!(b.value.unwrap_or(u32::MAX) <= a.value.unwrap_or(u32::MAX), "{z:?}: {a:?} vs {b:?}");
        }
    }

    #[test]
    fn counting_rejects_points_outside_slice() {
        let (g, s) = setup(0.5, 2);
        let field = DistanceField::new(&g, 0).unwrap();
        assert!(field.counting_function(&ParabolicPoint::new(vec![0.0], 0.1), &s, &CountingParams::default()).is_err());
    }
}
