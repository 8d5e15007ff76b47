//! FIT links, chains, discretized cylinder graphs and chain distances.

mod counting;
mod graph;
mod io;
mod search;

pub use counting::{CountingParams, CountingStatus, CountingValue};
pub use graph::{CylinderGraph, GridSpec, LevelRegion, NodeRef};
pub use io::{ExportedGraph, ExportedNode, Witness};
pub use search::{
    bfs, fit_distance, BfsTree, fit_distance_all, fit_distance_guided, ChainGraph, DistanceField, ExplicitGraph, SearchResult,
    UNREACHED,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::geometry::{
    ball_intersection_by_gap, box_ops, cylinder_volume, interval_overlap, lagged_part, unit_ball_volume, MetricParams,
    ParabolicCylinder, ParabolicPoint, TimeSign, LINK_LAG,
};

/// Relative slack on both link inequalities, so that exact equality cases
/// survive floating-point rounding.
pub const LINK_RTOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

impl ChainParams {
    pub fn new(a1: f64, a2: f64, a3: f64) -> Result<ChainParams> {
        let a = ChainParams { a1, a2, a3 };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("A1", self.a1), ("A2", self.a2), ("A3", self.a3)] {
            if !(v.is_finite() && v >= 2.0) {
                return Err(Error::invalid(format!("{name} must be finite and >= 2, got {v}")));
            }
        }
        Ok(())
    }
}

impl Default for ChainParams {
    fn default() -> Self {
        ChainParams { a1: 4.0, a2: 4.0, a3: 2.0 }
    }
}

/// Ordered FIT link test: comparable volumes and `|P⁺ ∩ Q⁻| >= |P ∪ Q| / A2`.
pub fn is_fit_link(p: &ParabolicCylinder, q: &ParabolicCylinder, a: &ChainParams, m: &MetricParams) -> Result<bool> {
    m.check_dim(p.center.x.len())?;
    m.check_dim(q.center.x.len())?;
    let vp = cylinder_volume(p, m);
    let vq = cylinder_volume(q, m);
    let ratio = vq / vp;
    if ratio < (1.0 - LINK_RTOL) / a.a1 || ratio > a.a1 * (1.0 + LINK_RTOL) {
        return Ok(false);
    }
    let plus = lagged_part(p, TimeSign::Plus, LINK_LAG, m)?;
    let minus = lagged_part(q, TimeSign::Minus, LINK_LAG, m)?;
    let inter = box_ops(&plus, &minus)?.intersection_volume;
    let union = box_ops(&p.as_box(m), &q.as_box(m))?.union_volume;
    Ok(inter > 0.0 && inter >= union / a.a2 * (1.0 - LINK_RTOL))
}

/// Precomputed constants for the flat link test used by graph searches.
#[derive(Clone, Copy, Debug)]
pub(crate) struct LinkKernel {
    pub n: usize,
    pub a1: f64,
    pub a2: f64,
    omega: f64,
}

impl LinkKernel {
    pub fn new(m: &MetricParams, a: &ChainParams) -> LinkKernel {
        LinkKernel { n: m.n, a1: a.a1, a2: a.a2, omega: unit_ball_volume(m.n) }
    }

    pub fn volume(&self, r: f64, h: f64) -> f64 {
        self.omega * r.powi(self.n as i32) * 2.0 * h
    }

    pub fn ratio_ok(&self, vp: f64, vq: f64) -> bool {
        let ratio = vq / vp;
        ratio >= (1.0 - LINK_RTOL) / self.a1 && ratio <= self.a1 * (1.0 + LINK_RTOL)
    }

    /// Measure part of the link test, given the spatial gap, the spatial
    /// intersection volume of the two balls, and `dt = t_Q - t_P`.
    #[inline]
    #[allow(clippy::too_many_arguments)]
    pub fn overlap_ok(&self, vp: f64, vq: f64, hp: f64, hq: f64, lens: f64, dt: f64) -> bool {
        let inter = lens * interval_overlap(2.0 * hp, 4.0 * hp, dt - 4.0 * hq, dt - 2.0 * hq);
        if inter <= 0.0 {
            return false;
        }
        let both = lens * interval_overlap(-hp, hp, dt - hq, dt + hq);
        let union = vp + vq - both;
        inter >= union / self.a2 * (1.0 - LINK_RTOL)
    }

    /// Range of `dt = t_Q - t_P` outside which the overlap test cannot pass,
    /// given the spatial intersection volume. Slightly widened for rounding.
    pub fn dt_window(&self, vp: f64, vq: f64, hp: f64, hq: f64, lens: f64) -> Option<(f64, f64)> {
        if lens <= 0.0 {
            return None;
        }
        // links force disjoint time extents, so the union is vp + vq
        let need = (vp + vq) / (self.a2 * lens) * (1.0 - 2.0 * LINK_RTOL);
        let lo = 2.0 * (hp + hq) + need;
        let hi = 4.0 * (hp + hq) - need;
        let pad = 1e-12 * (hp + hq);
        (lo <= hi + 2.0 * pad).then_some((lo - pad, hi + pad))
    }

    pub fn lens(&self, gap: f64, rp: f64, rq: f64) -> f64 {
        ball_intersection_by_gap(gap, rp, rq, self.n)
    }
}

/// Admissibility of a cylinder: its `A3`-dilated 3-hull is inside the domain.
pub fn is_admissible(c: &ParabolicCylinder, a: &ChainParams, domain: &DomainSpec) -> Result<bool> {
    domain.metric.check_dim(c.center.x.len())?;
    Ok(admissible_raw(domain, a.a3, &c.center.x, c.center.t, c.radius))
}

pub(crate) fn admissible_raw(domain: &DomainSpec, a3: f64, x: &[f64], t: f64, r: f64) -> bool {
    let half = (LINK_LAG + 1.0) * (a3 * r).powf(domain.metric.p);
    domain.contains_box_raw(x, a3 * r, t - half, t + half)
}

/// True iff the chain is nonempty, consecutive pairs are FIT links and every
/// cylinder is admissible.
pub fn validate_chain(chain: &[ParabolicCylinder], a: &ChainParams, domain: &DomainSpec) -> Result<bool> {
    if chain.is_empty() {
        return Err(Error::invalid("chain must be nonempty"));
    }
    let m = &domain.metric;
    for c in chain {
        if !is_admissible(c, a, domain)? {
            return Ok(false);
        }
    }
    for w in chain.windows(2) {
        if !is_fit_link(&w[0], &w[1], a, m)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// A random FIT chain in free space starting at `start`: each step rescales
/// the radius by a factor in `[1/1.25, 1.25]`, shifts the center spatially by
/// less than a third of the smaller radius and picks the time lag inside the
/// window where the overlap test can pass. Every link is verified.
pub fn random_chain<R: Rng + ?Sized>(
    start: &ParabolicCylinder,
    len: usize,
    a: &ChainParams,
    m: &MetricParams,
    rng: &mut R,
) -> Result<Vec<ParabolicCylinder>> {
    m.check_dim(start.center.x.len())?;
    if len == 0 {
        return Err(Error::invalid("chain length must be positive"));
    }
    let k = LinkKernel::new(m, a);
    let mut chain = vec![start.clone()];
    while chain.len() < len {
        let prev = chain.last().expect("nonempty");
        let mut next = None;
        for _ in 0..256 {
            let r = prev.radius * 1.25f64.powf(rng.random_range(-1.0..=1.0));
            let mut dir: Vec<f64> = (0..m.n).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            let shift = rng.random::<f64>() * prev.radius.min(r) / 3.0;
            if norm > 0.0 {
                dir.iter_mut().for_each(|v| *v *= shift / norm);
            }
            let (hp, hq) = (prev.radius.powf(m.p), r.powf(m.p));
            let (vp, vq) = (k.volume(prev.radius, hp), k.volume(r, hq));
            let Some((lo, hi)) = k.dt_window(vp, vq, hp, hq, k.lens(shift, prev.radius, r)) else { continue };
            let dt = lo + rng.random::<f64>() * (hi - lo);
            let x: Vec<f64> = prev.center.x.iter().zip(&dir).map(|(c, d)| c + d).collect();
            let q = ParabolicCylinder { center: ParabolicPoint::new(x, prev.center.t + dt), radius: r };
            if is_fit_link(prev, &q, a, m)? {
                next = Some(q);
                break;
            }
        }
        chain.push(next.ok_or_else(|| Error::Resolution("no random link found after 256 draws".into()))?);
    }
    Ok(chain)
}

#[cfg(test)]
pub(crate) fn middle_region() -> crate::domain::AxisBox {
    crate::domain::AxisBox::new(vec![-0.1, -1e9], vec![0.1, 1e9]).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::free_space;

    fn cyl(x: f64, t: f64, r: f64) -> ParabolicCylinder {
        ParabolicCylinder::new(ParabolicPoint::new(vec![x], t), r).unwrap()
    }

    #[test]
    fn link_examples() {
        let m = MetricParams::new(1, 2.0).unwrap();
        let a = ChainParams::new(2.0, 2.0, 2.0).unwrap();
        let p = cyl(0.0, 0.0, 1.0);
        assert!(is_fit_link(&p, &cyl(0.0, 6.0, 1.0), &a, &m).unwrap());
        assert!(!is_fit_link(&cyl(0.0, 6.0, 1.0), &p, &a, &m).unwrap());
        assert!(!is_fit_link(&p, &cyl(10.0, 6.0, 1.0), &a, &m).unwrap());
        assert!(!is_fit_link(&p, &cyl(0.0, 0.0, 4.0), &a, &m).unwrap());
        // any shift off the exact stack breaks the equality case for A2 = 2
        assert!(!is_fit_link(&p, &cyl(0.0, 6.01, 1.0), &a, &m).unwrap());
        assert!(!is_fit_link(&p, &cyl(0.01, 6.0, 1.0), &a, &m).unwrap());
    }

    #[test]
    fn chain_params_bounds() {
        assert!(ChainParams::new(1.9, 2.0, 2.0).is_err());
        assert!(ChainParams::new(2.0, f64::NAN, 2.0).is_err());
        assert!(ChainParams::new(2.0, 2.0, 2.0).is_ok());
    }

    #[test]
    fn flat_kernel_agrees_with_box_route() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for &(n, p) in &[(1usize, 2.0), (2, 2.0), (1, 3.0), (3, 1.5)] {
            let m = MetricParams::new(n, p).unwrap();
            let a = ChainParams::new(4.0, 4.0, 2.0).unwrap();
            let k = LinkKernel::new(&m, &a);
            for _ in 0..3000 {
                let rp: f64 = rng.random_range(0.5..1.5);
                let rq: f64 = rng.random_range(0.5..1.5);
                let xq: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
                let dt: f64 = rng.random_range(-2.0..12.0);
                let pc = ParabolicCylinder::new(ParabolicPoint::new(vec![0.0; n], 0.0), rp).unwrap();
                let qc = ParabolicCylinder::new(ParabolicPoint::new(xq.clone(), dt), rq).unwrap();
                let slow = is_fit_link(&pc, &qc, &a, &m).unwrap();
                let (hp, hq) = (rp.powf(p), rq.powf(p));
                let (vp, vq) = (k.volume(rp, hp), k.volume(rq, hq));
                let gap = crate::geometry::euclid(&xq, &vec![0.0; n]);
                let fast = k.ratio_ok(vp, vq) && k.overlap_ok(vp, vq, hp, hq, k.lens(gap, rp, rq), dt);
                assert_eq!(slow, fast, "n={n} p={p} rp={rp} rq={rq} xq={xq:?} dt={dt}");
                if fast {
                    let (lo, hi) = k.dt_window(vp, vq, hp, hq, k.lens(gap, rp, rq)).unwrap();
                    assert!(lo <= dt && dt <= hi);
                }
            }
        }
    }

    #[test]
    fn validate_chain_examples() {
        let m = MetricParams::new(1, 2.0).unwrap();
        let a = ChainParams::new(2.0, 2.0, 2.0).unwrap();
        let omega = free_space(m, 1e3).unwrap();
        let p = cyl(0.0, 0.0, 1.0);
        let q = cyl(0.0, 6.0, 1.0);
        assert!(validate_chain(std::slice::from_ref(&p), &a, &omega).unwrap());
        assert!(validate_chain(&[p.clone(), q.clone()], &a, &omega).unwrap());
        assert!(!validate_chain(&[q, p.clone()], &a, &omega).unwrap());
        assert!(validate_chain(&[], &a, &omega).is_err());
        let tight = free_space(m, 2.0).unwrap();
        assert!(!validate_chain(&[p], &a, &tight).unwrap());
    }

    #[test]
    fn random_chains_are_valid() {
        use rand::SeedableRng;
        for (n, p) in [(1usize, 2.0), (2, 2.0), (1, 3.0)] {
            let m = MetricParams::new(n, p).unwrap();
            let a = ChainParams::default();
            let d = free_space(m, 1e3).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(n as u64);
            let start = ParabolicCylinder::new(ParabolicPoint::new(vec![0.0; n], 0.0), 1.0).unwrap();
            for _ in 0..20 {
                let c = random_chain(&start, 6, &a, &m, &mut rng).unwrap();
                assert_eq!(c.len(), 6);
                assert!(validate_chain(&c, &a, &d).unwrap());
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn links_move_forward_in_time(xq in -3.0..3.0f64, tq in -20.0..20.0f64, rp in 0.2..3.0f64, rq in 0.2..3.0f64,
                                          p in 1.2..4.0f64) {
                let m = MetricParams::new(1, p).unwrap();
                let a = ChainParams::new(8.0, 8.0, 2.0).unwrap();
                let pc = cyl(0.0, 0.0, rp);
                let qc = cyl(xq, tq, rq);
                if is_fit_link(&pc, &qc, &a, &m).unwrap() {
                    prop_assert!(tq > 0.0);
                    // the two cylinders are disjoint in time
                    prop_assert!(tq - rq.powf(p) > rp.powf(p));
                }
            }
        }
    }
}

