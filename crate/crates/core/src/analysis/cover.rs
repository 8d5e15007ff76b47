use crate::domain::SlicedDomain;
use crate::error::{Error, Result};
use crate::geometry::ParabolicCylinder;

/// Whether two cylinders with the given centers and radii have disjoint interiors.
pub fn cylinders_disjoint(a: &ParabolicCylinder, b: &ParabolicCylinder, p: f64) -> bool {
    let dx = crate::geometry::euclid(&a.center.x, &b.center.x);
    let dt = (a.center.t - b.center.t).abs();
    dx >= a.radius + b.radius || dt >= a.radius.powf(p) + b.radius.powf(p)
}

/// Whether `inner` lies in `outer` (closed).
pub fn cylinder_within(inner: &ParabolicCylinder, outer: &ParabolicCylinder, p: f64) -> bool {
    let dx = crate::geometry::euclid(&inner.center.x, &outer.center.x);
    let dt = (inner.center.t - outer.center.t).abs();
    let tol = 1e-12 * (1.0 + outer.radius.powf(p));
    dx + inner.radius <= outer.radius * (1.0 + 1e-12) && dt + inner.radius.powf(p) <= outer.radius.powf(p) + tol
}

/// Five-times covering: greedy by decreasing radius so that the selected
/// cylinders shrunk by 5 are pairwise disjoint and every candidate lies in the
/// same-centered cylinder of five times the radius of some selection.
///
/// Candidates are cylinders `B/5` in the usual statement; the selection here
/// works on the candidates themselves, so pass the shrunk cylinders if that is
/// what should be disjoint. Returns indices into `candidates`.
pub fn whitney_cover(slice: &SlicedDomain, candidates: &[ParabolicCylinder]) -> Result<Vec<usize>> {
    if candidates.is_empty() {
        return Err(Error::invalid("covering needs at least one candidate"));
    }
    let m = slice.metric();
    for c in candidates {
        m.check_dim(c.center.x.len())?;
        if !(c.radius > 0.0 && c.radius.is_finite() && c.center.is_finite()) {
            return Err(Error::invalid("candidate cylinder needs a finite center and radius > 0"));
        }
    }
    let p = m.p;
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| candidates[b].radius.total_cmp(&candidates[a].radius).then(a.cmp(&b)));
    let mut chosen: Vec<usize> = Vec::new();
    for i in order {
        let c = &candidates[i];
        if chosen.iter().all(|&j| cylinders_disjoint(c, &candidates[j], p)) {
            chosen.push(i);
        }
    }
    Ok(chosen)
}
