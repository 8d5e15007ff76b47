//! Exhaustive chain enumeration on tiny explicit node sets.
//!
//! Adjacency comes from [`is_fit_link`] on the box measures and the search is
//! a depth-limited enumeration, so nothing here shares code with the graph
//! search it is used to check.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{fit_distance, is_admissible, is_fit_link, ChainParams, ExplicitGraph};
use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::geometry::{ParabolicCylinder, ParabolicPoint};

pub const MAX_NODES: usize = 500;
pub const MAX_LEN: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum OracleDistance {
    Finite(u32),
    /// No chain exists at any length.
    Infinite,
    /// A chain exists but is longer than the length cap; holds `max_len + 1`.
    AtLeast(u32),
}

impl OracleDistance {
    /// Comparison value against a search result, `None` for lengths above the cap.
    pub fn matches(&self, search: Option<u32>) -> bool {
        match *self {
            OracleDistance::Finite(k) => search == Some(k),
            OracleDistance::Infinite => search.is_none(),
            OracleDistance::AtLeast(k) => search.is_some_and(|d| d >= k),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExplicitNodeSet {
    pub nodes: Vec<ParabolicCylinder>,
    pub params: ChainParams,
    pub domain: DomainSpec,
    adj: Vec<Vec<usize>>,
}

impl ExplicitNodeSet {
    pub fn new(nodes: Vec<ParabolicCylinder>, params: ChainParams, domain: DomainSpec) -> Result<ExplicitNodeSet> {
        if nodes.len() > MAX_NODES {
            return Err(Error::Budget(format!("oracle refuses {} nodes (cap {MAX_NODES})", nodes.len())));
        }
        params.validate()?;
        domain.validate()?;
        for (i, c) in nodes.iter().enumerate() {
            if !is_admissible(c, &params, &domain)? {
                return Err(Error::invalid(format!("oracle node {i} is not admissible")));
            }
        }
        let m = domain.metric;
        let mut adj = vec![Vec::new(); nodes.len()];
        for (i, p) in nodes.iter().enumerate() {
            for (j, q) in nodes.iter().enumerate() {
                if is_fit_link(p, q, &params, &m)? {
                    adj[i].push(j);
                }
            }
        }
        Ok(ExplicitNodeSet { nodes, params, domain, adj })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn links(&self, u: usize) -> &[usize] {
        &self.adj[u]
    }

    pub fn enumerate_shortest(&self, source: usize, target: usize, max_len: usize) -> Result<OracleDistance> {
        self.check(source)?;
        Ok(self.shortest_to(target, max_len)?[source])
    }

    /// Oracle distances from every node to `target`, sharing the failure memo.
    pub fn shortest_to(&self, target: usize, max_len: usize) -> Result<Vec<OracleDistance>> {
        self.check(target)?;
        if max_len == 0 || max_len > MAX_LEN {
            return Err(Error::Budget(format!("oracle max_len must be in 1..={MAX_LEN}")));
        }
        let reaches = self.reaches(target);
        let mut search = Deepening { adj: &self.adj, reaches: &reaches, target, failed: vec![0; self.len()] };
        Ok((0..self.len())
            .map(|s| {
                if !reaches[s] {
                    return OracleDistance::Infinite;
                }
                (1..=max_len)
                    .find(|&budget| search.found(s, budget))
                    .map_or(OracleDistance::AtLeast(max_len as u32 + 1), |k| OracleDistance::Finite(k as u32))
            })
            .collect())
    }

    fn check(&self, v: usize) -> Result<()> {
        if v >= self.len() {
            return Err(Error::invalid(format!("oracle node {v} out of range")));
        }
        Ok(())
    }

    /// Nodes from which `target` can be reached by some chain.
    fn reaches(&self, target: usize) -> Vec<bool> {
        let mut rev = vec![Vec::new(); self.len()];
        for (u, out) in self.adj.iter().enumerate() {
            for &v in out {
                rev[v].push(u);
            }
        }
        let mut seen = vec![false; self.len()];
        let mut stack = vec![target];
        seen[target] = true;
        while let Some(v) = stack.pop() {
            for &u in &rev[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen
    }
}

struct Deepening<'a> {
    adj: &'a [Vec<usize>],
    reaches: &'a [bool],
    target: usize,
    /// Largest budget known to fail from each node.
    failed: Vec<usize>,
}

impl Deepening<'_> {
    /// Whether some chain from `v` to the target has at most `budget` cylinders.
    fn found(&mut self, v: usize, budget: usize) -> bool {
        if v == self.target {
            return true;
        }
        if budget <= 1 || self.failed[v] >= budget {
            return false;
        }
        for i in 0..self.adj[v].len() {
            let w = self.adj[v][i];
            if self.reaches[w] && self.found(w, budget - 1) {
                return true;
            }
        }
        self.failed[v] = budget;
        false
    }
}

/// Outcome of comparing breadth-first distances with the oracle over all
/// ordered pairs of a node set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub nodes: usize,
    pub pairs: usize,
    /// Pairs where both sides give the same exact value (or both infinite).
    pub exact: usize,
    /// Pairs whose oracle value hit the length cap.
    pub capped: usize,
    pub reachable: usize,
    pub max_distance: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mismatches: Vec<(usize, usize)>,
}

impl Agreement {
    pub fn all_exact(&self) -> bool {
        self.exact == self.pairs
    }
}

pub fn compare_with_search(ns: &ExplicitNodeSet, max_len: usize) -> Result<Agreement> {
    let g = ExplicitGraph::new(ns.nodes.clone(), &ns.params, &ns.domain.metric)?;
    let mut out = Agreement { nodes: ns.len(), ..Default::default() };
    for t in 0..ns.len() {
        let col = ns.shortest_to(t, max_len)?;
        for (s, o) in col.iter().enumerate() {
            let d = fit_distance(&g, s, t)?.distance;
            out.pairs += 1;
            if d.is_some() {
                out.reachable += 1;
                out.max_distance = out.max_distance.max(d.unwrap_or(0));
            }
            let exact = match *o {
                OracleDistance::Finite(k) => d == Some(k),
                OracleDistance::Infinite => d.is_none(),
                OracleDistance::AtLeast(_) => {
                    out.capped += 1;
                    false
                }
            };
            if exact {
                out.exact += 1;
            } else if out.mismatches.len() < 32 {
                out.mismatches.push((s, t));
            }
        }
    }
    Ok(out)
}

/// Random cylinders with centers in `[-1, 1]^n x [0, t_max]` and radii in
/// `[0.4, 0.7]`.
pub fn random_node_set<R: Rng + ?Sized>(count: usize, n: usize, t_max: f64, rng: &mut R) -> Vec<ParabolicCylinder> {
    (0..count)
        .map(|_| {
            let x = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            ParabolicCylinder { center: ParabolicPoint::new(x, rng.random_range(0.0..t_max)), radius: rng.random_range(0.4..0.7) }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{fit_distance, ExplicitGraph};
    use crate::domain::free_space;
    use crate::geometry::{MetricParams, ParabolicPoint};
    use rand::{Rng, SeedableRng};

    fn cyl(x: f64, t: f64, r: f64) -> ParabolicCylinder {
        ParabolicCylinder::new(ParabolicPoint::new(vec![x], t), r).unwrap()
    }

    fn space() -> DomainSpec {
        free_space(MetricParams::new(1, 2.0).unwrap(), 1e3).unwrap()
    }

    #[test]
    fn examples() {
        let a = ChainParams::new(2.0, 2.0, 2.0).unwrap();
        let ns = ExplicitNodeSet::new(vec![cyl(0.0, 0.0, 1.0), cyl(0.0, 6.0, 1.0)], a, space()).unwrap();
        assert_eq!(ns.enumerate_shortest(0, 0, 5).unwrap(), OracleDistance::Finite(1));
        assert_eq!(ns.enumerate_shortest(0, 1, 5).unwrap(), OracleDistance::Finite(2));
        assert_eq!(ns.enumerate_shortest(1, 0, 5).unwrap(), OracleDistance::Infinite);
        assert!(ns.enumerate_shortest(0, 1, 0).is_err());
        assert!(ns.enumerate_shortest(0, 1, 21).is_err());
    }

    #[test]
    fn length_cap_is_distinct_from_infinity() {
        let a = ChainParams::new(2.0, 2.0, 2.0).unwrap();
        let stack: Vec<_> = (0..5).map(|k| cyl(0.0, 6.0 * k as f64, 1.0)).collect();
        let ns = ExplicitNodeSet::new(stack, a, space()).unwrap();
        assert_eq!(ns.enumerate_shortest(0, 4, 5).unwrap(), OracleDistance::Finite(5));
        assert_eq!(ns.enumerate_shortest(0, 4, 3).unwrap(), OracleDistance::AtLeast(4));
        assert!(OracleDistance::AtLeast(4).matches(Some(5)));
        assert!(!OracleDistance::AtLeast(4).matches(None));
    }

    #[test]
    fn refuses_large_or_inadmissible_sets() {
        let a = ChainParams::default();
        let many: Vec<_> = (0..501).map(|k| cyl(0.0, k as f64, 0.1)).collect();
        assert!(ExplicitNodeSet::new(many, a, space()).is_err());
        let tight = free_space(MetricParams::new(1, 2.0).unwrap(), 1.0).unwrap();
        assert!(ExplicitNodeSet::new(vec![cyl(0.0, 0.0, 1.0)], a, tight).is_err());
    }

    #[test]
    fn agrees_with_breadth_first_search() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let m = MetricParams::new(1, 2.0).unwrap();
        let a = ChainParams::default();
        for _ in 0..5 {
            let nodes: Vec<_> = (0..60)
                .map(|_| cyl(rng.random_range(-1.0..1.0), rng.random_range(0.0..12.0), rng.random_range(0.4..0.7)))
                .collect();
            let ns = ExplicitNodeSet::new(nodes.clone(), a, space()).unwrap();
            let g = ExplicitGraph::new(nodes, &a, &m).unwrap();
            for t in 0..ns.len() {
                let col = ns.shortest_to(t, MAX_LEN).unwrap();
                for (s, o) in col.iter().enumerate() {
                    assert!(o.matches(fit_distance(&g, s, t).unwrap().distance), "{s}->{t}: {o:?}");
                }
            }
        }
    }
}
