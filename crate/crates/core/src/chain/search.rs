use serde::{Deserialize, Serialize};
use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::graph::for_each_index;
use super::{ChainParams, CylinderGraph, LinkKernel};
use crate::analysis::freespace_law_raw;
use crate::error::{Error, Result};
use crate::geometry::{euclid, MetricParams, ParabolicCylinder, ParabolicPoint};

/// Distance value of unreached nodes.
pub const UNREACHED: u32 = u32::MAX;

/// A directed graph whose successor lists can be produced on demand.
pub trait ChainGraph: Sync {
    fn node_count(&self) -> usize;
    /// Successors of `u` in increasing order.
    fn successors_into(&self, u: usize, out: &mut Vec<u32>);
}

/// Breadth-first tree: `dist` counts cylinders (the source has distance 1).
#[derive(Clone, Debug)]
pub struct BfsTree {
    pub source: usize,
    pub dist: Vec<u32>,
    pub parent: Vec<u32>,
}

impl BfsTree {
    pub fn distance(&self, v: usize) -> Option<u32> {
        let d = self.dist[v];
        (d != UNREACHED).then_some(d)
    }

    /// Node path from the source to `v`, empty when unreached.
    pub fn path_to(&self, v: usize) -> Vec<usize> {
        if self.dist[v] == UNREACHED {
            return Vec::new();
        }
        let mut path = vec![v];
        let mut cur = v;
        while cur != self.source {
            cur = self.parent[cur] as usize;
            path.push(cur);
        }
        path.reverse();
        path
    }
}

/// Level-synchronous BFS. Frontiers are processed in increasing index order,
/// so each node's parent is its lowest-index predecessor on the previous level.
pub fn bfs<G: ChainGraph + ?Sized>(g: &G, source: usize, stop_at: Option<usize>) -> BfsTree {
    let n = g.node_count();
    let mut dist = vec![UNREACHED; n];
    let mut parent = vec![UNREACHED; n];
    dist[source] = 1;
    parent[source] = source as u32;
    let mut frontier = vec![source as u32];
    let mut next = Vec::new();
    let mut buf = Vec::new();
    let mut depth = 1u32;
    while !frontier.is_empty() {
        if let Some(t) = stop_at {
            if dist[t] != UNREACHED {
                break;
            }
        }
        depth += 1;
        next.clear();
        for &u in &frontier {
            g.successors_into(u as usize, &mut buf);
            for &v in &buf {
                if dist[v as usize] == UNREACHED {
                    dist[v as usize] = depth;
                    parent[v as usize] = u;
                    next.push(v);
                }
            }
        }
        next.sort_unstable();
        std::mem::swap(&mut frontier, &mut next);
    }
    BfsTree { source, dist, parent }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    /// Number of cylinders in the shortest chain; `None` when unreachable.
    pub distance: Option<u32>,
    pub witness: Vec<usize>,
    /// Set when produced by the goal-directed search, which may not be optimal.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub approximate: bool,
}

fn check_node<G: ChainGraph + ?Sized>(g: &G, v: usize) -> Result<()> {
    if v >= g.node_count() {
        return Err(Error::invalid(format!("node index {v} out of range (graph has {} nodes)", g.node_count())));
    }
    Ok(())
}

pub fn fit_distance<G: ChainGraph + ?Sized>(g: &G, source: usize, target: usize) -> Result<SearchResult> {
    check_node(g, source)?;
    check_node(g, target)?;
    let tree = bfs(g, source, Some(target));
    Ok(SearchResult { distance: tree.distance(target), witness: tree.path_to(target), approximate: false })
}

pub fn fit_distance_all<G: ChainGraph + ?Sized>(g: &G, source: usize) -> Result<BfsTree> {
    check_node(g, source)?;
    Ok(bfs(g, source, None))
}

/// Best-first search ordered by chain length plus `weight` times the
/// free-space law from each node to the target. Not guaranteed optimal.
pub fn fit_distance_guided(g: &CylinderGraph, source: usize, target: usize, weight: f64) -> Result<SearchResult> {
    check_node(g, source)?;
    check_node(g, target)?;
    let m = *g.metric();
    let (ty, ts) = (g.center_space(target), g.center_time(target));
    let h = |v: usize| -> f64 {
        if v == target {
            return 0.0;
        }
        let (x, t, r) = (g.center_space(v), g.center_time(v), g.radius_of(v));
        if t >= ts {
            return f64::INFINITY;
        }
        weight * freespace_law_raw(&x, t, r, &ty, ts, &m).unwrap_or(0.0)
    };
    let n = g.node_count();
    let mut dist = vec![UNREACHED; n];
    let mut parent = vec![UNREACHED; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 1;
    parent[source] = source as u32;
    heap.push(Reverse((OrdF(1.0 + h(source)), source)));
    let mut buf = Vec::new();
    while let Some(Reverse((_, u))) = heap.pop() {
        if u == target {
            break;
        }
        g.successors(u, &mut buf);
        for &v in &buf {
            let v = v as usize;
            let nd = dist[u] + 1;
            if nd < dist[v] {
                dist[v] = nd;
                parent[v] = u as u32;
                let f = nd as f64 + h(v);
                if f.is_finite() {
                    heap.push(Reverse((OrdF(f), v)));
                }
            }
        }
    }
    let tree = BfsTree { source, dist, parent };
    Ok(SearchResult { distance: tree.distance(target), witness: tree.path_to(target), approximate: true })
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct OrdF(f64);
impl Eq for OrdF {}
impl PartialOrd for OrdF {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for OrdF {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&o.0)
    }
}

/// Graph over an explicit list of cylinders with materialized adjacency.
#[derive(Clone, Debug)]
pub struct ExplicitGraph {
    pub nodes: Vec<ParabolicCylinder>,
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl ExplicitGraph {
    pub fn new(nodes: Vec<ParabolicCylinder>, a: &ChainParams, m: &MetricParams) -> Result<ExplicitGraph> {
        for c in &nodes {
            m.check_dim(c.center.x.len())?;
        }
        let k = LinkKernel::new(m, a);
        let pre: Vec<(f64, f64)> = nodes
            .iter()
            .map(|c| {
                let h = c.radius.powf(m.p);
                (h, k.volume(c.radius, h))
            })
            .collect();
        let mut offsets = vec![0];
        let mut targets = Vec::new();
        for (i, p) in nodes.iter().enumerate() {
            for (j, q) in nodes.iter().enumerate() {
                let (hp, vp) = pre[i];
                let (hq, vq) = pre[j];
                if !k.ratio_ok(vp, vq) {
                    continue;
                }
                let gap = euclid(&p.center.x, &q.center.x);
                if gap >= p.radius + q.radius {
                    continue;
                }
                let lens = k.lens(gap, p.radius, q.radius);
                if k.overlap_ok(vp, vq, hp, hq, lens, q.center.t - p.center.t) {
                    targets.push(j as u32);
                }
            }
            offsets.push(targets.len());
        }
        Ok(ExplicitGraph { nodes, offsets, targets })
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }
}

impl ChainGraph for ExplicitGraph {
    fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn successors_into(&self, u: usize, out: &mut Vec<u32>) {
        out.clear();
        out.extend_from_slice(&self.targets[self.offsets[u]..self.offsets[u + 1]]);
    }
}

/// Single-source distances on a cylinder graph, with point queries.
pub struct DistanceField<'g> {
    pub graph: &'g CylinderGraph,
    pub tree: BfsTree,
}

impl<'g> DistanceField<'g> {
    pub fn new(graph: &'g CylinderGraph, source: usize) -> Result<DistanceField<'g>> {
        let tree = fit_distance_all(graph, source)?;
        Ok(DistanceField { graph, tree })
    }

    pub fn source(&self) -> usize {
        self.tree.source
    }

    pub fn node_distance(&self, v: usize) -> Option<u32> {
        self.tree.distance(v)
    }

    /// Nodes `Q` with `z ∈ Q⁺` and `Q ⊂ {t > t0}`, in increasing id order.
    pub fn point_candidates(&self, z: &ParabolicPoint, t0: f64) -> Vec<usize> {
        let g = self.graph;
        let lat = &g.lattice;
        let n = lat.n;
        let mut out = Vec::new();
        let mut spatial = vec![0i32; n];
        for level in 0..g.level_count() {
            if g.level_start[level] == g.level_start[level + 1] {
                continue;
            }
            let r = lat.radius(level);
            let h = r.powf(lat.p);
            let ranges: Vec<(i64, i64)> = (0..n).map(|k| lat.x_range(level, k, z.x[k] - r, z.x[k] + r)).collect();
            let (klo, khi) = lat.t_range(level, (z.t - 4.0 * h).max(t0 + h), z.t - 2.0 * h);
            if klo > khi {
                continue;
            }
            for_each_index(&ranges, &mut spatial, |sp| {
                let x: Vec<f64> = (0..n).map(|k| lat.x(level, k, sp[k])).collect();
                if euclid(&x, &z.x) >= r {
                    return;
                }
                let end = g.level_start[level + 1];
                let mut id = g.column_start(level, sp, klo as i32);
                while id < end {
                    let row = g.row(id);
                    if row[..n] != *sp || row[n] as i64 > khi {
                        break;
                    }
                    let tq = lat.t(level, row[n]);
                    // open lagged part and cylinder inside the future slice
                    if z.t > tq + 2.0 * h && z.t < tq + 4.0 * h && tq - h >= t0 {
                        out.push(id);
                    }
                    id += 1;
                }
            });
        }
        out.sort_unstable();
        out
    }

    /// Minimum distance over nodes `Q ⊂ Ω⁺_{t0}` with `z ∈ Q⁺`.
    pub fn point_distance(&self, z: &ParabolicPoint, t0: f64) -> Result<Option<u32>> {
        let d = &self.graph.domain;
        d.metric.check_dim(z.x.len())?;
        if !(z.t > t0 && d.contains_point_raw(&z.x, z.t)) {
            return Err(Error::invalid("point_distance: point is outside the future slice"));
        }
        Ok(self.point_candidates(z, t0).into_iter().filter_map(|v| self.tree.distance(v)).min())
    }
}
