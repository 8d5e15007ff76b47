use fitgeom::chain::{ChainParams, CylinderGraph, GridSpec};
use fitgeom::domain::{builtin_example, AxisBox, BuiltinParams, DomainSpec, BUILTIN_IDS};
use fitgeom::geometry::{par_distance, MetricParams, ParabolicPoint, TimeBox};
use fitgeom::{Error, Result};

use crate::config::Common;

pub fn numbers(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            let v = v.trim();
            v.parse::<f64>().map_err(|_| Error::InvalidInput(format!("'{v}' is not a number")))
        })
        .collect()
}

pub fn builtin_params(c: &Common) -> BuiltinParams {
    let d = BuiltinParams::default();
    BuiltinParams { n: c.n.unwrap_or(d.n), p: c.p.unwrap_or(d.p), m: c.decay.unwrap_or(d.m) }
}

pub fn domain(c: &Common) -> Result<DomainSpec> {
    if BUILTIN_IDS.contains(&c.domain.as_str()) {
        return builtin_example(&c.domain, &builtin_params(c));
    }
    let text = std::fs::read_to_string(&c.domain)
        .map_err(|e| Error::InvalidInput(format!("cannot read domain file '{}': {e}", c.domain)))?;
    let d = DomainSpec::from_json(&text)?;
    if c.n.is_some_and(|n| n != d.metric.n) || c.p.is_some_and(|p| p != d.metric.p) {
        return Err(Error::InvalidInput("--n/--p disagree with the metric in the domain file".into()));
    }
    Ok(d)
}

/// Metric for domain-free commands: the builtin parameters, or the domain file's metric.
pub fn metric(c: &Common) -> Result<MetricParams> {
    if BUILTIN_IDS.contains(&c.domain.as_str()) {
        let b = builtin_params(c);
        MetricParams::new(b.n, b.p)
    } else {
        Ok(domain(c)?.metric)
    }
}

pub fn chain_params(c: &Common) -> Result<ChainParams> {
    ChainParams::new(c.a1, c.a2, c.a3)
}

pub fn axis_box(s: &str, n: usize) -> Result<AxisBox> {
    let v = numbers(s)?;
    if v.len() != 2 * (n + 1) {
        return Err(Error::InvalidInput(format!("box needs {} numbers (lo then hi), got {}", 2 * (n + 1), v.len())));
    }
    AxisBox::new(v[..n + 1].to_vec(), v[n + 1..].to_vec())
}

pub fn point(s: &str, n: usize) -> Result<ParabolicPoint> {
    let v = numbers(s)?;
    if v.len() != n + 1 {
        return Err(Error::DimensionMismatch { expected: n + 1, got: v.len() });
    }
    Ok(ParabolicPoint::new(v[..n].to_vec(), v[n]))
}

/// Explicit window, else the domain's bounding box.
pub fn window(c: &Common, d: &DomainSpec) -> Result<AxisBox> {
    match &c.window {
        Some(s) => axis_box(s, d.metric.n),
        None => d
            .bounding_window()
            .ok_or_else(|| Error::InvalidInput("domain is unbounded; pass --window".into())),
    }
}

pub fn t0(c: &Common, w: &AxisBox) -> f64 {
    let n = w.lo.len() - 1;
    c.t0.unwrap_or(0.5 * (w.lo[n] + w.hi[n]))
}

pub fn grid(c: &Common, d: &DomainSpec) -> Result<GridSpec> {
    if let Some(path) = &c.grid {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read grid file '{}': {e}", path.display())))?;
        return Ok(serde_json::from_str(&text)?);
    }
    let w = window(c, d)?;
    let n = d.metric.n;
    let p = d.metric.p;
    let center: Vec<f64> = (0..n).map(|k| 0.5 * (w.lo[k] + w.hi[k])).collect();
    let half = (0..n).map(|k| 0.5 * (w.hi[k] - w.lo[k])).fold(0.0, f64::max);
    let span = w.hi[n] - w.lo[n];
    let scale = half.min(span.powf(1.0 / p)).min(1.0);
    let mut g = GridSpec::new(
        TimeBox::new(center, half, w.lo[n], w.hi[n])?,
        c.r_max.unwrap_or(0.12 * scale),
        c.levels,
        c.sigma.unwrap_or(2f64.powf(1.0 / (n as f64 + p))),
        c.beta,
    );
    g.grading = c.grading;
    g.max_nodes = c.max_nodes;
    Ok(g)
}

pub fn build_graph(c: &Common, d: &DomainSpec) -> Result<CylinderGraph> {
    CylinderGraph::build(d, &chain_params(c)?, &grid(c, d)?)
}

/// The central cylinder in the past slice at `t0`.
pub fn central(c: &Common, g: &CylinderGraph, t0: f64) -> Result<usize> {
    let n = g.metric().n;
    if c.central == "auto" {
        let region = c.central_region.as_deref().map(|s| axis_box(s, n)).transpose()?;
        return g
            .auto_central(t0, region.as_ref())
            .ok_or_else(|| Error::Resolution(format!("no grid cylinder lies in the past slice at t0 = {t0}")));
    }
    let v = numbers(&c.central)?;
    if v.len() != n + 2 {
        return Err(Error::InvalidInput(format!("--central needs `auto` or {} numbers (x, t, r)", n + 2)));
    }
    let z = ParabolicPoint::new(v[..n].to_vec(), v[n]);
    let r = v[n + 1];
    let m = *g.metric();
    let mut best: Option<(f64, usize)> = None;
    for id in g.past_nodes(t0) {
        if (g.radius_of(id) / r - 1.0).abs() > 1e-6 {
            continue;
        }
        let w = ParabolicPoint::new(g.center_space(id), g.center_time(id));
        let dist = par_distance(&z, &w, &m)?;
        if best.is_none_or(|(b, _)| dist < b) {
            best = Some((dist, id));
        }
    }
    match best {
        Some((dist, id)) if dist <= r => Ok(id),
        _ => Err(Error::InvalidInput(format!("no past grid node of radius {r} near the requested central cylinder"))),
    }
}
