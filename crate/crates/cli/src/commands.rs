use fitgeom::analysis::{
    almost_bounded_check, connectivity_sweep, freespace_grid, freespace_law_check, freespace_targets, holder_fit, holder_fit_two_level, layer_measures,
    BoundedConfig, FreeSpaceReport, HolderFitReport, LayerConfig, ShellSampling,
};
use fitgeom::chain::{
    fit_distance, is_fit_link, random_chain, CountingParams, CylinderGraph, DistanceField, ExportedGraph, Witness,
};
use fitgeom::domain::{builtin_example, free_space, AxisBox, DomainSpec, SlicedDomain};
use fitgeom::expr::Expr;
use fitgeom::geometry::{box_ops, lagged_part, ParabolicCylinder, ParabolicPoint, TimeSign, LINK_LAG};
use fitgeom::oracle::{compare_with_search, random_node_set, ExplicitNodeSet, MAX_LEN};
use fitgeom::pbmo::{
    exp_integral_on, exp_stability, levelset_curve_on, levelset_log_slope, sample_field, seminorm_comparability, telescoping_check,
    CountingField, CylinderSampler, FieldFunction, Quadrature, SeminormParams,
};
use fitgeom::sampling::StratifiedSampler;
use fitgeom::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::*;
use crate::output::{num, opt, Artifacts, Table};
use crate::setup::{self, numbers};

pub fn run(cfg: &RunConfig) -> Result<Artifacts> {
    let c = &cfg.common;
    match &cfg.command {
        Command::LinkCheck(a) => link_check(c, a),
        Command::FitDistance(a) => fit_distance_cmd(c, a),
        Command::Connectivity(a) => connectivity(c, a),
        Command::HolderFit(a) => holder(c, a),
        Command::Layers(a) => layers(c, a),
        Command::AlmostBounded(a) => bounded(c, a),
        Command::FreespaceLaw(a) => freespace(c, a),
        Command::PbmoNorm(a) => pbmo(c, a),
        Command::Expint(a) => expint(c, a),
        Command::Levelsets(a) => levelsets(c, a),
        Command::Telescope(a) => telescope(c, a),
        Command::Examples(a) => examples(c, a),
        Command::OracleVerify(a) => oracle(c, a),
    }
}

fn cylinder(s: &str, n: usize) -> Result<ParabolicCylinder> {
    let v = numbers(s)?;
    if v.len() != n + 2 {
        return Err(Error::InvalidInput(format!("cylinder needs {} numbers (x, t, r), got {}", n + 2, v.len())));
    }
    ParabolicCylinder::new(ParabolicPoint::new(v[..n].to_vec(), v[n]), v[n + 1])
}

fn point_cells(z: &ParabolicPoint) -> Vec<String> {
    z.x.iter().map(|&v| num(v)).chain([num(z.t)]).collect()
}

fn point_header(n: usize) -> Vec<String> {
    (0..n).map(|k| format!("x{k}")).chain(["t".to_string()]).collect()
}

fn future_slice(c: &Common, d: &DomainSpec) -> Result<(SlicedDomain, AxisBox)> {
    let w = setup::window(c, d)?;
    let t0 = setup::t0(c, &w);
    let slice = SlicedDomain::future(d.clone(), t0)?;
    let mut sw = w;
    let n = d.metric.n;
    sw.lo[n] = sw.lo[n].max(t0);
    if sw.lo[n] >= sw.hi[n] {
        return Err(Error::InvalidInput(format!("t0 = {t0} leaves no room in the sampling window")));
    }
    Ok((slice, sw))
}

fn link_check(c: &Common, a: &LinkCheckArgs) -> Result<Artifacts> {
    let m = setup::metric(c)?;
    let params = setup::chain_params(c)?;
    let p = cylinder(&a.from, m.n)?;
    let q = cylinder(&a.to, m.n)?;
    let mut table = Table::new(["order", "link", "volume_ratio", "overlap", "union", "required"]);
    let mut result = serde_json::Map::new();
    for (name, u, v) in [("forward", &p, &q), ("reverse", &q, &p)] {
        let link = is_fit_link(u, v, &params, &m)?;
        let ratio = v.volume(&m) / u.volume(&m);
        let overlap =
            box_ops(&lagged_part(u, TimeSign::Plus, LINK_LAG, &m)?, &lagged_part(v, TimeSign::Minus, LINK_LAG, &m)?)?.intersection_volume;
        let union = box_ops(&u.as_box(&m), &v.as_box(&m))?.union_volume;
        let required = union / params.a2;
        table.push(vec![name.into(), link.to_string(), num(ratio), num(overlap), num(union), num(required)]);
        result.insert(
            name.into(),
            json!({"link": link, "volume_ratio": ratio, "overlap": overlap, "union": union, "required_overlap": required}),
        );
    }
    result.insert("chain_params".into(), json!(params));
    Ok(Artifacts { result: Value::Object(result), table, ..Default::default() })
}

fn fit_distance_cmd(c: &Common, a: &FitDistanceArgs) -> Result<Artifacts> {
    let d = setup::domain(c)?;
    let g = setup::build_graph(c, &d)?;
    let w = setup::window(c, &d)?;
    let t0 = setup::t0(c, &w);
    let src = setup::central(c, &g, t0)?;
    let n = d.metric.n;
    let (target, nodes, distance) = if a.target == "source" || a.target.starts_with("node:") {
        let id = if a.target == "source" {
            src
        } else {
            a.target[5..].parse::<usize>().map_err(|_| Error::InvalidInput(format!("bad node id in '{}'", a.target)))?
        };
        let r = fit_distance(&g, src, id)?;
        (json!({"node": id, "cylinder": g.cylinder(id)}), r.witness, r.distance)
    } else {
        let z = setup::point(&a.target, n)?;
        let field = DistanceField::new(&g, src)?;
        let best = field
            .point_candidates(&z, t0)
            .into_iter()
            .filter_map(|v| field.node_distance(v).map(|k| (k, v)))
            .min();
        let nodes = best.map(|(_, v)| field.tree.path_to(v)).unwrap_or_default();
        (json!({"point": z, "node": best.map(|(_, v)| v)}), nodes, best.map(|(k, _)| k))
    };
    let wit = Witness {
        domain: d.clone(),
        chain_params: g.params,
        source: src,
        target: nodes.last().copied().unwrap_or(src),
        distance,
        chain: nodes.iter().map(|&v| g.cylinder(v)).collect(),
        nodes,
    };
    let replay = wit.replay()?;
    let mut table = Table::new(["step", "node", "level"].into_iter().map(String::from).chain(point_header(n)).chain(["r".into()]));
    for (i, (&v, cyl)) in wit.nodes.iter().zip(&wit.chain).enumerate() {
        let mut row = vec![i.to_string(), v.to_string(), g.level_of(v).to_string()];
        row.extend(point_cells(&cyl.center));
        row.push(num(cyl.radius));
        table.push(row);
    }
    Ok(Artifacts {
        result: json!({
            "t0": t0,
            "source": {"node": src, "cylinder": g.cylinder(src)},
            "target": target,
            "distance": distance,
            "witness_valid": replay,
        }),
        grid: Some(g.metadata()),
        table,
        graph: a.export_graph.then(|| ExportedGraph::from_graph(&g).to_json()),
        witness: Some(wit.to_json()),
        files: Vec::new(),
    })
}

fn slice_points(slice: &SlicedDomain, window: &AxisBox, budget: usize, cells: usize, seed: u64) -> Result<Vec<ParabolicPoint>> {
    let s = StratifiedSampler::with_budget(window.clone(), budget, cells, seed)?;
    let mut out = Vec::new();
    for p in s.points() {
        let z = ParabolicPoint::new(p.x, p.t);
        if slice.contains_point(&z)? {
            out.push(z);
        }
    }
    Ok(out)
}

fn connectivity(c: &Common, a: &ConnectivityArgs) -> Result<Artifacts> {
    let d = setup::domain(c)?;
    let g = setup::build_graph(c, &d)?;
    let (slice, sw) = future_slice(c, &d)?;
    let src = setup::central(c, &g, slice.t0)?;
    let field = DistanceField::new(&g, src)?;
    let pts = slice_points(&slice, &sw, c.budget, c.cells, c.seed)?;
    let region = a.region.as_deref().map(|s| setup::axis_box(s, d.metric.n)).transpose()?;
    let mut rep = connectivity_sweep(&field, &slice, &pts, region.as_ref())?;
    let mut table = Table::new(point_header(d.metric.n).into_iter().chain(["boundary_distance".into(), "distance".into()]));
    for s in &rep.samples {
        let mut row = point_cells(&s.z);
        row.push(num(s.boundary_distance));
        row.push(opt(s.distance));
        table.push(row);
    }
    let sampled = rep.samples.len();
    rep.samples.clear();
    let mut result = serde_json::to_value(&rep)?;
    result["sampled_targets"] = json!(sampled);
    result["unreachable_targets"] = json!(rep.unreachable_samples);
    Ok(Artifacts { result, grid: Some(g.metadata()), table, ..Default::default() })
}

/// The node of `g` with the same cylinder as `cyl`, if any.
fn same_node(g: &CylinderGraph, cyl: &ParabolicCylinder, t0: f64) -> Option<usize> {
    g.past_nodes(t0).find(|&id| {
        let d = g.cylinder(id);
        (d.radius / cyl.radius - 1.0).abs() < 1e-12
            && (d.center.t - cyl.center.t).abs() <= 1e-12 * (1.0 + cyl.center.t.abs())
            && d.center.x.iter().zip(&cyl.center.x).all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + b.abs()))
    })
}

fn holder_rows(table: &mut Table, level: &str, rep: &HolderFitReport) {
    for s in &rep.samples {
        let mut row = vec![level.to_string()];
        row.extend(point_cells(&s.z));
        row.extend([opt(s.shell), num(s.boundary_distance), opt(s.distance), opt(s.ratio)]);
        table.push(row);
    }
}

fn strip(rep: &HolderFitReport) -> Result<Value> {
    let mut v = serde_json::to_value(rep)?;
    v["samples"] = json!(rep.samples.len());
    Ok(v)
}

fn holder(c: &Common, a: &HolderArgs) -> Result<Artifacts> {
    let d = setup::domain(c)?;
    let g = setup::build_graph(c, &d)?;
    let (slice, _) = future_slice(c, &d)?;
    let src = setup::central(c, &g, slice.t0)?;
    let field = DistanceField::new(&g, src)?;
    let mut cfg = ShellSampling::new(a.per_shell, a.k_min, a.k_max, c.seed);
    cfg.window = c.window.as_deref().map(|s| setup::axis_box(s, d.metric.n)).transpose()?;
    let header = ["grid".to_string()]
        .into_iter()
        .chain(point_header(d.metric.n))
        .chain(["shell", "boundary_distance", "distance", "ratio"].map(String::from));
    let mut table = Table::new(header);
    if !a.two_level {
        let rep = holder_fit(&field, &slice, &cfg)?;
        holder_rows(&mut table, "coarse", &rep);
        return Ok(Artifacts { result: json!({"coarse": strip(&rep)?}), grid: Some(g.metadata()), table, ..Default::default() });
    }
    let fine_grid = g.grid.refined();
    let fg = CylinderGraph::build(&d, &g.params, &fine_grid)?;
    let fsrc = same_node(&fg, &g.cylinder(src), slice.t0)
        .ok_or_else(|| Error::Resolution("central cylinder is missing from the refined grid".into()))?;
    let ffield = DistanceField::new(&fg, fsrc)?;
    let (ra, rb) = holder_fit_two_level(&field, &ffield, &slice, &cfg)?;
    holder_rows(&mut table, "coarse", &ra);
    holder_rows(&mut table, "fine", &rb);
    Ok(Artifacts {
        result: json!({"coarse": strip(&ra)?, "fine": strip(&rb)?, "stability": ra.stability, "fine_grid": fg.metadata()}),
        grid: Some(g.metadata()),
        table,
        ..Default::default()
    })
}

fn layers(c: &Common, a: &LayersArgs) -> Result<Artifacts> {
    let d = setup::domain(c)?;
    let (slice, sw) = future_slice(c, &d)?;
    let cfg = LayerConfig { k_min: a.k_min, k_max: a.k_max, budget: c.budget, cells: c.cells, seed: c.seed, window: Some(sw) };
    let rep = layer_measures(&slice, &cfg)?;
    let mut table = Table::new(["k", "measure", "std_error", "upper_bound"]);
    for s in &rep.shells {
        table.push(vec![s.k.to_string(), num(s.measure.value), num(s.measure.std_error), opt(s.upper_bound)]);
    }
    let mut result = serde_json::to_value(&rep)?;
    result["t0"] = json!(slice.t0);
    result["total"] = json!(rep.total());
    Ok(Artifacts { result, table, ..Default::default() })
}

fn bounded(c: &Common, a: &BoundedArgs) -> Result<Artifacts> {
    let d = setup::domain(c)?;
    let n = d.metric.n;
    let (slice, sw) = future_slice(c, &d)?;
    let center = match &a.point {
        Some(s) => setup::point(s, n)?,
        None => ParabolicPoint::new((0..n).map(|k| 0.5 * (sw.lo[k] + sw.hi[k])).collect(), 0.5 * (sw.lo[n] + sw.hi[n])),
    };
    let cfg = BoundedConfig { k_min: a.k_min, k_max: a.k_max, budget: c.budget, cells: c.cells, seed: c.seed, window: Some(sw) };
    let rep = almost_bounded_check(&slice, &center, &cfg)?;
    let mut table = Table::new(["k", "samples", "max_distance"]);
    for r in &rep.rows {
        table.push(vec![r.k.to_string(), r.samples.to_string(), opt(r.max_distance)]);
    }
    let mut result = serde_json::to_value(&rep)?;
    result["t0"] = json!(slice.t0);
    Ok(Artifacts { result, table, ..Default::default() })
}

fn freespace_rows(table: &mut Table, name: &str, rep: &FreeSpaceReport) {
    for s in &rep.samples {
        table.push(vec![name.into(), num(s.offset), num(s.span), num(s.law), opt(s.distance), opt(s.ratio)]);
    }
}

fn freespace_summary(rep: &FreeSpaceReport) -> Value {
    json!({
        "r0": rep.r0, "node_count": rep.node_count, "samples": rep.samples.len(), "min_ratio": rep.min_ratio,
        "max_ratio": rep.max_ratio, "constant": rep.constant, "unreached": rep.unreached, "log_slope": rep.log_slope,
    })
}

fn freespace(c: &Common, a: &FreespaceArgs) -> Result<Artifacts> {
    let m = setup::metric(c)?;
    let params = setup::chain_params(c)?;
    let targets = freespace_targets(&m, a.r0, &a.spans, &a.offset_fractions, a.max_offset);
    let sigma = c.sigma.unwrap_or(2f64.powf(1.0 / (m.n as f64 + m.p)));
    let (grid, level) = freespace_grid(&m, a.r0, &targets, sigma, c.beta)?;
    let rep = freespace_law_check(&m, a.r0, &targets, &grid, level, &params)?;
    let mut table = Table::new(["grid", "offset", "span", "law", "distance", "ratio"]);
    freespace_rows(&mut table, "coarse", &rep);
    let mut result = json!({"coarse": freespace_summary(&rep), "grid": grid});
    if a.refine {
        let fine = grid.refined();
        let rf = freespace_law_check(&m, a.r0, &targets, &fine, level, &params)?;
        freespace_rows(&mut table, "fine", &rf);
        result["fine"] = freespace_summary(&rf);
        result["constant_non_increasing"] = json!(match (rep.constant, rf.constant) {
            (Some(x), Some(y)) => Some(y <= x),
            _ => None,
        });
    }
    Ok(Artifacts { result, table, ..Default::default() })
}

fn expression(s: &str, n: usize) -> Result<FieldFunction<'static>> {
    let e = Expr::parse(s)?;
    if e.spatial_arity() > n {
        return Err(Error::InvalidInput(format!("expression uses x{} but the domain has n = {n}", e.spatial_arity() - 1)));
    }
    Ok(FieldFunction::Expression(e))
}

fn counting_params(a: &FieldArgs) -> CountingParams {
    CountingParams { delta: a.delta, ladder: a.ladder, ..Default::default() }
}

/// Runs `body` with the field named by `a`, building the graph when the
/// field is the counting function.
fn with_field<T>(
    c: &Common,
    a: &FieldArgs,
    d: &DomainSpec,
    slice: Option<&SlicedDomain>,
    body: impl FnOnce(&FieldFunction) -> Result<T>,
) -> Result<(T, Option<Value>)> {
    if a.f != "counting" {
        return Ok((body(&expression(&a.f, d.metric.n)?)?, None));
    }
    let slice = slice.ok_or_else(|| Error::InvalidInput("the counting field needs a future slice".into()))?;
    let g = setup::build_graph(c, d)?;
    let src = setup::central(c, &g, slice.t0)?;
    let field = DistanceField::new(&g, src)?;
    let f = FieldFunction::Counting(CountingField::new(&field, slice.clone(), counting_params(a))?);
    let mut meta = g.metadata();
    meta["central"] = json!({"node": src, "cylinder": g.cylinder(src)});
    Ok((body(&f)?, Some(meta)))
}

fn pbmo(c: &Common, a: &PbmoArgs) -> Result<Artifacts> {
    let d = setup::domain(c)?;
    let n = d.metric.n;
    let params: Vec<SeminormParams> = a
        .params
        .split(';')
        .map(|s| {
            let v = numbers(s)?;
            if v.len() != 3 {
                return Err(Error::InvalidInput(format!("parameter triple '{s}' needs a,q,theta")));
            }
            SeminormParams::new(v[0], v[1], v[2])
        })
        .collect::<Result<_>>()?;
    let sampler = CylinderSampler {
        window: c.window.as_deref().map(|s| setup::axis_box(s, n)).transpose()?,
        centers_per_axis: a.centers_per_axis,
        radius_fractions: a.radius_fractions.clone(),
        random: a.random,
        seed: c.seed,
    };
    let quad = Quadrature { space_per_axis: a.space_nodes, time_nodes: a.time_nodes };
    let slice = if a.field.f == "counting" { Some(future_slice(c, &d)?.0) } else { None };
    let (cmp, grid) = with_field(c, &a.field, &d, slice.as_ref(), |f| seminorm_comparability(f, &d, &params, &sampler, &quad))?;
    let header = ["set", "a", "q", "theta"]
        .map(String::from)
        .into_iter()
        .chain(point_header(n))
        .chain(["r", "oscillation", "c", "zero"].map(String::from));
    let mut table = Table::new(header);
    let mut estimates = Vec::new();
    for (i, e) in cmp.estimates.iter().enumerate() {
        for r in &e.records {
            let mut row = vec![i.to_string(), num(e.params.a), num(e.params.q), num(e.params.theta)];
            row.extend(point_cells(&r.cylinder.center));
            row.extend([num(r.cylinder.radius), num(r.oscillation.value), num(r.oscillation.c), r.oscillation.zero.to_string()]);
            table.push(row);
        }
        estimates.push(json!({
            "params": e.params, "value": e.value, "best": e.records.get(e.best).map(|r| &r.cylinder),
            "cylinders": e.records.len(), "centers_tried": e.centers_tried, "all_zero": e.all_zero(),
        }));
    }
    Ok(Artifacts {
        result: json!({"field": a.field.f, "estimates": estimates, "ratios": cmp.ratios, "degenerate": cmp.degenerate}),
        grid,
        table,
        ..Default::default()
    })
}

fn expint(c: &Common, a: &ExpintArgs) -> Result<Artifacts> {
    let d = setup::domain(c)?;
    let (slice, sw) = future_slice(c, &d)?;
    if a.eta.is_empty() {
        return Err(Error::InvalidInput("--eta needs at least one value".into()));
    }
    let s1 = StratifiedSampler::with_budget(sw.clone(), c.budget, c.cells, c.seed)?;
    let s2 = a.compare_budget.map(|b| StratifiedSampler::with_budget(sw, b, c.cells, c.seed.wrapping_add(1))).transpose()?;
    let ((first, second), grid) = with_field(c, &a.field, &d, Some(&slice), |f| {
        let first = sample_field(f, &slice, &s1)?;
        let second = s2.as_ref().map(|s| sample_field(f, &slice, s)).transpose()?;
        Ok((first, second))
    })?;
    let ints = a.eta.iter().map(|&e| exp_integral_on(&first, e)).collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(["eta", "value", "std_error", "c_star", "value_at_c_ref", "second_at_c_ref", "second_std_error", "z", "stable"]);
    let mut result = json!({
        "t0": slice.t0, "field": a.field.f, "integrals": ints, "inside": first.inside, "missing": first.missing,
        "excluded_fraction": first.excluded_fraction(), "slice_measure": first.slice_measure(),
    });
    match &second {
        Some(b) => {
            let st = exp_stability(&first, b, &a.eta, 3.0)?;
            for r in &st.rows {
                table.push(vec![
                    num(r.eta),
                    num(r.first_inf.value),
                    num(r.first_inf.std_error),
                    num(exp_integral_on(&first, r.eta)?.c_star),
                    num(r.first.value),
                    num(r.second.value),
                    num(r.second.std_error),
                    num(r.z),
                    r.stable.to_string(),
                ]);
            }
            result["stability"] = serde_json::to_value(&st)?;
            result["eta_star"] = json!(st.eta_star);
        }
        None => {
            let c_ref = first.min_value().unwrap_or(0.0);
            for i in &ints {
                let at = first.exp_integral_at(i.eta, c_ref);
                table.push(vec![num(i.eta), num(i.value.value), num(i.value.std_error), num(i.c_star), num(at.value), String::new(), String::new(), String::new(), String::new()]);
            }
        }
    }
    Ok(Artifacts { result, grid, table, ..Default::default() })
}

fn levelsets(c: &Common, a: &LevelsetArgs) -> Result<Artifacts> {
    let d = setup::domain(c)?;
    let (slice, sw) = future_slice(c, &d)?;
    let s = StratifiedSampler::with_budget(sw, c.budget, c.cells, c.seed)?;
    let (samples, grid) = with_field(c, &a.field, &d, Some(&slice), |f| sample_field(f, &slice, &s))?;
    let level = match a.c.as_str() {
        "min" => samples.min_value().ok_or_else(|| Error::InvalidInput("no field values in the slice".into()))?,
        v => v.parse::<f64>().map_err(|_| Error::InvalidInput(format!("--c must be a number or `min`, got '{v}'")))?,
    };
    let curve = levelset_curve_on(&samples, level, &a.lambdas);
    let mut table = Table::new(["lambda", "measure", "std_error"]);
    for p in &curve {
        table.push(vec![num(p.lambda), num(p.measure.value), num(p.measure.std_error)]);
    }
    Ok(Artifacts {
        result: json!({
            "t0": slice.t0, "field": a.field.f, "c": level, "curve": curve, "log_slope": levelset_log_slope(&curve),
            "excluded_fraction": samples.excluded_fraction(), "inside": samples.inside,
        }),
        grid,
        table,
        ..Default::default()
    })
}

fn telescope(c: &Common, a: &TelescopeArgs) -> Result<Artifacts> {
    let m = setup::metric(c)?;
    let params = setup::chain_params(c)?;
    let f = expression(&a.f, m.n)?;
    let quad = Quadrature::default();
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let mut table = Table::new(["chain", "lhs", "rhs", "slack", "holds", "max_oscillation", "degenerate"]);
    let (mut violations, mut degenerate) = (0usize, 0usize);
    let mut min_slack = f64::INFINITY;
    for i in 0..a.chains {
        let start = ParabolicCylinder::new(
            ParabolicPoint::new((0..m.n).map(|_| rng.random_range(-10.0..10.0)).collect(), rng.random_range(-10.0..10.0)),
            rng.random_range(0.5..2.0),
        )?;
        let chain = random_chain(&start, a.length, &params, &m, &mut rng)?;
        let r = telescoping_check(&f, &chain, &params, &m, &quad, a.norm)?;
        violations += usize::from(!r.holds);
        degenerate += usize::from(r.degenerate);
        min_slack = min_slack.min(r.slack);
        table.push(vec![
            i.to_string(),
            num(r.lhs),
            num(r.rhs),
            num(r.slack),
            r.holds.to_string(),
            num(r.max_oscillation),
            r.degenerate.to_string(),
        ]);
    }
    Ok(Artifacts {
        result: json!({
            "f": a.f, "chains": a.chains, "length": a.length, "violations": violations, "degenerate": degenerate,
            "min_slack": if a.chains > 0 { Some(min_slack) } else { None },
        }),
        table,
        ..Default::default()
    })
}

fn examples(c: &Common, a: &ExamplesArgs) -> Result<Artifacts> {
    let d = builtin_example(&a.id, &setup::builtin_params(c))?;
    let n = d.metric.n;
    let window = match &c.window {
        Some(s) => Some(setup::axis_box(s, n)?),
        None => d.bounding_window(),
    };
    let mut table = Table::new(point_header(n).into_iter().chain(["inside".into(), "boundary_distance".into()]));
    if let Some(w) = &window {
        for p in StratifiedSampler::with_budget(w.clone(), c.budget, c.cells, c.seed)?.points() {
            let z = ParabolicPoint::new(p.x, p.t);
            let inside = d.contains_point(&z)?;
            let dist = if inside { num(d.distance_to_complement(&z)?) } else { String::new() };
            let mut row = point_cells(&z);
            row.extend([inside.to_string(), dist]);
            table.push(row);
        }
    }
    Ok(Artifacts {
        result: json!({"id": a.id, "metric": d.metric, "exact": d.is_exact(), "bounding_window": window, "domain_file": "domain.json"}),
        table,
        files: vec![("domain.json".into(), d.to_json())],
        ..Default::default()
    })
}

fn oracle(c: &Common, a: &OracleArgs) -> Result<Artifacts> {
    let m = setup::metric(c)?;
    let params = setup::chain_params(c)?;
    let d = free_space(m, 1e3)?;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let mut table = Table::new(["trial", "nodes", "pairs", "exact", "capped", "reachable", "max_distance"]);
    let (mut pairs, mut exact, mut capped) = (0usize, 0usize, 0usize);
    for i in 0..a.trials {
        let ns = ExplicitNodeSet::new(random_node_set(a.nodes, m.n, a.t_max, &mut rng), params, d.clone())?;
        let ag = compare_with_search(&ns, MAX_LEN)?;
        pairs += ag.pairs;
        exact += ag.exact;
        capped += ag.capped;
        table.push(vec![
            i.to_string(),
            ag.nodes.to_string(),
            ag.pairs.to_string(),
            ag.exact.to_string(),
            ag.capped.to_string(),
            ag.reachable.to_string(),
            ag.max_distance.to_string(),
        ]);
    }
    let pct = if pairs == 0 { 100.0 } else { 100.0 * exact as f64 / pairs as f64 };
    Ok(Artifacts {
        result: json!({
            "trials": a.trials, "nodes": a.nodes, "pairs": pairs, "exact": exact, "capped": capped,
            "agreement_percent": pct, "agreement": format!("{exact} of {pairs} pairs agree ({pct:.2}%)"),
        }),
        table,
        ..Default::default()
    })
}
