use fitgeom::chain::{
    fit_distance, is_fit_link, validate_chain, ChainParams, CylinderGraph, DistanceField, ExportedGraph, GridSpec, Witness,
};
use fitgeom::domain::{builtin_example, free_space, BuiltinParams, DomainSpec, SlicedDomain};
use fitgeom::expr::Expr;
use fitgeom::geometry::{par_distance, MetricParams, ParabolicCylinder, ParabolicPoint, TimeBox};
use proptest::prelude::*;

fn m12() -> MetricParams {
    MetricParams::new(1, 2.0).unwrap()
}

fn small_graph() -> CylinderGraph {
    let d = builtin_example("1a", &BuiltinParams::default()).unwrap();
    let grid = GridSpec::new(TimeBox::new(vec![0.0], 1.0, 0.0, 1.0).unwrap(), 0.12, 3, 2f64.powf(1.0 / 3.0), 0.5);
    CylinderGraph::build(&d, &ChainParams::default(), &grid).unwrap()
}

#[test]
fn graph_edges_go_forward_and_are_links() {
    let g = small_graph();
    let m = *g.metric();
    let edges = g.edges();
    assert!(!edges.is_empty());
    for &(u, v) in edges.iter().step_by(97) {
        let (p, q) = (g.cylinder(u as usize), g.cylinder(v as usize));
        assert!(q.center.t > p.center.t);
        assert!(is_fit_link(&p, &q, &g.params, &m).unwrap());
    }
}

#[test]
fn witnesses_replay() {
    let g = small_graph();
    let src = g.auto_central(0.3, None).unwrap();
    let field = DistanceField::new(&g, src).unwrap();
    let targets: Vec<usize> = (0..g.node_count()).filter(|&v| field.node_distance(v).is_some()).step_by(501).take(20).collect();
    assert!(!targets.is_empty());
    for t in targets {
        let r = fit_distance(&g, src, t).unwrap();
        assert_eq!(r.distance, field.node_distance(t));
        let chain: Vec<ParabolicCylinder> = r.witness.iter().map(|&id| g.cylinder(id)).collect();
        assert_eq!(chain.len() as u32, r.distance.unwrap());
        assert!(validate_chain(&chain, &g.params, &g.domain).unwrap());
        let w = Witness::from_search(&g, src, t, &r);
        let back = Witness::from_json(&w.to_json()).unwrap();
        assert!(back.replay().unwrap());
    }
}

#[test]
fn exported_graph_round_trips() {
    let d = free_space(m12(), 50.0).unwrap();
    let grid = GridSpec::new(TimeBox::new(vec![0.0], 1.0, 0.0, 4.0).unwrap(), 1.0, 2, 2f64.powf(1.0 / 3.0), 0.5);
    let g = CylinderGraph::build(&d, &ChainParams::default(), &grid).unwrap();
    let e = ExportedGraph::from_graph(&g);
    let back = ExportedGraph::from_json(&e.to_json()).unwrap();
    assert_eq!(back, e);
    assert!(!e.edges.is_empty());
    assert_eq!(back.verify_edges().unwrap(), 0);
}

#[test]
fn builtin_domains_round_trip() {
    for id in ["1a", "1b", "2", "3", "4"] {
        let d = builtin_example(id, &BuiltinParams::default()).unwrap();
        assert_eq!(DomainSpec::from_json(&d.to_json()).unwrap(), d, "{id}");
    }
}

#[test]
fn refinement_never_increases_distances() {
    let g = small_graph();
    let fine = CylinderGraph::build(&g.domain, &g.params, &g.grid.refined()).unwrap();
    let src = g.auto_central(0.3, None).unwrap();
    let fsrc = fine.find_cylinder(&g.cylinder(src)).unwrap();
    let (a, b) = (DistanceField::new(&g, src).unwrap(), DistanceField::new(&fine, fsrc).unwrap());
    let mut compared = 0;
    for v in (0..g.node_count()).step_by(37) {
        if let Some(k) = a.node_distance(v) {
            let w = fine.find_cylinder(&g.cylinder(v)).expect("refinement keeps coarse nodes");
            assert!(b.node_distance(w).is_some_and(|kf| kf <= k));
            compared += 1;
        }
    }
    assert!(compared > 10);
}

fn point() -> impl Strategy<Value = ParabolicPoint> {
    (-5.0..5.0f64, -5.0..5.0f64).prop_map(|(x, t)| ParabolicPoint::new(vec![x], t))
}

fn cylinder() -> impl Strategy<Value = ParabolicCylinder> {
    (point(), 0.2..3.0f64).prop_map(|(c, r)| ParabolicCylinder::new(c, r).unwrap())
}

proptest! {
    #[test]
    fn metric_axioms(a in point(), b in point(), c in point(), p in 1.1..4.0f64) {
        let m = MetricParams::new(1, p).unwrap();
        let ab = par_distance(&a, &b, &m).unwrap();
        prop_assert!((ab - par_distance(&b, &a, &m).unwrap()).abs() <= 1e-12 * (1.0 + ab));
        prop_assert_eq!(par_distance(&a, &a, &m).unwrap(), 0.0);
        let ac = par_distance(&a, &c, &m).unwrap();
        let cb = par_distance(&c, &b, &m).unwrap();
        prop_assert!(ab <= ac + cb + 1e-9);
    }

    #[test]
    fn links_are_one_way_and_time_windowed(p in cylinder(), q in cylinder()) {
        let m = m12();
        let a = ChainParams::default();
        if is_fit_link(&p, &q, &a, &m).unwrap() {
            prop_assert!(!is_fit_link(&q, &p, &a, &m).unwrap());
            let (hp, hq) = (p.radius.powi(2), q.radius.powi(2));
            let dt = q.center.t - p.center.t;
            prop_assert!(dt > 2.0 * (hp + hq) * (1.0 - 1e-9) && dt < 4.0 * (hp + hq) * (1.0 + 1e-9));
        }
    }

    #[test]
    fn stacked_cylinders_link(x in -5.0..5.0f64, t in -5.0..5.0f64, r in 0.1..3.0f64) {
        let m = m12();
        let p = ParabolicCylinder::new(ParabolicPoint::new(vec![x], t), r).unwrap();
        let q = ParabolicCylinder::new(ParabolicPoint::new(vec![x], t + 6.0 * r * r), r).unwrap();
        prop_assert!(is_fit_link(&p, &q, &ChainParams::new(2.0, 2.0, 2.0).unwrap(), &m).unwrap());
    }

    #[test]
    fn slice_distance_is_positive_inside(x in -0.99..0.99f64, t in 0.01..0.99f64, t0 in 0.0..0.5f64) {
        let s = SlicedDomain::future(builtin_example("1a", &BuiltinParams::default()).unwrap(), t0).unwrap();
        let z = ParabolicPoint::new(vec![x], t);
        if t > t0 {
            let d = s.boundary_distance(&z).unwrap();
            prop_assert!(d > 0.0 && d <= 1.0 - x.abs() + 1e-12);
        } else {
            prop_assert!(s.boundary_distance(&z).is_err());
        }
    }

    #[test]
    fn expressions_match_direct_evaluation(a in -3.0..3.0f64, b in 0.1..3.0f64, x in -2.0..2.0f64, t in -2.0..2.0f64) {
        let src = format!("{a} * x0 + abs(t) / {b} - exp(-x0^2)");
        let e = Expr::parse(&src).unwrap();
        let want = a * x + t.abs() / b - (-(x * x)).exp();
        prop_assert!((e.eval(&[x], t) - want).abs() <= 1e-12 * (1.0 + want.abs()));
    }
}
