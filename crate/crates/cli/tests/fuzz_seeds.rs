use std::path::PathBuf;

use fitgeom::chain::{ChainParams, ExportedGraph, GridSpec, Witness};
use fitgeom::domain::DomainSpec;
use fitgeom::expr::Expr;
use fitgeom::geometry::MetricParams;

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(PathBuf, String)> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .filter(|p| !p.file_name().unwrap().to_string_lossy().starts_with('.'))
        .map(|p| {
            let s = std::fs::read_to_string(&p).unwrap();
            (p, s)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn domain_seeds_parse_and_round_trip() {
    for (p, s) in seeds("domain_json") {
        let d = DomainSpec::from_json(&s).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(DomainSpec::from_json(&d.to_json()).unwrap(), d);
    }
}

#[test]
fn graph_seeds_have_only_valid_edges() {
    for (p, s) in seeds("graph_json") {
        let g = ExportedGraph::from_json(&s).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert!(!g.edges.is_empty());
        assert_eq!(g.verify_edges().unwrap(), 0, "{}", p.display());
    }
}

#[test]
fn witness_seeds_replay() {
    for (p, s) in seeds("witness_json") {
        let w = Witness::from_json(&s).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert!(w.replay().unwrap(), "{}", p.display());
    }
}

#[test]
fn grid_seeds_validate() {
    for (p, s) in seeds("grid_json") {
        let g: GridSpec = serde_json::from_str(&s).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        let m = MetricParams::new(g.window.dim(), 2.0).unwrap();
        g.validate(&m, &ChainParams::default()).unwrap();
    }
}

#[test]
fn run_config_seeds_parse() {
    for (p, s) in seeds("run_config") {
        let c = fitgeom_cli::parse_config(&s).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        let again = fitgeom_cli::parse_config(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(again, c);
    }
}

#[test]
fn expression_seeds_parse() {
    for (p, s) in seeds("expr_parse") {
        let e = Expr::parse(&s).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert!(e.eval(&vec![0.5; e.spatial_arity().max(2)], 0.25).is_finite() || s.contains("log"));
    }
}
