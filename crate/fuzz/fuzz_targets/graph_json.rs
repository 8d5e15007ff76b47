#![no_main]

use fitgeom::chain::ExportedGraph;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(g) = ExportedGraph::from_json(s) {
        let _ = g.verify_edges();
    }
});
