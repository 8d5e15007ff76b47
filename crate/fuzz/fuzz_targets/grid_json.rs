#![no_main]

use fitgeom::chain::{ChainParams, GridSpec};
use fitgeom::geometry::MetricParams;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(g) = serde_json::from_slice::<GridSpec>(data) else { return };
    let n = g.window.dim();
    if let Ok(m) = MetricParams::new(n, 2.0) {
        if g.validate(&m, &ChainParams::default()).is_ok() {
            let _ = g.refined();
        }
    }
});
