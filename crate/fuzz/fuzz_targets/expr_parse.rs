#![no_main]

use fitgeom::expr::Expr;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if s.len() > 4096 {
        return;
    }
    if let Ok(e) = Expr::parse(s) {
        let n = e.spatial_arity();
        let _ = e.eval(&vec![0.5; n], 0.25);
    }
});
