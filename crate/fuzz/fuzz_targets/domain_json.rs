#![no_main]

use fitgeom::domain::DomainSpec;
use fitgeom::geometry::ParabolicPoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let Ok(d) = DomainSpec::from_json(s) else { return };
    let back = DomainSpec::from_json(&d.to_json()).expect("re-parse");
    assert_eq!(back, d);
    let z = ParabolicPoint::new(vec![0.25; d.metric.n], 0.5);
    if let Ok(true) = d.contains_point(&z) {
        let _ = d.distance_to_complement(&z);
    }
});
