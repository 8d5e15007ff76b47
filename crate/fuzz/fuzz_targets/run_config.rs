#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(c) = fitgeom_cli::parse_config(s) {
        let text = serde_json::to_string(&c).expect("serialize");
        assert_eq!(fitgeom_cli::parse_config(&text).expect("re-parse"), c);
    }
});
