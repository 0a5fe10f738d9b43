#![no_main]

use enzyme_net::io::{curves_to_csv, parse_curves};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(curves) = parse_curves(text) {
        let again = parse_curves(&curves_to_csv(&curves)).expect("re-parse");
        assert_eq!(curves, again);
    }
});
