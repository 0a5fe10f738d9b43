#![no_main]

use enzyme_net::io::{network_spec_to_json, parse_network_spec};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(spec) = parse_network_spec(text) {
        // anything accepted must survive a round trip unchanged
        let again = parse_network_spec(&network_spec_to_json(&spec)).expect("re-parse");
        assert_eq!(spec, again);
    }
});
