#![no_main]

use enzyme_net_cli::config::{parse, AnalyzeConfig, FitConfig, ScenariosConfig, SimulateConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = parse::<AnalyzeConfig>(text);
    let _ = parse::<SimulateConfig>(text);
    let _ = parse::<ScenariosConfig>(text);
    if let Ok(c) = parse::<FitConfig>(text) {
        let _ = c.synthetic.time_grid();
    }
});
