#![no_main]

use libfuzzer_sys::fuzz_target;
use tadam::harness::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::parse(text) {
        // anything accepted must survive a render/parse round trip
        let again = ExperimentConfig::parse(&cfg.render()).expect("rendered config parses");
        assert_eq!(again.render(), cfg.render());
        let _ = cfg.validate();
    }
});
