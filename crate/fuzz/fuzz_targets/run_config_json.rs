#![no_main]

use ghb_cli::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = RunConfig::from_json(text) {
        let _ = cfg.validate();
        let again = RunConfig::from_json(&cfg.to_json()).expect("serialized config parses");
        assert_eq!(again, cfg);
    }
});
