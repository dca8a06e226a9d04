#![no_main]

use fpt_core::config::RunConfig;
use fpt_core::Error;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = RunConfig::from_json_str(text) {
        // bound the grid so resolution stays cheap
        if cfg.grid.intervals.is_some_and(|n| n > 100_000) {
            return;
        }
        let again = RunConfig::from_json_str(&cfg.to_json_string()).expect("serialized config parses");
        assert_eq!(again, cfg);
        let _ = cfg.resolve_with(|_| Err(Error::Invalid("no files while fuzzing".into())));
    }
});

