#![no_main]

use ghb_core::io::{parse_grid, MAX_GRID_POINTS};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(spec) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(grid) = parse_grid(spec) {
        assert!(!grid.is_empty() && grid.len() <= MAX_GRID_POINTS);
        assert!(grid.iter().all(|v| v.is_finite()));
    }
});
