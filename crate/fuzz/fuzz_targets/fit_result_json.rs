#![no_main]

use ghb_core::io::read_fit_result;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = read_fit_result(text);
    }
});
