#![no_main]

use ghb_core::inference::phase_from_coupler;
use ghb_core::io::read_coupler_samples;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(samples) = read_coupler_samples(data) else {
        return;
    };
    if let Ok(points) = phase_from_coupler(&samples) {
        for phi in points.iter().filter_map(|p| p.phi) {
            assert!((0.0..=std::f64::consts::PI).contains(&phi));
        }
    }
});
