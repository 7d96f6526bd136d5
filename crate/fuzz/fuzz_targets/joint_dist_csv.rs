#![no_main]

use ghb_core::inference::klyshko_calibrate;
use ghb_core::io::{read_joint_distributions, write_joint_distributions};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(dists) = read_joint_distributions(data) else {
        return;
    };
    let mut buf = Vec::new();
    write_joint_distributions(&mut buf, &dists).expect("parsed distributions write");
    let again = read_joint_distributions(buf.as_slice()).expect("written distributions parse");
    assert_eq!(again.len(), dists.len());
    if dists.iter().map(|d| d.cells.len()).sum::<usize>() <= 64 {
        let _ = klyshko_calibrate(&dists);
    }
});
