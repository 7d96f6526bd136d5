#![no_main]

use ghb_core::io::{read_rate_table, write_rate_table};
use ghb_core::rates::Provenance;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(table) = read_rate_table(data, Provenance::Measured) else {
        return;
    };
    let mut buf = Vec::new();
    write_rate_table(&mut buf, &table).expect("parsed table writes");
    let again = read_rate_table(buf.as_slice(), Provenance::Measured).expect("written table parses");
    assert_eq!(again.points.len(), table.points.len());
});
