#![no_main]

use garding::io::{export_report, import_report};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(doc) = import_report(text) {
        let out = export_report(&doc).expect("imported report failed to export");
        let back = import_report(&out).expect("exported report failed to import");
        assert_eq!(export_report(&back).unwrap(), out);
    }
});
