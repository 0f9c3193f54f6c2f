#![no_main]

use garding::io::{field_from_str, field_to_string};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(field) = field_from_str(text) {
        // Anything accepted must survive export and import unchanged.
        let out = field_to_string(&field);
        let back = field_from_str(&out).expect("exported field failed to import");
        assert_eq!(back, field);
        assert_eq!(field_to_string(&back), out);
    }
});
