#![no_main]

use libfuzzer_sys::fuzz_target;
use symtensor::io::{decode_bcss, encode_bcss};

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = decode_bcss(data) {
        assert_eq!(encode_bcss(&t), data);
        let _ = t.decompress();
    }
});
