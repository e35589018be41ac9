#![no_main]

use libfuzzer_sys::fuzz_target;
use symtensor::io::{decode_dense, encode_dense};

fuzz_target!(|data: &[u8]| {
    // accepted input must be canonical: re-encoding reproduces it
    if let Ok(t) = decode_dense(data) {
        assert_eq!(encode_dense(&t), data);
    }
});
