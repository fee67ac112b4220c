#![no_main]

use libfuzzer_sys::fuzz_target;
use patchface::nn::{deserialize_params, serialize_params};

fuzz_target!(|data: &[u8]| {
    if let Ok(params) = deserialize_params(data) {
        let bytes = serialize_params(&params);
        let again = deserialize_params(&bytes).expect("re-serialized model loads");
        assert_eq!(serialize_params(&again), bytes);
    }
});
