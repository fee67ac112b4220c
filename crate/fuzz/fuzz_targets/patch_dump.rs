#![no_main]

use libfuzzer_sys::fuzz_target;
use patchface::patch::{decode_patch_dump, encode_patch_dump};

fuzz_target!(|data: &[u8]| {
    if let Ok(patches) = decode_patch_dump(data) {
        assert_eq!(encode_patch_dump(&patches), data);
    }
});
