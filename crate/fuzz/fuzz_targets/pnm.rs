#![no_main]

use libfuzzer_sys::fuzz_target;
use patchface::patch::{decode_pnm, encode_pgm16, encode_pgm8, encode_ppm, Pnm};

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = decode_pnm(data) {
        let bytes = match &img {
            Pnm::Gray8(r) => encode_pgm8(r),
            Pnm::Gray16(r) => encode_pgm16(r),
            Pnm::Rgb8(r) => encode_ppm(r),
        };
        assert_eq!(decode_pnm(&bytes).expect("re-encoded image decodes"), img);
    }
});
