#![no_main]

use libfuzzer_sys::fuzz_target;
use patchface::harness::DatasetManifest;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(manifest) = DatasetManifest::parse(text, "/data") {
        let again = DatasetManifest::parse(&manifest.to_text(), "/data").expect("written manifest parses");
        assert_eq!(again.entries, manifest.entries);
    }
});
