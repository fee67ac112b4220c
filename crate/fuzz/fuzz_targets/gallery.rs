#![no_main]

use libfuzzer_sys::fuzz_target;
use patchface::sparse::GalleryIndex;

fuzz_target!(|data: &[u8]| {
    if let Ok(gallery) = GalleryIndex::from_bytes(data) {
        let bytes = gallery.to_bytes();
        assert_eq!(GalleryIndex::from_bytes(&bytes).expect("re-encoded gallery loads"), gallery);
    }
});
