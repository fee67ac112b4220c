//! Regenerates the checked-in fuzz corpus seeds.
//!
//! `cargo run -p patchface --example fuzz_seeds -- fuzz/corpus`

use std::fs;
use std::path::{Path, PathBuf};

use patchface::harness::{write_synthetic, Config, SyntheticSpec};
use patchface::nn::{serialize_params, NetworkParams};
use patchface::patch::{encode_patch_dump, encode_pgm16, encode_pgm8, encode_ppm, Keypoint, Modality, Patch, Raster};
use patchface::sparse::{Extractor, GalleryBuilder};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn put(root: &Path, target: &str, name: &str, bytes: impl AsRef<[u8]>) {
    let dir = root.join(target);
    fs::create_dir_all(&dir).unwrap();
    fs::write(dir.join(name), bytes).unwrap();
}

fn main() {
    let root: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "fuzz/corpus".into()).into();

    let gray = Raster::new(3, 2, vec![0u8, 64, 128, 192, 255, 7]).unwrap();
    put(&root, "pnm", "gray8.pgm", encode_pgm8(&gray));
    put(&root, "pnm", "gray16.pgm", encode_pgm16(&Raster::new(2, 2, vec![0u16, 700, 65535, 1]).unwrap()));
    put(&root, "pnm", "rgb.ppm", encode_ppm(&Raster::new(2, 1, vec![[255u8, 0, 0], [0, 128, 255]]).unwrap()));
    put(&root, "pnm", "comment.pgm", b"P5\n# made by hand\n2 1\n255\n\x10\x20".as_slice());

    let params = NetworkParams::<f32>::init(&mut ChaCha8Rng::seed_from_u64(0));
    put(&root, "model", "init.pfnn", serialize_params(&params));

    let mut builder = GalleryBuilder::new(Extractor::Lbp);
    for (i, person) in ["p00", "p01"].iter().enumerate() {
        for m in Modality::ALL {
            let emb: Vec<f32> = (0..Extractor::Lbp.dim()).map(|k| ((k + i) % 5) as f32 + 0.5).collect();
            builder.add(m, person, "s00", emb).unwrap();
        }
    }
    put(&root, "gallery", "two_people.pfgl", builder.build().unwrap().to_bytes());

    put(&root, "config", "default.txt", Config::default().to_text());
    put(&root, "config", "small.txt", "# quick run\nseed = 3\nidentities = 3\nepochs = 2\npool_size = auto\nfilter_sizes = 9, 15, 21\n");

    let tmp = std::env::temp_dir().join("patchface_fuzz_seed_manifest");
    let spec = SyntheticSpec { identities: 2, samples_per_identity: 2, gallery_per_identity: 1, ..SyntheticSpec::default() };
    let manifest = write_synthetic(&spec, 1, &tmp).unwrap();
    put(&root, "manifest", "synthetic.txt", fs::read(&manifest).unwrap());
    fs::remove_dir_all(&tmp).unwrap();

    let patch = |modality, x: f32| Patch {
        data: (0..400).map(|i| (i as f32 * 0.01 - 2.0) * x).collect(),
        modality,
        keypoint: Keypoint { x: 40.0 * x, y: 30.5, scale: 1.2, response: 0.01 },
        label: None,
    };
    put(&root, "patch_dump", "pair.bin", encode_patch_dump(&[patch(Modality::Image, 1.0), patch(Modality::Depth, 1.5)]));
}
