//! Synthetic registered RGB-D faces with per-identity texture and relief.

use std::f32::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::manifest::{DatasetManifest, ManifestEntry, Split};
use crate::error::{Error, Result};
use crate::patch::{encode_pgm16, encode_pgm8, Raster, FACE_SIZE};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub identities: usize,
    pub samples_per_identity: usize,
    /// Leading samples of each identity go to the gallery, the rest are
    /// probes.
    pub gallery_per_identity: usize,
    pub size: usize,
    /// Additive Gaussian noise on intensities.
    pub noise_sigma: f32,
    /// Uniform brightness offset range, +/-.
    pub brightness_jitter: f32,
    /// Integer translation range in pixels, +/-.
    pub max_shift: i32,
    pub depth_noise_sigma: f32,
    /// Fraction of depth pixels dropped to 0.
    pub hole_fraction: f32,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            identities: 10,
            samples_per_identity: 20,
            gallery_per_identity: 14,
            size: FACE_SIZE,
            noise_sigma: 4.0,
            brightness_jitter: 10.0,
            max_shift: 3,
            depth_noise_sigma: 1.0,
            hole_fraction: 0.002,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.identities < 2 {
            return Err(Error::invalid("synthetic data needs at least 2 identities"));
        }
        if self.samples_per_identity < 2 {
            return Err(Error::invalid("synthetic data needs at least 2 samples per identity"));
        }
        if self.gallery_per_identity > self.samples_per_identity {
            return Err(Error::invalid("more gallery samples than samples per identity"));
        }
        if self.size < 32 {
            return Err(Error::invalid("synthetic faces must be at least 32 pixels wide"));
        }
        if !(0.0..=1.0).contains(&self.hole_fraction) {
            return Err(Error::invalid("hole fraction must lie in [0, 1]"));
        }
        if self.max_shift < 0 || !(self.noise_sigma >= 0.0) || !(self.depth_noise_sigma >= 0.0) || !(self.brightness_jitter >= 0.0) {
            return Err(Error::invalid("nuisance magnitudes must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Wave {
    freq: f32,
    angle: f32,
    phase: f32,
    amp: f32,
}

#[derive(Debug, Clone)]
struct Blob {
    x: f32,
    y: f32,
    sigma: f32,
    amp: f32,
}

#[derive(Debug, Clone)]
struct Identity {
    waves: Vec<Wave>,
    ripples: Vec<Wave>,
    blobs: Vec<Blob>,
    bumps: Vec<Blob>,
}

fn random_waves(rng: &mut ChaCha8Rng, n: usize, amp: (f32, f32)) -> Vec<Wave> {
    (0..n)
        .map(|_| Wave {
            freq: rng.random_range(0.04..0.14),
            angle: rng.random_range(0.0..PI),
            phase: rng.random_range(0.0..2.0 * PI),
            amp: rng.random_range(amp.0..amp.1),
        })
        .collect()
}

fn wave_sum(waves: &[Wave], u: f32, v: f32) -> f32 {
    waves
        .iter()
        .map(|w| w.amp * (2.0 * PI * w.freq * (u * w.angle.cos() + v * w.angle.sin()) + w.phase).sin())
        .sum()
}

fn signed(rng: &mut ChaCha8Rng, range: (f32, f32)) -> f32 {
    rng.random_range(range.0..range.1) * if rng.random_bool(0.5) { 1.0 } else { -1.0 }
}

fn blobs_at(rng: &mut ChaCha8Rng, n: usize, size: f32, sigma: (f32, f32), amp: (f32, f32)) -> Vec<Blob> {
    (0..n)
        .map(|_| Blob {
            x: rng.random_range(0.15 * size..0.85 * size),
            y: rng.random_range(0.15 * size..0.85 * size),
            sigma: rng.random_range(sigma.0..sigma.1),
            amp: signed(rng, amp),
        })
        .collect()
}

fn identity(rng: &mut ChaCha8Rng, size: usize) -> Identity {
    let s = size as f32;
    let waves = random_waves(rng, 3, (12.0, 28.0));
    let ripples = random_waves(rng, 2, (3.0, 8.0));
    let blobs = blobs_at(rng, 8, s, (2.0, 4.5), (40.0, 80.0));
    // relief follows the visible features, plus a few bumps of its own
    let mut bumps: Vec<Blob> = blobs
        .iter()
        .map(|b| Blob { sigma: rng.random_range(3.0..6.0), amp: signed(rng, (3.0, 10.0)), ..b.clone() })
        .collect();
    bumps.extend(blobs_at(rng, 4, s, (3.0, 7.0), (3.0, 10.0)));
    Identity { waves, ripples, blobs, bumps }
}

fn gauss(b: &Blob, u: f32, v: f32) -> f32 {
    let d2 = (u - b.x).powi(2) + (v - b.y).powi(2);
    b.amp * (-d2 / (2.0 * b.sigma * b.sigma)).exp()
}

/// One generated face.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFace {
    pub person: String,
    pub sample: String,
    pub tag: &'static str,
    pub split: Split,
    pub image: Raster<u8>,
    pub depth: Raster<u16>,
}

/// Sample tags cycle through these; each adds its own nuisance on top of
/// the shared noise, brightness and translation.
const SAMPLE_TAGS: [&str; 3] = ["frontal", "illumination", "expression"];

pub fn person_label(i: usize) -> String {
    format!("p{i:02}")
}

pub fn sample_label(j: usize) -> String {
    format!("s{j:02}")
}

/// Deterministic in `seed`: identities are drawn first, then samples in
/// identity-major order.
pub fn generate_faces(spec: &SyntheticSpec, seed: u64) -> Result<Vec<SyntheticFace>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<Identity> = (0..spec.identities).map(|_| identity(&mut rng, spec.size)).collect();
    let noise = Normal::new(0.0f32, spec.noise_sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let depth_noise = Normal::new(0.0f32, spec.depth_noise_sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let size = spec.size;
    let centre = size as f32 / 2.0;
    let dome_radius = 0.47 * size as f32;
    let mut faces = Vec::with_capacity(spec.identities * spec.samples_per_identity);
    for (i, id) in ids.iter().enumerate() {
        for j in 0..spec.samples_per_identity {
            let tag = SAMPLE_TAGS[j % SAMPLE_TAGS.len()];
            let dx = rng.random_range(-spec.max_shift..=spec.max_shift) as f32;
            let dy = rng.random_range(-spec.max_shift..=spec.max_shift) as f32;
            let brightness = if spec.brightness_jitter > 0.0 {
                rng.random_range(-spec.brightness_jitter..=spec.brightness_jitter)
            } else {
                0.0
            };
            let (gx, gy) = if tag == "illumination" {
                (rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2))
            } else {
                (0.0, 0.0)
            };
            let jitter = |rng: &mut ChaCha8Rng, list: &[Blob]| -> Vec<Blob> {
                list.iter()
                    .map(|b| {
                        let mut b = b.clone();
                        if tag == "expression" {
                            b.x += rng.random_range(-1.5..1.5);
                            b.y += rng.random_range(-1.5..1.5);
                        }
                        b
                    })
                    .collect()
            };
            let sample_blobs = jitter(&mut rng, &id.blobs);
            let sample_bumps = jitter(&mut rng, &id.bumps);
            let image = Raster::from_fn(size, size, |x, y| {
                let (u, v) = (x as f32 - dx, y as f32 - dy);
                let mut val = 128.0 + brightness + gx * (x as f32 - centre) + gy * (y as f32 - centre);
                val += wave_sum(&id.waves, u, v);
                val += sample_blobs.iter().map(|b| gauss(b, u, v)).sum::<f32>();
                val += noise.sample(&mut rng);
                val.round().clamp(0.0, 255.0) as u8
            });
            let depth = Raster::from_fn(size, size, |x, y| {
                if spec.hole_fraction > 0.0 && rng.random_bool(f64::from(spec.hole_fraction)) {
                    return 0;
                }
                let (u, v) = (x as f32 - dx, y as f32 - dy);
                let r2 = ((u - centre).powi(2) + (v - centre).powi(2)) / (dome_radius * dome_radius);
                let mut mm = 700.0 - 50.0 * (1.0 - r2).max(0.0);
                mm -= sample_bumps.iter().map(|b| gauss(b, u, v)).sum::<f32>() + wave_sum(&id.ripples, u, v);
                mm += depth_noise.sample(&mut rng);
                mm.round().clamp(1.0, 65535.0) as u16
            });
            faces.push(SyntheticFace {
                person: person_label(i),
                sample: sample_label(j),
                tag,
                split: if j < spec.gallery_per_identity { Split::Gallery } else { Split::Probe },
                image,
                depth,
            });
        }
    }
    Ok(faces)
}

pub const MANIFEST_NAME: &str = "manifest.txt";

/// Writes `root/<person>/<sample>.img.pgm`, `.dep.pgm` and
/// `root/manifest.txt`; returns the manifest path.
pub fn write_synthetic(spec: &SyntheticSpec, seed: u64, root: &Path) -> Result<PathBuf> {
    let faces = generate_faces(spec, seed)?;
    let mut entries = Vec::with_capacity(faces.len());
    for f in &faces {
        let dir = root.join(&f.person);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let image = PathBuf::from(&f.person).join(format!("{}.img.pgm", f.sample));
        let depth = PathBuf::from(&f.person).join(format!("{}.dep.pgm", f.sample));
        let ip = root.join(&image);
        fs::write(&ip, encode_pgm8(&f.image)).map_err(|e| Error::io(&ip, e))?;
        let dp = root.join(&depth);
        fs::write(&dp, encode_pgm16(&f.depth)).map_err(|e| Error::io(&dp, e))?;
        entries.push(ManifestEntry {
            person: f.person.clone(),
            sample: f.sample.clone(),
            image,
            depth,
            tag: f.tag.to_owned(),
            split: f.split,
            bbox: None,
        });
    }
    let manifest = DatasetManifest { root: root.to_path_buf(), entries };
    let path = root.join(MANIFEST_NAME);
    fs::write(&path, manifest.to_text()).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::manifest::load_dataset;

    fn small() -> SyntheticSpec {
        SyntheticSpec { identities: 2, samples_per_identity: 2, gallery_per_identity: 1, ..Default::default() }
    }

    #[test]
    fn writes_expected_files() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_synthetic(&small(), 1, dir.path()).unwrap();
        let count = |suffix: &str| {
            walk(dir.path()).iter().filter(|p| p.to_string_lossy().ends_with(suffix)).count()
        };
        assert_eq!(count(".img.pgm"), 4);
        assert_eq!(count(".dep.pgm"), 4);
        let ds = load_dataset(&manifest).unwrap();
        assert_eq!(ds.samples.len(), 4);
        assert_eq!(ds.indices(Split::Probe), vec![1, 3]);
    }

    fn walk(p: &Path) -> Vec<PathBuf> {
        let mut out = Vec::new();
        for e in fs::read_dir(p).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                out.extend(walk(&path));
            } else {
                out.push(path);
            }
        }
        out
    }

    #[test]
    fn same_seed_same_bytes() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        write_synthetic(&small(), 9, a.path()).unwrap();
        write_synthetic(&small(), 9, b.path()).unwrap();
        let files = walk(a.path());
        assert_eq!(files.len(), 9);
        for f in files {
            let rel = f.strip_prefix(a.path()).unwrap();
            assert_eq!(fs::read(&f).unwrap(), fs::read(b.path().join(rel)).unwrap(), "{}", rel.display());
        }
    }

    #[test]
    fn raw_pixel_nearest_neighbour_beats_chance() {
        let spec = SyntheticSpec { identities: 10, samples_per_identity: 4, gallery_per_identity: 2, ..Default::default() };
        let faces = generate_faces(&spec, 42).unwrap();
        let (gallery, probes): (Vec<_>, Vec<_>) = faces.iter().partition(|f| f.split == Split::Gallery);
        let dist = |a: &Raster<u8>, b: &Raster<u8>| -> f64 {
            a.data().iter().zip(b.data()).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum()
        };
        let correct = probes
            .iter()
            .filter(|p| {
                let best = gallery.iter().min_by(|a, b| dist(&a.image, &p.image).total_cmp(&dist(&b.image, &p.image))).unwrap();
                best.person == p.person
            })
            .count();
        assert!(correct as f64 / probes.len() as f64 > 0.1, "{correct}/{}", probes.len());
    }

    #[test]
    fn rejects_degenerate_specs() {
        assert!(generate_faces(&SyntheticSpec { identities: 1, ..Default::default() }, 0).is_err());
        assert!(generate_faces(&SyntheticSpec { samples_per_identity: 1, gallery_per_identity: 1, ..Default::default() }, 0).is_err());
    }
}
