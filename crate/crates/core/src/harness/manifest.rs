//! Dataset manifests: one whitespace-separated line per sample,
//! `person sample image depth tag split [x y width height]`, paths relative
//! to the manifest's directory. `#` starts a comment.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::patch::{decode_pnm, BoundingBox, FaceImage, FaceSample, Pnm};

pub const VARIATION_TAGS: [&str; 8] = ["frontal", "yaw30", "yaw60", "yaw90", "expression", "illumination", "occlusion", "other"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Gallery,
    Probe,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Gallery => "gallery",
            Split::Probe => "probe",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gallery" => Ok(Split::Gallery),
            "probe" => Ok(Split::Probe),
            other => Err(Error::Dataset(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub person: String,
    pub sample: String,
    pub image: PathBuf,
    pub depth: PathBuf,
    pub tag: String,
    pub split: Split,
    pub bbox: Option<BoundingBox>,
}

impl ManifestEntry {
    /// `person/sample`, unique within a manifest.
    pub fn id(&self) -> String {
        format!("{}/{}", self.person, self.sample)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

fn bad_line(line: usize, msg: impl fmt::Display) -> Error {
    Error::Dataset(format!("manifest line {line}: {msg}"))
}

impl DatasetManifest {
    pub fn parse(text: &str, root: impl Into<PathBuf>) -> Result<Self> {
        let mut entries: Vec<ManifestEntry> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 6 && f.len() != 10 {
                return Err(bad_line(n, format!("expected 6 or 10 fields, found {}", f.len())));
            }
            if !VARIATION_TAGS.contains(&f[4]) {
                return Err(bad_line(n, format!("unknown variation tag `{}`", f[4])));
            }
            let split = f[5].parse::<Split>().map_err(|e| bad_line(n, e))?;
            let bbox = if f.len() == 10 {
                let mut v = [0usize; 4];
                for (slot, s) in v.iter_mut().zip(&f[6..]) {
                    *slot = s.parse().map_err(|_| bad_line(n, format!("bad bounding box value `{s}`")))?;
                }
                Some(BoundingBox { x: v[0], y: v[1], width: v[2], height: v[3] })
            } else {
                None
            };
            let entry = ManifestEntry {
                person: f[0].to_owned(),
                sample: f[1].to_owned(),
                image: PathBuf::from(f[2]),
                depth: PathBuf::from(f[3]),
                tag: f[4].to_owned(),
                split,
                bbox,
            };
            if entries.iter().any(|e| e.person == entry.person && e.sample == entry.sample) {
                return Err(bad_line(n, format!("duplicate sample {}", entry.id())));
            }
            entries.push(entry);
        }
        Ok(DatasetManifest { root: root.into(), entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        DatasetManifest::parse(&text, root).map_err(|e| e.at_path(path))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# person sample image depth tag split [x y width height]\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{} {} {} {} {} {}",
                e.person,
                e.sample,
                e.image.display(),
                e.depth.display(),
                e.tag,
                e.split
            ));
            if let Some(b) = e.bbox {
                out.push_str(&format!(" {} {} {} {}", b.x, b.y, b.width, b.height));
            }
            out.push('\n');
        }
        out
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Decodes one entry's rasters.
pub fn load_sample(root: &Path, entry: &ManifestEntry) -> Result<FaceSample> {
    let image_path = root.join(&entry.image);
    let depth_path = root.join(&entry.depth);
    let image = match decode_pnm(&read_file(&image_path)?).map_err(|e| e.at_path(&image_path))? {
        Pnm::Gray8(r) => FaceImage::Gray(r),
        Pnm::Rgb8(r) => FaceImage::Color(r),
        Pnm::Gray16(_) => return Err(Error::Dataset("image must be 8-bit".into()).at_path(&image_path)),
    };
    let depth = match decode_pnm(&read_file(&depth_path)?).map_err(|e| e.at_path(&depth_path))? {
        Pnm::Gray16(r) => r,
        _ => return Err(Error::Dataset("depth must be a 16-bit PGM".into()).at_path(&depth_path)),
    };
    let mut sample = FaceSample::new(image, depth).map_err(|e| e.at_path(&depth_path))?;
    sample.label = Some(entry.person.clone());
    sample.tag = Some(entry.tag.clone());
    Ok(sample)
}

/// A manifest with every sample decoded, in manifest order.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub samples: Vec<FaceSample>,
}

impl Dataset {
    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.samples.len()).filter(|&i| self.manifest.entries[i].split == split).collect()
    }
}

pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let samples = manifest
        .entries
        .iter()
        .map(|e| load_sample(&manifest.root, e))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { manifest, samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "# header\n\
        alice 01 alice/01.img.pgm alice/01.dep.pgm frontal gallery\n\
        \n\
        bob 01 bob/01.img.ppm bob/01.dep.pgm yaw30 probe 4 5 90 91 # trailing\n";

    #[test]
    fn parses_and_round_trips() {
        let m = DatasetManifest::parse(TEXT, "/data").unwrap();
        assert_eq!(m.entries.len(), 2);
        assert_eq!(m.entries[1].bbox, Some(BoundingBox { x: 4, y: 5, width: 90, height: 91 }));
        assert_eq!(m.entries[1].split, Split::Probe);
        let again = DatasetManifest::parse(&m.to_text(), "/data").unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn rejects_bad_lines() {
        for bad in [
            "a 1 x y frontal gallery\na 1 x y frontal probe\n",
            "a 1 x y sideways gallery\n",
            "a 1 x y frontal train\n",
            "a 1 x y frontal\n",
            "a 1 x y frontal gallery 1 2 3 z\n",
        ] {
            let err = DatasetManifest::parse(bad, ".").unwrap_err();
            assert_eq!(err.kind(), "dataset", "{bad}");
        }
    }

    #[test]
    fn missing_file_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.txt");
        fs::write(&path, "a 1 a/1.img.pgm a/1.dep.pgm frontal gallery\n").unwrap();
        let err = load_dataset(&path).unwrap_err();
        assert!(err.to_string().contains("1.img.pgm"), "{err}");
    }
}
