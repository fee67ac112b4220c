use std::fmt;
use std::str::FromStr;

use super::classify::{classify_with_dictionary, PatchClassification};
use super::dictionary::{nearest_atoms, unit, Dictionary};
use super::lasso::LassoConfig;
use crate::error::{Error, Result};
use crate::nn::serialize::{put_f32s, put_string, put_u32, Reader};
use crate::nn::EMBEDDING_DIM;
use crate::patch::{Modality, HOG_DIM, LBP_DIM, PATCH_LEN};

pub const GALLERY_MAGIC: [u8; 4] = *b"PFGL";
pub const GALLERY_VERSION: u8 = 1;

/// Patch descriptor feeding the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Extractor {
    Cnn,
    Hog,
    Lbp,
    Raw,
}

impl Extractor {
    pub const ALL: [Extractor; 4] = [Extractor::Cnn, Extractor::Hog, Extractor::Lbp, Extractor::Raw];

    pub fn dim(self) -> usize {
        match self {
            Extractor::Cnn => EMBEDDING_DIM,
            Extractor::Hog => HOG_DIM,
            Extractor::Lbp => LBP_DIM,
            Extractor::Raw => PATCH_LEN,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Extractor::Cnn => "cnn",
            Extractor::Hog => "hog",
            Extractor::Lbp => "lbp",
            Extractor::Raw => "raw",
        }
    }

    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        Extractor::ALL
            .get(tag as usize)
            .copied()
            .ok_or_else(|| Error::Malformed(format!("unknown extractor tag {tag}")))
    }
}

impl fmt::Display for Extractor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Extractor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Extractor::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown extractor `{s}` (expected cnn, hog, lbp or raw)")))
    }
}

/// Enrolled patch descriptors of one modality.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityGallery {
    pub modality: Modality,
    embeddings: Vec<f32>,
    labels: Vec<usize>,
    sample_ids: Vec<String>,
    unit: Vec<f64>,
}

impl ModalityGallery {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn embedding(&self, i: usize, dim: usize) -> &[f32] {
        &self.embeddings[i * dim..(i + 1) * dim]
    }
}

/// Immutable after construction; person indices follow the sorted label
/// order, which is also the tie-break order.
#[derive(Debug, Clone, PartialEq)]
pub struct GalleryIndex {
    extractor: Extractor,
    dim: usize,
    persons: Vec<String>,
    modalities: Vec<ModalityGallery>,
}

#[derive(Debug, Clone)]
pub struct GalleryBuilder {
    extractor: Extractor,
    columns: Vec<(Modality, String, String, Vec<f32>)>,
}

impl GalleryBuilder {
    pub fn new(extractor: Extractor) -> Self {
        GalleryBuilder { extractor, columns: Vec::new() }
    }

    pub fn add(&mut self, modality: Modality, person: &str, sample_id: &str, embedding: Vec<f32>) -> Result<()> {
        if embedding.len() != self.extractor.dim() {
            return Err(Error::shape(format!(
                "{} descriptor of length {}, expected {}",
                self.extractor,
                embedding.len(),
                self.extractor.dim()
            )));
        }
        if !embedding.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("descriptor for {person}/{sample_id}")));
        }
        self.columns.push((modality, person.to_owned(), sample_id.to_owned(), embedding));
        Ok(())
    }

    pub fn build(self) -> Result<GalleryIndex> {
        let mut persons: Vec<String> = self.columns.iter().map(|c| c.1.clone()).collect();
        persons.sort();
        persons.dedup();
        let dim = self.extractor.dim();
        let mut modalities = Vec::new();
        for modality in Modality::ALL {
            let cols: Vec<_> = self.columns.iter().filter(|c| c.0 == modality).collect();
            if cols.is_empty() {
                continue;
            }
            let mut g = ModalityGallery { modality, embeddings: Vec::new(), labels: Vec::new(), sample_ids: Vec::new(), unit: Vec::new() };
            for (_, person, sample, emb) in cols {
                g.labels.push(persons.binary_search(person).expect("person table"));
                g.sample_ids.push(sample.clone());
                g.embeddings.extend_from_slice(emb);
            }
            modalities.push(g);
        }
        GalleryIndex::new(self.extractor, dim, persons, modalities)
    }
}

impl GalleryIndex {
    fn new(extractor: Extractor, dim: usize, persons: Vec<String>, mut modalities: Vec<ModalityGallery>) -> Result<Self> {
        if dim != extractor.dim() {
            return Err(Error::Malformed(format!("{extractor} gallery with dimension {dim}")));
        }
        if persons.is_empty() {
            return Err(Error::invalid("gallery has no persons"));
        }
        if persons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Malformed("person table must be sorted and unique".into()));
        }
        if persons.iter().any(|p| p.is_empty()) {
            return Err(Error::Malformed("empty person label".into()));
        }
        for g in &mut modalities {
            let mut seen = vec![false; persons.len()];
            for &l in &g.labels {
                *seen.get_mut(l).ok_or_else(|| Error::Malformed(format!("person index {l} out of range")))? = true;
            }
            if let Some(missing) = seen.iter().position(|s| !s) {
                return Err(Error::Dataset(format!("person {} has no {} patches in the gallery", persons[missing], g.modality.name())));
            }
            if !g.embeddings.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("{} gallery embeddings", g.modality.name())));
            }
            g.unit = g.embeddings.chunks_exact(dim).flat_map(unit).collect();
        }
        Ok(GalleryIndex { extractor, dim, persons, modalities })
    }

    pub fn extractor(&self) -> Extractor {
        self.extractor
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn persons(&self) -> &[String] {
        &self.persons
    }

    pub fn person_index(&self, label: &str) -> Option<usize> {
        self.persons.binary_search_by(|p| p.as_str().cmp(label)).ok()
    }

    pub fn modality(&self, modality: Modality) -> Option<&ModalityGallery> {
        self.modalities.iter().find(|g| g.modality == modality)
    }

    pub fn modalities(&self) -> &[ModalityGallery] {
        &self.modalities
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&GALLERY_MAGIC);
        out.push(GALLERY_VERSION);
        out.push(self.extractor.tag());
        put_u32(&mut out, self.dim as u32);
        put_u32(&mut out, self.persons.len() as u32);
        for p in &self.persons {
            put_string(&mut out, p);
        }
        out.push(self.modalities.len() as u8);
        for g in &self.modalities {
            out.push(g.modality.tag());
            put_u32(&mut out, g.len() as u32);
            for i in 0..g.len() {
                put_u32(&mut out, g.labels[i] as u32);
                put_string(&mut out, &g.sample_ids[i]);
                put_f32s(&mut out, g.embedding(i, self.dim));
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(GALLERY_MAGIC)?;
        r.version(GALLERY_VERSION)?;
        let extractor = Extractor::from_tag(r.u8()?)?;
        let dim = r.u32()? as usize;
        if dim != extractor.dim() {
            return Err(Error::Malformed(format!("{extractor} gallery with dimension {dim}")));
        }
        let person_count = r.u32()?;
        let mut persons = Vec::new();
        for _ in 0..person_count {
            persons.push(r.string()?);
        }
        let modality_count = r.u8()?;
        if modality_count as usize > Modality::ALL.len() {
            return Err(Error::Malformed(format!("{modality_count} modalities")));
        }
        let mut modalities: Vec<ModalityGallery> = Vec::new();
        for _ in 0..modality_count {
            let modality = Modality::from_tag(r.u8()?)?;
            if modalities.iter().any(|g| g.modality == modality) {
                return Err(Error::Malformed(format!("modality {} listed twice", modality.name())));
            }
            let count = r.u32()?;
            let mut g = ModalityGallery { modality, embeddings: Vec::new(), labels: Vec::new(), sample_ids: Vec::new(), unit: Vec::new() };
            for _ in 0..count {
                g.labels.push(r.u32()? as usize);
                g.sample_ids.push(r.string()?);
                g.embeddings.extend(r.f32s(dim)?);
            }
            modalities.push(g);
        }
        r.finish()?;
        GalleryIndex::new(extractor, dim, persons, modalities)
    }

    /// The `atoms` enrolled columns of `modality` nearest to `query`, after
    /// unit-normalizing both.
    pub fn select_dictionary(&self, modality: Modality, query: &[f32], atoms: usize) -> Result<Dictionary> {
        let g = self
            .modality(modality)
            .ok_or_else(|| Error::invalid(format!("gallery has no {} columns", modality.name())))?;
        if query.len() != self.dim {
            return Err(Error::shape(format!("query of length {}, gallery dimension {}", query.len(), self.dim)));
        }
        let q = unit(query);
        let sources = nearest_atoms(&q, &g.unit, self.dim, atoms)?;
        let mut data = Vec::with_capacity(sources.len() * self.dim);
        for &s in &sources {
            data.extend_from_slice(&g.unit[s * self.dim..(s + 1) * self.dim]);
        }
        Ok(Dictionary { dim: self.dim, atoms: data, labels: sources.iter().map(|&s| g.labels[s]).collect(), sources })
    }

    /// Sparse-codes the unit-normalized query over its nearest atoms and
    /// votes for the best-reconstructing person.
    pub fn classify_patch(&self, modality: Modality, query: &[f32], atoms: usize, lasso: &LassoConfig) -> Result<PatchClassification> {
        let dict = self.select_dictionary(modality, query, atoms)?;
        classify_with_dictionary(&dict, &unit(query), self.persons.len(), lasso)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::dictionary::norm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gallery(seed: u64) -> GalleryIndex {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = GalleryBuilder::new(Extractor::Lbp);
        for person in ["zed", "amy", "bo"] {
            for s in 0..4 {
                for m in Modality::ALL {
                    let v = (0..LBP_DIM).map(|_| rng.random_range(-1.0f32..1.0)).collect();
                    b.add(m, person, &format!("s{s}"), v).unwrap();
                }
            }
        }
        b.build().unwrap()
    }

    #[test]
    fn persons_are_sorted() {
        let g = gallery(1);
        assert_eq!(g.persons(), &["amy", "bo", "zed"]);
        assert_eq!(g.person_index("zed"), Some(2));
        assert_eq!(g.modality(Modality::Depth).unwrap().len(), 12);
    }

    #[test]
    fn file_round_trip_is_bit_exact() {
        let g = gallery(2);
        let bytes = g.to_bytes();
        let back = GalleryIndex::from_bytes(&bytes).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = gallery(3).to_bytes();
        assert!(matches!(GalleryIndex::from_bytes(&bytes[..bytes.len() - 1]), Err(Error::Truncated { .. })));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(GalleryIndex::from_bytes(&extra), Err(Error::Malformed(_))));
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(GalleryIndex::from_bytes(&magic), Err(Error::BadMagic { .. })));
        let mut version = bytes.clone();
        version[4] = 9;
        assert!(matches!(GalleryIndex::from_bytes(&version), Err(Error::VersionMismatch { .. })));
    }

    #[test]
    fn missing_person_in_a_modality_is_rejected() {
        let mut b = GalleryBuilder::new(Extractor::Lbp);
        b.add(Modality::Image, "a", "0", vec![1.0; LBP_DIM]).unwrap();
        b.add(Modality::Image, "b", "0", vec![2.0; LBP_DIM]).unwrap();
        b.add(Modality::Depth, "a", "0", vec![1.0; LBP_DIM]).unwrap();
        assert!(b.build().is_err());
    }

    #[test]
    fn dictionary_columns_are_unit_and_query_atom_comes_first() {
        let g = gallery(4);
        let query = g.modality(Modality::Image).unwrap().embedding(5, LBP_DIM).to_vec();
        let d = g.select_dictionary(Modality::Image, &query, 7).unwrap();
        assert_eq!(d.len(), 7);
        assert_eq!(d.sources[0], 5);
        for j in 0..d.len() {
            assert!((norm(d.atom(j)) - 1.0).abs() < 1e-6);
        }
        let whole = g.select_dictionary(Modality::Image, &query, 12).unwrap();
        assert_eq!(whole.len(), 12);
    }

    #[test]
    fn gallery_atom_query_votes_for_its_owner() {
        let g = gallery(5);
        let cols = g.modality(Modality::Depth).unwrap();
        for i in 0..cols.len() {
            let c = g.classify_patch(Modality::Depth, cols.embedding(i, LBP_DIM), 200, &LassoConfig { lambda: 0.01, ..Default::default() }).unwrap();
            assert_eq!(c.vote.person, cols.labels()[i]);
        }
    }

    #[test]
    fn extractor_names_round_trip() {
        for e in Extractor::ALL {
            assert_eq!(e.name().parse::<Extractor>().unwrap(), e);
            assert_eq!(Extractor::from_tag(e.tag()).unwrap(), e);
        }
        assert!("sift".parse::<Extractor>().is_err());
    }
}
