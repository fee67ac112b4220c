use std::str::FromStr;

use rayon::prelude::*;

use super::classify::{fuse_and_decide, FusionWeights, IdentityDecision, Vote};
use super::gallery::{Extractor, GalleryIndex};
use super::lasso::LassoConfig;
use crate::error::{Error, Result};
use crate::nn::{forward, NetworkParams};
use crate::patch::{face_patches, hog_descriptor, lbp_descriptor, BoundingBox, FaceSample, Modality, Patch, PatchConfig, PatchPair};

/// Which modalities take part in a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModalitySelection {
    Image,
    Depth,
    Both,
}

impl ModalitySelection {
    pub fn includes(self, m: Modality) -> bool {
        matches!((self, m), (ModalitySelection::Both, _) | (ModalitySelection::Image, Modality::Image) | (ModalitySelection::Depth, Modality::Depth))
    }

    pub fn modalities(self) -> Vec<Modality> {
        Modality::ALL.into_iter().filter(|&m| self.includes(m)).collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            ModalitySelection::Image => "image",
            ModalitySelection::Depth => "depth",
            ModalitySelection::Both => "both",
        }
    }
}

impl FromStr for ModalitySelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "image" => Ok(ModalitySelection::Image),
            "depth" => Ok(ModalitySelection::Depth),
            "both" => Ok(ModalitySelection::Both),
            other => Err(Error::invalid(format!("unknown modality `{other}` (expected image, depth or both)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrcConfig {
    /// Dictionary size per query patch.
    pub atoms: usize,
    pub lasso: LassoConfig,
    pub weights: FusionWeights,
}

impl Default for SrcConfig {
    fn default() -> Self {
        SrcConfig { atoms: 200, lasso: LassoConfig::default(), weights: FusionWeights::default() }
    }
}

/// Turns patches into descriptors. The CNN extractor needs one trained
/// model per modality it is asked about.
#[derive(Debug, Clone)]
pub struct Describer {
    pub extractor: Extractor,
    pub image_model: Option<NetworkParams<f32>>,
    pub depth_model: Option<NetworkParams<f32>>,
}

impl Describer {
    pub fn handcrafted(extractor: Extractor) -> Self {
        Describer { extractor, image_model: None, depth_model: None }
    }

    pub fn cnn(image_model: Option<NetworkParams<f32>>, depth_model: Option<NetworkParams<f32>>) -> Self {
        Describer { extractor: Extractor::Cnn, image_model, depth_model }
    }

    fn model(&self, m: Modality) -> Result<&NetworkParams<f32>> {
        let model = match m {
            Modality::Image => self.image_model.as_ref(),
            Modality::Depth => self.depth_model.as_ref(),
        };
        model.ok_or_else(|| Error::invalid(format!("no {} model loaded for the cnn extractor", m.name())))
    }

    pub fn describe(&self, patch: &Patch) -> Result<Vec<f32>> {
        match self.extractor {
            Extractor::Cnn => Ok(forward(self.model(patch.modality)?, &patch.to_tensor())?.into_vec()),
            Extractor::Hog => Ok(hog_descriptor(patch)),
            Extractor::Lbp => Ok(lbp_descriptor(patch)),
            Extractor::Raw => Ok(patch.data.clone()),
        }
    }

    /// Order-preserving parallel map of [`Describer::describe`].
    pub fn describe_all(&self, patches: &[&Patch]) -> Result<Vec<Vec<f32>>> {
        patches.par_iter().map(|p| self.describe(p)).collect()
    }
}

/// Per-modality patch votes of one probe sample.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleVotes {
    pub image: Vec<Vote>,
    pub depth: Vec<Vote>,
}

impl SampleVotes {
    pub fn decide(&self, persons: usize, selection: ModalitySelection, weights: FusionWeights) -> Result<IdentityDecision> {
        let img: &[Vote] = if selection.includes(Modality::Image) { &self.image } else { &[] };
        let dep: &[Vote] = if selection.includes(Modality::Depth) { &self.depth } else { &[] };
        fuse_and_decide(persons, img, dep, weights)
    }
}

/// Descriptors and SRC votes for already extracted patch pairs.
pub fn pair_votes(pairs: &[PatchPair], gallery: &GalleryIndex, describer: &Describer, src: &SrcConfig, selection: ModalitySelection) -> Result<SampleVotes> {
    if describer.extractor != gallery.extractor() {
        return Err(Error::invalid(format!(
            "gallery holds {} descriptors but the {} extractor was requested",
            gallery.extractor(),
            describer.extractor
        )));
    }
    let mut votes = SampleVotes::default();
    for m in selection.modalities() {
        let patches: Vec<&Patch> = pairs.iter().map(|pair| pair.get(m)).collect();
        let descriptors = describer.describe_all(&patches)?;
        let list: Vec<Vote> = descriptors
            .par_iter()
            .map(|d| gallery.classify_patch(m, d, src.atoms, &src.lasso).map(|c| c.vote))
            .collect::<Result<_>>()?;
        match m {
            Modality::Image => votes.image = list,
            Modality::Depth => votes.depth = list,
        }
    }
    Ok(votes)
}

/// Patches, descriptors and SRC votes for the selected modalities.
pub fn sample_votes(
    sample: &FaceSample,
    bbox: Option<BoundingBox>,
    gallery: &GalleryIndex,
    describer: &Describer,
    patch_config: &PatchConfig,
    src: &SrcConfig,
    selection: ModalitySelection,
) -> Result<SampleVotes> {
    let face = face_patches(sample, bbox, patch_config)?;
    pair_votes(&face.pairs, gallery, describer, src, selection)
}

/// The full online pipeline: preprocess, keypoints, paired patches,
/// descriptors, per-patch SRC and late fusion.
pub fn identify(
    sample: &FaceSample,
    bbox: Option<BoundingBox>,
    gallery: &GalleryIndex,
    describer: &Describer,
    patch_config: &PatchConfig,
    src: &SrcConfig,
    selection: ModalitySelection,
) -> Result<IdentityDecision> {
    let votes = sample_votes(sample, bbox, gallery, describer, patch_config, src, selection)?;
    votes
        .decide(gallery.persons().len(), selection, src.weights)
        .map_err(|_| Error::Dataset("probe produced no usable patches".into()))
}
