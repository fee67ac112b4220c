//! The dataset-level steps behind the commands: patch extraction,
//! per-modality training, enrollment and evaluation.

use std::time::Instant;

use rayon::prelude::*;

use super::config::Config;
use super::manifest::{Dataset, Split};
use super::report::{EvalReport, QueryResult};
use crate::error::{Error, Result};
use crate::nn::NetworkParams;
use crate::patch::{face_patches, Modality, PatchConfig, PatchPair};
use crate::sparse::{pair_votes, Describer, GalleryBuilder, GalleryIndex, ModalitySelection, SrcConfig};
use crate::triplet::{train, HeldOutTriplets, PatchDataset, TrainOutcome};

/// Paired patches of every sample, in manifest order.
pub fn extract_dataset_patches(dataset: &Dataset, config: &PatchConfig) -> Result<Vec<Vec<PatchPair>>> {
    dataset
        .samples
        .par_iter()
        .zip(&dataset.manifest.entries)
        .map(|(s, e)| {
            face_patches(s, e.bbox, config)
                .map(|f| f.pairs)
                .map_err(|err| Error::Dataset(format!("{}: {err}", e.id())))
        })
        .collect()
}

/// One modality's patches of one split, grouped by person.
pub fn patch_dataset(dataset: &Dataset, patches: &[Vec<PatchPair>], split: Split, modality: Modality) -> Result<PatchDataset> {
    let mut out = PatchDataset::new();
    for i in dataset.indices(split) {
        let person = &dataset.manifest.entries[i].person;
        for pair in &patches[i] {
            out.push(person, pair.get(modality).to_tensor())?;
        }
    }
    Ok(out)
}

/// Trains one modality's network on gallery patches, tracking the triplet
/// loss on probe patches when the probe split allows it.
pub fn train_modality(config: &Config, dataset: &Dataset, patches: &[Vec<PatchPair>], modality: Modality) -> Result<TrainOutcome> {
    let train_set = patch_dataset(dataset, patches, Split::Gallery, modality)?;
    train_set.validate().map_err(|e| Error::Dataset(format!("{} gallery patches: {e}", modality.name())))?;
    let probe_set = patch_dataset(dataset, patches, Split::Probe, modality)?;
    let heldout = if config.heldout_triplets > 0 && probe_set.validate().is_ok() {
        Some(HeldOutTriplets::sample(&probe_set, config.heldout_triplets, config.seed.wrapping_add(1))?)
    } else {
        None
    };
    let mut train_config = config.train.clone();
    train_config.seed = config.seed.wrapping_add(match modality {
        Modality::Image => 0,
        Modality::Depth => 2,
    });
    train(&train_set, &train_config, heldout.as_ref())
}

/// Descriptors of every gallery patch of the selected modalities.
pub fn enroll(dataset: &Dataset, patches: &[Vec<PatchPair>], describer: &Describer, selection: ModalitySelection) -> Result<GalleryIndex> {
    let mut builder = GalleryBuilder::new(describer.extractor);
    for i in dataset.indices(Split::Gallery) {
        let entry = &dataset.manifest.entries[i];
        for m in selection.modalities() {
            let list: Vec<_> = patches[i].iter().map(|p| p.get(m)).collect();
            for d in describer.describe_all(&list)? {
                builder.add(m, &entry.person, &entry.id(), d)?;
            }
        }
    }
    builder.build()
}

/// Identifies every probe and collects rank-1 results. Probes are processed
/// in parallel and merged in manifest order.
pub fn evaluate(
    dataset: &Dataset,
    patches: &[Vec<PatchPair>],
    gallery: &GalleryIndex,
    describer: &Describer,
    src: &SrcConfig,
    selection: ModalitySelection,
) -> Result<EvalReport> {
    let started = Instant::now();
    let persons = gallery.persons().len();
    let probes = dataset.indices(Split::Probe);
    let queries = probes
        .par_iter()
        .map(|&i| -> Result<QueryResult> {
            let entry = &dataset.manifest.entries[i];
            let votes = pair_votes(&patches[i], gallery, describer, src, selection)?;
            let mut predicted = [None; 3];
            let mut fused_scores = Vec::new();
            let single = |sel| votes.decide(persons, sel, src.weights).ok().map(|d| d.person);
            if selection.includes(Modality::Image) {
                predicted[0] = single(ModalitySelection::Image);
            }
            if selection.includes(Modality::Depth) {
                predicted[1] = single(ModalitySelection::Depth);
            }
            if selection == ModalitySelection::Both {
                if let Ok(d) = votes.decide(persons, ModalitySelection::Both, src.weights) {
                    predicted[2] = Some(d.person);
                    fused_scores = d.fused;
                }
            } else if let Ok(d) = votes.decide(persons, selection, src.weights) {
                fused_scores = d.fused;
            }
            Ok(QueryResult {
                sample_id: entry.id(),
                true_label: entry.person.clone(),
                tag: entry.tag.clone(),
                predicted,
                fused_scores,
                image_patches: votes.image.len(),
                depth_patches: votes.depth.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        persons: gallery.persons().to_vec(),
        selection,
        extractor: describer.extractor.name().to_owned(),
        queries,
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// Mean Euclidean distance between embeddings of the same person and of
/// different persons, over all unordered pairs.
pub fn embedding_separation(params: &NetworkParams<f32>, set: &PatchDataset) -> Result<(f64, f64)> {
    let mut emb: Vec<(usize, Vec<f32>)> = Vec::new();
    for p in 0..set.person_count() {
        for t in set.patches_of(p) {
            emb.push((p, crate::nn::forward(params, t)?.into_vec()));
        }
    }
    let sums = (0..emb.len())
        .into_par_iter()
        .map(|i| {
            let mut s = [0.0f64; 4];
            for j in i + 1..emb.len() {
                let d = emb[i].1.iter().zip(&emb[j].1).map(|(a, b)| f64::from(a - b).powi(2)).sum::<f64>().sqrt();
                let k = if emb[i].0 == emb[j].0 { 0 } else { 2 };
                s[k] += d;
                s[k + 1] += 1.0;
            }
            s
        })
        .reduce(|| [0.0; 4], |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]);
    if sums[1] == 0.0 || sums[3] == 0.0 {
        return Err(Error::invalid("need at least two patches of one person and two persons"));
    }
    Ok((sums[0] / sums[1], sums[2] / sums[3]))
}
