//! File-level commands. Each reads its inputs, writes its outputs under
//! `out` with the effective configuration echoed as `#` lines, and returns
//! what it produced.

use std::fs;
use std::path::{Path, PathBuf};

use super::config::Config;
use super::manifest::{load_dataset, load_sample, ManifestEntry, Split};
use super::report::EvalReport;
use super::synth::write_synthetic;
use super::workflow::{enroll, evaluate, extract_dataset_patches, train_modality};
use crate::error::{Error, Result};
use crate::nn::{deserialize_params, serialize_params};
use crate::patch::{Modality, PatchConfig};
use crate::sparse::{identify, Describer, Extractor, GalleryIndex, IdentityDecision, ModalitySelection};
use crate::triplet::{EpochLog, TrainOutcome};

pub const GALLERY_FILE: &str = "gallery.pfgl";
pub const CONFIG_FILE: &str = "config.txt";

pub fn model_file(modality: Modality) -> String {
    format!("{}.pfnn", modality.name())
}

pub fn train_log_file(modality: Modality) -> String {
    format!("train_{}.csv", modality.name())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_csv(path: &Path, config: &Config, body: &str) -> Result<()> {
    write(path, format!("{}{}", config.echo(), body))
}

/// Generates the synthetic dataset into `out`; returns the manifest path.
pub fn cmd_synth(config: &Config, out: &Path) -> Result<PathBuf> {
    create_dir(out)?;
    let manifest = write_synthetic(&config.synth, config.seed, out)?;
    write(&out.join(CONFIG_FILE), config.to_text())?;
    Ok(manifest)
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub modality: Modality,
    pub model_path: PathBuf,
    pub log_path: PathBuf,
    pub outcome: TrainOutcome,
}

pub fn training_log_csv(outcome: &TrainOutcome) -> String {
    let mut out = format!("{}\n", EpochLog::CSV_HEADER);
    for e in &outcome.history {
        out.push_str(&e.csv_row());
        out.push('\n');
    }
    out
}

/// Trains one network per selected modality on the gallery split.
pub fn cmd_train(config: &Config, manifest: &Path, selection: ModalitySelection, out: &Path) -> Result<Vec<TrainSummary>> {
    let dataset = load_dataset(manifest)?;
    let patches = extract_dataset_patches(&dataset, &config.patch)?;
    create_dir(out)?;
    write(&out.join(CONFIG_FILE), config.to_text())?;
    let mut summaries = Vec::new();
    for m in selection.modalities() {
        let outcome = train_modality(config, &dataset, &patches, m)?;
        let model_path = out.join(model_file(m));
        write(&model_path, serialize_params(&outcome.params))?;
        let log_path = out.join(train_log_file(m));
        write_csv(&log_path, config, &training_log_csv(&outcome))?;
        summaries.push(TrainSummary { modality: m, model_path, log_path, outcome });
    }
    Ok(summaries)
}

/// The extractor, with the models it needs read from `models`.
pub fn load_describer(extractor: Extractor, models: Option<&Path>, selection: ModalitySelection) -> Result<Describer> {
    if extractor != Extractor::Cnn {
        return Ok(Describer::handcrafted(extractor));
    }
    let dir = models.ok_or_else(|| Error::invalid("the cnn extractor needs a models directory"))?;
    let load = |m: Modality| -> Result<Option<_>> {
        if !selection.includes(m) {
            return Ok(None);
        }
        let path = dir.join(model_file(m));
        deserialize_params(&read(&path)?).map(Some).map_err(|e| e.at_path(&path))
    };
    Ok(Describer::cnn(load(Modality::Image)?, load(Modality::Depth)?))
}

pub fn load_gallery(path: &Path) -> Result<GalleryIndex> {
    GalleryIndex::from_bytes(&read(path)?).map_err(|e| e.at_path(path))
}

/// Enrolls every gallery-split sample; returns the gallery file path.
pub fn cmd_enroll(
    config: &Config,
    manifest: &Path,
    extractor: Extractor,
    models: Option<&Path>,
    selection: ModalitySelection,
    out: &Path,
) -> Result<PathBuf> {
    let describer = load_describer(extractor, models, selection)?;
    let dataset = load_dataset(manifest)?;
    let patches = extract_dataset_patches(&dataset, &config.patch)?;
    let gallery = enroll(&dataset, &patches, &describer, selection)?;
    create_dir(out)?;
    let path = out.join(GALLERY_FILE);
    write(&path, gallery.to_bytes())?;
    write(&out.join(CONFIG_FILE), config.to_text())?;
    Ok(path)
}

fn check_selection(gallery: &GalleryIndex, selection: ModalitySelection) -> Result<()> {
    for m in selection.modalities() {
        if gallery.modality(m).is_none() {
            return Err(Error::invalid(format!("gallery has no {} columns", m.name())));
        }
    }
    Ok(())
}

fn write_report(config: &Config, report: &EvalReport, out: &Path) -> Result<()> {
    create_dir(out)?;
    write_csv(&out.join("decisions.csv"), config, &report.decisions_csv())?;
    write_csv(&out.join("summary.csv"), config, &report.summary_csv())?;
    write_csv(&out.join("confusion.csv"), config, &report.confusion_csv())
}

/// Identifies every probe-split sample against a stored gallery and writes
/// `decisions.csv`, `summary.csv` and `confusion.csv`.
pub fn cmd_evaluate(
    config: &Config,
    manifest: &Path,
    gallery_path: &Path,
    models: Option<&Path>,
    selection: ModalitySelection,
    out: &Path,
) -> Result<EvalReport> {
    let gallery = load_gallery(gallery_path)?;
    check_selection(&gallery, selection)?;
    let describer = load_describer(gallery.extractor(), models, selection)?;
    let dataset = load_dataset(manifest)?;
    let patches = extract_dataset_patches(&dataset, &config.patch)?;
    let report = evaluate(&dataset, &patches, &gallery, &describer, &config.src, selection)?;
    write_report(config, &report, out)?;
    Ok(report)
}

/// Enrollment and evaluation with one extractor in a single pass; the
/// gallery is written next to the report.
pub fn cmd_baseline(
    config: &Config,
    manifest: &Path,
    extractor: Extractor,
    models: Option<&Path>,
    selection: ModalitySelection,
    out: &Path,
) -> Result<EvalReport> {
    let describer = load_describer(extractor, models, selection)?;
    let dataset = load_dataset(manifest)?;
    let patches = extract_dataset_patches(&dataset, &config.patch)?;
    let gallery = enroll(&dataset, &patches, &describer, selection)?;
    let report = evaluate(&dataset, &patches, &gallery, &describer, &config.src, selection)?;
    write_report(config, &report, out)?;
    write(&out.join(GALLERY_FILE), gallery.to_bytes())?;
    Ok(report)
}

pub fn decision_csv_header(gallery: &GalleryIndex) -> String {
    let mut h = String::from("sample_id,predicted,true_label");
    for p in gallery.persons() {
        h.push_str(&format!(",score_{p}"));
    }
    h
}

pub fn decision_csv_row(sample_id: &str, true_label: Option<&str>, gallery: &GalleryIndex, d: &IdentityDecision) -> String {
    let mut row = format!("{sample_id},{},{}", gallery.persons()[d.person], true_label.unwrap_or(""));
    for s in &d.fused {
        row.push_str(&format!(",{s:.6}"));
    }
    row
}

/// Identifies one registered image/depth pair; writes `decision.csv` and
/// returns its data row.
#[allow(clippy::too_many_arguments)]
pub fn cmd_identify(
    config: &Config,
    gallery_path: &Path,
    models: Option<&Path>,
    image: &Path,
    depth: &Path,
    true_label: Option<&str>,
    selection: ModalitySelection,
    out: &Path,
) -> Result<String> {
    let gallery = load_gallery(gallery_path)?;
    check_selection(&gallery, selection)?;
    let describer = load_describer(gallery.extractor(), models, selection)?;
    let entry = ManifestEntry {
        person: true_label.unwrap_or("unknown").to_owned(),
        sample: "probe".into(),
        image: image.to_path_buf(),
        depth: depth.to_path_buf(),
        tag: "other".into(),
        split: Split::Probe,
        bbox: None,
    };
    let sample = load_sample(Path::new(""), &entry)?;
    let patch: &PatchConfig = &config.patch;
    let decision = identify(&sample, None, &gallery, &describer, patch, &config.src, selection)?;
    let sample_id = image
        .file_name()
        .map(|n| n.to_string_lossy().trim_end_matches(".img.pgm").trim_end_matches(".img.ppm").to_owned())
        .unwrap_or_default();
    let row = decision_csv_row(&sample_id, true_label, &gallery, &decision);
    create_dir(out)?;
    write_csv(&out.join("decision.csv"), config, &format!("{}\n{row}\n", decision_csv_header(&gallery)))?;
    Ok(row)
}
