//! Labeled feature sets: the synthetic ten-class corpus and directories of
//! WAV files grouped by class name.

use std::fs;
use std::path::{Path, PathBuf};

use crate::classifier::{LabeledDataset, ModelError, CLASS_LABELS, NUM_CLASSES};
use crate::device::synth_clip;
use crate::dsp::{extract_features, wav, DspError};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("class directory `{0}` has no WAV files")]
    EmptyClass(String),
    #[error("{path}: {source}")]
    Audio { path: PathBuf, source: DspError },
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Recorder rate used for generated clips.
pub const SYNTH_SAMPLE_RATE: u32 = 16000;
/// Length of generated corpus clips, matching the 4 s excerpts of the
/// public urban sound datasets.
pub const SYNTH_CLIP_SECONDS: f64 = 4.0;

/// Seed of the `index`-th synthetic clip of `class`.
pub fn synth_seed(base_seed: u64, class: usize, index: usize) -> u64 {
    base_seed
        .wrapping_mul(1_000_003)
        .wrapping_add((class as u64) << 32)
        .wrapping_add(index as u64)
}

/// `per_class` generated clips of every class, featurized.
pub fn synthetic_dataset(per_class: usize, clip_seconds: f64, base_seed: u64) -> Result<LabeledDataset, CorpusError> {
    let mut items = Vec::with_capacity(per_class * NUM_CLASSES);
    for index in 0..per_class {
        for class in 0..NUM_CLASSES {
            let clip = synth_clip(class, clip_seconds, SYNTH_SAMPLE_RATE, synth_seed(base_seed, class, index))?;
            items.push((extract_features(&clip)?.into_values(), class));
        }
    }
    Ok(LabeledDataset::new(items, NUM_CLASSES)?)
}

fn wav_files(dir: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    let io = |source| CorpusError::Io { path: dir.to_path_buf(), source };
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    files.sort();
    Ok(files)
}

/// Loads `root/<class_label>/*.wav` for every known class. Directories with
/// other names are ignored; a known class with no files is an error.
pub fn load_dataset_dir(root: impl AsRef<Path>) -> Result<LabeledDataset, CorpusError> {
    let root = root.as_ref();
    let mut items = Vec::new();
    for (class, label) in CLASS_LABELS.iter().enumerate() {
        let dir = root.join(label);
        let files = if dir.is_dir() { wav_files(&dir)? } else { Vec::new() };
        if files.is_empty() {
            return Err(CorpusError::EmptyClass((*label).to_string()));
        }
        for path in files {
            let clip = wav::read_wav(&path).map_err(|source| CorpusError::Audio { path: path.clone(), source })?;
            let features = extract_features(&clip).map_err(|source| CorpusError::Audio { path, source })?;
            items.push((features.into_values(), class));
        }
    }
    Ok(LabeledDataset::new(items, NUM_CLASSES)?)
}
