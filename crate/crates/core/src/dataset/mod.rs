//! Keypoint sequence datasets: KPS1 sample files, JSON manifests, cleaning
//! and a synthetic generator.

mod clean;
mod kps;
mod manifest;
mod synthetic;

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;

pub use clean::{center_on_wrists, clean_sequence};
pub use kps::{decode_sample, encode_sample, read_sample, write_sample, KPS_MAGIC};
pub use manifest::{Manifest, ManifestEntry, Split};
pub use synthetic::{class_motifs, generate_synthetic, SyntheticSpec};

use crate::error::{Error, Result};

/// One cleaned sample.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointSequence {
    /// `T x D`, all finite.
    pub frames: Array2<f32>,
    pub label: String,
    pub sample_id: String,
    pub fps_hint: Option<f64>,
}

impl KeypointSequence {
    pub fn len(&self) -> usize {
        self.frames.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.nrows() == 0
    }

    pub fn feature_dim(&self) -> usize {
        self.frames.ncols()
    }

    /// Frames widened to `f64` for the reservoir.
    pub fn frames_f64(&self) -> Array2<f64> {
        self.frames.mapv(f64::from)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub classes: Vec<String>,
    pub feature_dim: usize,
    pub train: Vec<KeypointSequence>,
    pub val: Vec<KeypointSequence>,
    pub test: Vec<KeypointSequence>,
    /// Ids of samples dropped during loading (fewer than two frames).
    pub skipped: Vec<String>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> &[KeypointSequence] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }

    /// Class indices for a split, in sample order.
    pub fn label_indices(&self, split: Split) -> Result<Vec<usize>> {
        self.split(split)
            .iter()
            .map(|s| {
                self.class_index(&s.label)
                    .ok_or_else(|| Error::UnknownLabel(s.label.clone()))
            })
            .collect()
    }

    /// Checks the structural invariants: consistent width, known labels,
    /// unique ids across splits, non-empty train split covering every class.
    pub fn validate(&self) -> Result<()> {
        if self.train.is_empty() {
            return Err(Error::EmptySplit("train"));
        }
        let mut ids = HashSet::new();
        for split in Split::ALL {
            for s in self.split(split) {
                if s.feature_dim() != self.feature_dim {
                    return Err(Error::EntryDimension {
                        entry: s.sample_id.clone(),
                        expected: self.feature_dim,
                        actual: s.feature_dim(),
                    });
                }
                if self.class_index(&s.label).is_none() {
                    return Err(Error::UnknownLabel(s.label.clone()));
                }
                if !ids.insert(s.sample_id.as_str()) {
                    return Err(Error::Duplicate {
                        what: "sample_id",
                        value: s.sample_id.clone(),
                    });
                }
            }
        }
        let present: HashSet<&str> = self.train.iter().map(|s| s.label.as_str()).collect();
        if let Some(absent) = self.classes.iter().find(|c| !present.contains(c.as_str())) {
            return Err(Error::ClassAbsentFromTrain(absent.clone()));
        }
        Ok(())
    }
}

/// Loads, validates and cleans every sample listed in a manifest.
/// Samples keep manifest order within each split.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let manifest = Manifest::read(manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    if manifest.feature_dim == 0 {
        return Err(Error::config("feature_dim", "must be at least 1"));
    }

    let mut paths = HashSet::new();
    let mut ids = HashSet::new();
    let mut splits = Vec::with_capacity(manifest.entries.len());
    for entry in &manifest.entries {
        let split: Split = entry.split.parse().map_err(|_| Error::UnknownSplit {
            entry: entry.id().to_owned(),
            tag: entry.split.clone(),
        })?;
        if !paths.insert(entry.path.as_str()) {
            return Err(Error::Duplicate {
                what: "path",
                value: entry.path.clone(),
            });
        }
        if !ids.insert(entry.id()) {
            return Err(Error::Duplicate {
                what: "sample_id",
                value: entry.id().to_owned(),
            });
        }
        splits.push(split);
    }

    let classes = if manifest.classes.is_empty() {
        manifest
            .entries
            .iter()
            .zip(&splits)
            .filter(|(_, s)| **s == Split::Train)
            .map(|(e, _)| e.label.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    } else {
        manifest.classes.clone()
    };
    let known: HashSet<&str> = classes.iter().map(String::as_str).collect();
    if let Some(e) = manifest.entries.iter().find(|e| !known.contains(e.label.as_str())) {
        return Err(Error::Sample {
            id: e.id().to_owned(),
            source: Box::new(Error::UnknownLabel(e.label.clone())),
        });
    }

    let loaded: Vec<Result<Option<KeypointSequence>>> = manifest
        .entries
        .par_iter()
        .map(|entry| load_entry(base, entry, manifest.feature_dim))
        .collect();

    let mut dataset = Dataset {
        classes,
        feature_dim: manifest.feature_dim,
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        skipped: Vec::new(),
    };
    for ((entry, split), sample) in manifest.entries.iter().zip(splits).zip(loaded) {
        match sample? {
            Some(s) => match split {
                Split::Train => dataset.train.push(s),
                Split::Val => dataset.val.push(s),
                Split::Test => dataset.test.push(s),
            },
            None => dataset.skipped.push(entry.id().to_owned()),
        }
    }
    dataset.validate()?;
    Ok(dataset)
}

fn load_entry(base: &Path, entry: &ManifestEntry, feature_dim: usize) -> Result<Option<KeypointSequence>> {
    let path = resolve(base, &entry.path);
    if !path.is_file() {
        return Err(Error::MissingFile(path));
    }
    let raw = read_sample(&path)?;
    if raw.ncols() != feature_dim {
        return Err(Error::EntryDimension {
            entry: entry.id().to_owned(),
            expected: feature_dim,
            actual: raw.ncols(),
        });
    }
    let frames = match clean_sequence(raw.view()) {
        Ok(f) => f,
        Err(Error::TooShort { frames }) => {
            log::warn!("skipping `{}`: {frames} frame(s)", entry.id());
            return Ok(None);
        }
        Err(e) => {
            return Err(Error::Sample {
                id: entry.id().to_owned(),
                source: Box::new(e),
            })
        }
    };
    Ok(Some(KeypointSequence {
        frames,
        label: entry.label.clone(),
        sample_id: entry.id().to_owned(),
        fps_hint: entry.fps,
    }))
}

fn resolve(base: &Path, path: &str) -> PathBuf {
    let p = Path::new(path);
    if p.is_absolute() {
        p.to_owned()
    } else {
        base.join(p)
    }
}

/// Writes every sample as `samples/<id>.kps` under `dir` plus
/// `dir/manifest.json`, train then val then test. Returns the manifest path.
pub fn write_dataset(dataset: &Dataset, dir: &Path) -> Result<PathBuf> {
    let samples = dir.join("samples");
    fs::create_dir_all(&samples).map_err(|e| Error::io(&samples, e))?;
    let mut entries = Vec::with_capacity(dataset.len());
    for split in Split::ALL {
        for s in dataset.split(split) {
            let rel = format!("samples/{}.kps", s.sample_id);
            write_sample(&dir.join(&rel), s.frames.view())?;
            entries.push(ManifestEntry {
                path: rel,
                label: s.label.clone(),
                split: split.as_str().to_owned(),
                sample_id: Some(s.sample_id.clone()),
                signer_id: None,
                fps: s.fps_hint,
            });
        }
    }
    let manifest = Manifest {
        feature_dim: dataset.feature_dim,
        classes: dataset.classes.clone(),
        entries,
    };
    let path = dir.join("manifest.json");
    manifest.write(&path)?;
    Ok(path)
}
