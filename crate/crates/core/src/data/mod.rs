//! Image ingestion, labeled datasets, fold splitting and synthetic data.
//!
//! On disk a dataset is a directory with two subdirectories, `healthy`
//! (label 0) and `ALL` (label 1), holding `.pgm`/`.ppm` files.

mod folds;
mod pnm;
mod preprocess;
mod synth;

use std::path::{Path, PathBuf};

pub use folds::stratified_kfold;
pub use pnm::{decode_pnm, encode_pnm, ImageU8, PnmError};
pub use preprocess::{preprocess, resize_bilinear, to_gray};
pub use synth::{synth_dataset, SynthKind, DEFAULT_IMAGE_SEPARATION};

use thiserror::Error;

use crate::classifier::{label_name, ALL, HEALTHY};
use crate::tensor::Matrix;

pub const DEFAULT_SIDE: usize = 64;

/// Class subdirectories in label order.
pub const CLASS_DIRS: [(&str, u32); 2] = [("healthy", HEALTHY), ("ALL", ALL)];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Image { path: PathBuf, source: PnmError },
    #[error("missing class directory {0}")]
    MissingClassDir(PathBuf),
    #[error("class {0} has no usable images")]
    EmptyClass(String),
    #[error("fold count must be at least 2, got {0}")]
    FoldCount(usize),
    #[error("class {label} has {count} samples, fewer than {k} folds")]
    TooFewForFolds { label: u32, count: usize, k: usize },
    #[error("csv: {0}")]
    Csv(String),
    #[error("dataset holds {0}, expected {1}")]
    WrongKind(&'static str, &'static str),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Images,
    FeatureVectors,
}

impl DatasetKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Images => "images",
            Self::FeatureVectors => "feature vectors",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Samples {
    Images(Vec<Matrix>),
    Features(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub samples: Samples,
    pub labels: Vec<u32>,
    /// Per-sample source names for reporting.
    pub names: Vec<String>,
    /// Files skipped during loading because of their extension.
    pub skipped: usize,
}

impl LabeledDataset {
    pub fn new(samples: Samples, labels: Vec<u32>, names: Vec<String>) -> Result<Self, DataError> {
        let n = match &samples {
            Samples::Images(v) => v.len(),
            Samples::Features(v) => v.len(),
        };
        if labels.len() != n || names.len() != n {
            return Err(DataError::Invalid(format!(
                "{n} samples, {} labels, {} names",
                labels.len(),
                names.len()
            )));
        }
        Ok(Self {
            samples,
            labels,
            names,
            skipped: 0,
        })
    }

    pub fn kind(&self) -> DatasetKind {
        match self.samples {
            Samples::Images(_) => DatasetKind::Images,
            Samples::Features(_) => DatasetKind::FeatureVectors,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_count(&self, label: u32) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn images(&self) -> Result<&[Matrix], DataError> {
        match &self.samples {
            Samples::Images(v) => Ok(v),
            Samples::Features(_) => Err(DataError::WrongKind("feature vectors", "images")),
        }
    }

    pub fn features(&self) -> Result<&[Vec<f64>], DataError> {
        match &self.samples {
            Samples::Features(v) => Ok(v),
            Samples::Images(_) => Err(DataError::WrongKind("images", "feature vectors")),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn load_image(path: &Path, side: usize) -> Result<Matrix, DataError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    let img = decode_pnm(&bytes).map_err(|source| DataError::Image {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(preprocess(&img, side))
}

/// Loads `dir/healthy` and `dir/ALL`, each in lexicographic path order.
/// Files without a `.pgm`/`.ppm` extension are skipped and counted.
pub fn load_dataset(dir: impl AsRef<Path>, side: usize) -> Result<LabeledDataset, DataError> {
    let dir = dir.as_ref();
    let mut images = Vec::new();
    let mut labels = Vec::new();
    let mut names = Vec::new();
    let mut skipped = 0;
    for (sub, label) in CLASS_DIRS {
        let class_dir = dir.join(sub);
        if !class_dir.is_dir() {
            return Err(DataError::MissingClassDir(class_dir));
        }
        let mut paths = Vec::new();
        for entry in std::fs::read_dir(&class_dir).map_err(io_err(&class_dir))? {
            let path = entry.map_err(io_err(&class_dir))?.path();
            if !path.is_file() {
                continue;
            }
            let ext = path
                .extension()
                .and_then(|e| e.to_str())
                .map(str::to_ascii_lowercase);
            if matches!(ext.as_deref(), Some("pgm" | "ppm")) {
                paths.push(path);
            } else {
                tracing::warn!(path = %path.display(), "skipping file with unsupported extension");
                skipped += 1;
            }
        }
        if paths.is_empty() {
            return Err(DataError::EmptyClass(label_name(label).to_string()));
        }
        paths.sort();
        for path in paths {
            images.push(load_image(&path, side)?);
            labels.push(label);
            names.push(format!(
                "{sub}/{}",
                path.file_name().unwrap_or_default().to_string_lossy()
            ));
        }
    }
    let mut ds = LabeledDataset::new(Samples::Images(images), labels, names)?;
    ds.skipped = skipped;
    Ok(ds)
}

/// Writes an image dataset in the directory layout read by [`load_dataset`],
/// quantizing pixels to 8 bits.
pub fn write_image_dataset(ds: &LabeledDataset, dir: impl AsRef<Path>) -> Result<(), DataError> {
    let dir = dir.as_ref();
    let images = ds.images()?;
    for (sub, _) in CLASS_DIRS {
        let d = dir.join(sub);
        std::fs::create_dir_all(&d).map_err(io_err(&d))?;
    }
    for (i, (img, &label)) in images.iter().zip(&ds.labels).enumerate() {
        let sub = CLASS_DIRS
            .iter()
            .find(|(_, l)| *l == label)
            .map(|(s, _)| *s)
            .ok_or_else(|| DataError::Invalid(format!("label {label} has no directory")))?;
        let pixels = img
            .as_slice()
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        let bytes = encode_pnm(&ImageU8::new(img.cols(), img.rows(), 1, pixels).map_err(
            |source| DataError::Image {
                path: dir.to_path_buf(),
                source,
            },
        )?);
        let path = dir.join(sub).join(format!("sample_{i:04}.pgm"));
        std::fs::write(&path, bytes).map_err(io_err(&path))?;
    }
    Ok(())
}

/// CSV with header `label,f0,…,f{d-1}`; floats use shortest-roundtrip text.
pub fn write_features_csv(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let feats = ds.features()?;
    let dim = feats.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_path(path).map_err(|e| DataError::Csv(e.to_string()))?;
    let header: Vec<String> = std::iter::once("label".to_string())
        .chain((0..dim).map(|j| format!("f{j}")))
        .collect();
    w.write_record(&header)
        .map_err(|e| DataError::Csv(e.to_string()))?;
    for (f, label) in feats.iter().zip(&ds.labels) {
        let row: Vec<String> = std::iter::once(label.to_string())
            .chain(f.iter().map(|v| v.to_string()))
            .collect();
        w.write_record(&row)
            .map_err(|e| DataError::Csv(e.to_string()))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_features_csv(path: impl AsRef<Path>) -> Result<LabeledDataset, DataError> {
    let path = path.as_ref();
    let csv_err = |e: csv::Error| DataError::Csv(format!("{}: {e}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let dim = r.headers().map_err(csv_err)?.len().saturating_sub(1);
    if dim == 0 {
        return Err(DataError::Csv(format!(
            "{}: no feature columns",
            path.display()
        )));
    }
    let mut feats = Vec::new();
    let mut labels = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let bad =
            |what: &str| DataError::Csv(format!("{}: row {}: {what}", path.display(), row + 1));
        let label: u32 = rec[0].trim().parse().map_err(|_| bad("bad label"))?;
        if label != HEALTHY && label != ALL {
            return Err(bad("label must be 0 or 1"));
        }
        let values = rec
            .iter()
            .skip(1)
            .map(|v| v.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| bad("non-numeric or non-finite value"))?;
        feats.push(values);
        labels.push(label);
    }
    let names = (0..labels.len()).map(|i| format!("row{}", i + 1)).collect();
    LabeledDataset::new(Samples::Features(feats), labels, names)
}
