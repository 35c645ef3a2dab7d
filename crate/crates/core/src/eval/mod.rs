//! Cross-validated comparison of the subspace classifier against baselines.

mod anova;
mod elm;
mod knn;
mod report;

use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub use anova::{anova_oneway, f_upper_tail, ln_gamma, regularized_incomplete_beta, AnovaResult};
pub use elm::{elm_train, ElmModel};
pub use knn::knn_classify;
pub use report::{compare_report, EvalSummary};

use crate::classifier::{
    train_matrix_mode, train_vector_mode_from_samples, ClassifierError, Sample,
    DEFAULT_MATRIX_RANKS, DEFAULT_VECTOR_RANK,
};
use crate::cnn::{extract_batch, train_sgd, CnnDescriptor, CnnError, CnnNetwork};
use crate::data::{stratified_kfold, DataError, DatasetKind, LabeledDataset, Samples};
use crate::tensor::{Matrix, TensorError};

pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_REPEATS: usize = 6;
pub const DEFAULT_ELM_HIDDEN: usize = 100;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Cnn(#[from] CnnError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("seed {seed}, fold {fold}: {source}")]
    Fold {
        seed: u64,
        fold: usize,
        #[source]
        source: Box<EvalError>,
    },
    #[error("classifier {classifier} cannot run on {kind}")]
    Unsupported {
        classifier: String,
        kind: &'static str,
    },
    #[error("unknown classifier {0:?} (expected hosvd, hosvd-matrix, 1nn, 5nn, elm, cnn)")]
    UnknownClassifier(String),
    #[error("training set is empty")]
    EmptyTraining,
    #[error("degenerate model: {0}")]
    Degenerate(String),
    #[error("anova: {0}")]
    Anova(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierSpec {
    Hosvd,
    HosvdMatrix,
    Knn(usize),
    Elm,
    CnnHead,
}

impl ClassifierSpec {
    pub const DEFAULTS: [ClassifierSpec; 5] = [
        Self::Hosvd,
        Self::Knn(1),
        Self::Knn(5),
        Self::Elm,
        Self::CnnHead,
    ];

    pub fn name(&self) -> String {
        match self {
            Self::Hosvd => "HOSVD".into(),
            Self::HosvdMatrix => "HOSVD-matrix".into(),
            Self::Knn(k) => format!("{k}-NN"),
            Self::Elm => "ELM".into(),
            Self::CnnHead => "CNN-softmax".into(),
        }
    }

    fn supports(&self, kind: DatasetKind) -> bool {
        !(kind == DatasetKind::FeatureVectors && matches!(self, Self::HosvdMatrix | Self::CnnHead))
    }

    fn needs_features(&self) -> bool {
        !matches!(self, Self::HosvdMatrix)
    }
}

impl FromStr for ClassifierSpec {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "hosvd" => Ok(Self::Hosvd),
            "hosvd-matrix" => Ok(Self::HosvdMatrix),
            "elm" => Ok(Self::Elm),
            "cnn" => Ok(Self::CnnHead),
            _ => lower
                .strip_suffix("nn")
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|&k| k >= 1)
                .map(Self::Knn)
                .ok_or_else(|| EvalError::UnknownClassifier(s.to_string())),
        }
    }
}

/// Parses a comma-separated classifier list such as `hosvd,1nn,elm`.
pub fn parse_classifier_list(s: &str) -> Result<Vec<ClassifierSpec>, EvalError> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect()
}

/// Per-fold CNN training used for image datasets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CnnTraining {
    pub init_seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for CnnTraining {
    fn default() -> Self {
        Self {
            init_seed: 42,
            epochs: 5,
            learning_rate: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub folds: usize,
    pub vector_rank: usize,
    pub matrix_ranks: [usize; 3],
    pub elm_hidden: usize,
    pub cnn: CnnTraining,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            folds: DEFAULT_FOLDS,
            vector_rank: DEFAULT_VECTOR_RANK,
            matrix_ranks: DEFAULT_MATRIX_RANKS,
            elm_hidden: DEFAULT_ELM_HIDDEN,
            cnn: CnnTraining::default(),
        }
    }
}

/// Cross-validation results of one classifier, pooled over every seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub classifier: String,
    /// Fold accuracies, seed-major.
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (divisor n − 1).
    pub std: f64,
    /// Rows are true labels, columns predictions.
    pub confusion: [[u64; 2]; 2],
    pub seeds: Vec<u64>,
    pub folds: usize,
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One train/test split handed to a fold evaluator.
#[derive(Debug, Clone, Copy)]
pub struct FoldContext<'a> {
    pub seed: u64,
    pub fold: usize,
    pub train: &'a [usize],
    pub test: &'a [usize],
}

/// Runs stratified `k`-fold CV for every seed. `fit_predict` returns one
/// prediction vector (aligned with `ctx.test`) per classifier in `names`.
///
/// Folds run in parallel; every reduction happens afterwards in seed and fold
/// order, so results do not depend on scheduling.
pub fn cross_validate_with<F>(
    names: &[String],
    labels: &[u32],
    k: usize,
    seeds: &[u64],
    fit_predict: F,
) -> Result<Vec<EvalReport>, EvalError>
where
    F: Fn(FoldContext<'_>) -> Result<Vec<Vec<u32>>, EvalError> + Sync,
{
    if seeds.is_empty() {
        return Err(EvalError::Invalid("at least one seed is required".into()));
    }
    if let Some(&l) = labels.iter().find(|&&l| l > 1) {
        return Err(EvalError::Invalid(format!("label {l} is not binary")));
    }
    let mut splits = Vec::new();
    for &seed in seeds {
        let folds = stratified_kfold(labels, k, seed)?;
        for (fold, test) in folds.into_iter().enumerate() {
            let mut in_test = vec![false; labels.len()];
            test.iter().for_each(|&i| in_test[i] = true);
            let train: Vec<usize> = (0..labels.len()).filter(|&i| !in_test[i]).collect();
            assert!(
                train.iter().all(|&i| !in_test[i]) && train.len() + test.len() == labels.len(),
                "train and test indices must be disjoint"
            );
            splits.push((seed, fold, train, test));
        }
    }

    let outcomes: Vec<Result<Vec<Vec<u32>>, EvalError>> = splits
        .par_iter()
        .map(|(seed, fold, train, test)| {
            let ctx = FoldContext {
                seed: *seed,
                fold: *fold,
                train,
                test,
            };
            let preds = fit_predict(ctx)?;
            if preds.len() != names.len() || preds.iter().any(|p| p.len() != test.len()) {
                return Err(EvalError::Invalid(
                    "fold evaluator returned misaligned predictions".into(),
                ));
            }
            Ok(preds)
        })
        .collect();

    let mut accs = vec![Vec::with_capacity(splits.len()); names.len()];
    let mut confusion = vec![[[0u64; 2]; 2]; names.len()];
    for ((seed, fold, _, test), outcome) in splits.iter().zip(outcomes) {
        let preds = outcome.map_err(|e| EvalError::Fold {
            seed: *seed,
            fold: *fold,
            source: Box::new(e),
        })?;
        for (c, p) in preds.iter().enumerate() {
            let mut correct = 0usize;
            for (&i, &pred) in test.iter().zip(p) {
                if pred > 1 {
                    return Err(EvalError::Invalid(format!(
                        "prediction {pred} is not binary"
                    )));
                }
                confusion[c][labels[i] as usize][pred as usize] += 1;
                correct += usize::from(pred == labels[i]);
            }
            accs[c].push(correct as f64 / test.len() as f64);
        }
    }
    Ok(names
        .iter()
        .zip(accs)
        .zip(confusion)
        .map(|((name, fold_accuracies), confusion)| {
            let (mean, std) = mean_std(&fold_accuracies);
            EvalReport {
                classifier: name.clone(),
                fold_accuracies,
                mean,
                std,
                confusion,
                seeds: seeds.to_vec(),
                folds: k,
            }
        })
        .collect())
}

fn pick<T: Clone>(items: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| items[i].clone()).collect()
}

/// Ranks are capped by the smallest class in the training fold.
fn smallest_class(labels: &[u32]) -> usize {
    (0..=1u32)
        .map(|c| labels.iter().filter(|&&l| l == c).count())
        .filter(|&n| n > 0)
        .min()
        .unwrap_or(0)
}

fn argmax_low(values: &[f64]) -> u32 {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best as u32
}

fn predict_features(
    spec: ClassifierSpec,
    train_x: &[Vec<f64>],
    train_y: &[u32],
    test_x: &[Vec<f64>],
    opts: &EvalOptions,
    elm_seed: u64,
) -> Result<Vec<u32>, EvalError> {
    match spec {
        ClassifierSpec::Hosvd => {
            let dim = train_x.first().map_or(0, Vec::len);
            let rank = opts.vector_rank.min(smallest_class(train_y)).min(dim);
            let model = train_vector_mode_from_samples(train_x, train_y, rank.max(1))?;
            test_x
                .iter()
                .map(|x| Ok(model.classify(Sample::Vector(x))?.label))
                .collect()
        }
        ClassifierSpec::Knn(k) => test_x
            .iter()
            .map(|x| knn_classify(train_x, train_y, x, k))
            .collect(),
        ClassifierSpec::Elm => {
            let model = elm_train(train_x, train_y, opts.elm_hidden, elm_seed)?;
            test_x.iter().map(|x| model.classify(x)).collect()
        }
        ClassifierSpec::HosvdMatrix | ClassifierSpec::CnnHead => {
            unreachable!("handled by the caller")
        }
    }
}

/// Evaluates every classifier in `specs` over the same folds and seeds.
///
/// Feature-vector datasets feed the classifiers directly. For image datasets
/// a CNN is trained on each training fold (never on its test fold); its
/// hidden-layer features feed the vector classifiers, its logits give the
/// `cnn` head, and `hosvd-matrix` uses the raw images.
pub fn evaluate(
    ds: &LabeledDataset,
    specs: &[ClassifierSpec],
    seeds: &[u64],
    opts: &EvalOptions,
) -> Result<Vec<EvalReport>, EvalError> {
    if specs.is_empty() {
        return Err(EvalError::Invalid("no classifiers selected".into()));
    }
    let kind = ds.kind();
    if let Some(s) = specs.iter().find(|s| !s.supports(kind)) {
        return Err(EvalError::Unsupported {
            classifier: s.name(),
            kind: kind.name(),
        });
    }
    let names: Vec<String> = specs.iter().map(ClassifierSpec::name).collect();
    let labels = &ds.labels;

    cross_validate_with(&names, labels, opts.folds, seeds, |ctx| {
        let train_y = pick(labels, ctx.train);
        let elm_seed = ctx.seed.wrapping_add(ctx.fold as u64);
        match &ds.samples {
            Samples::Features(x) => {
                let (train_x, test_x) = (pick(x, ctx.train), pick(x, ctx.test));
                specs
                    .iter()
                    .map(|&s| predict_features(s, &train_x, &train_y, &test_x, opts, elm_seed))
                    .collect()
            }
            Samples::Images(images) => {
                let train_imgs = pick(images, ctx.train);
                let test_imgs = pick(images, ctx.test);
                let extracted = if specs.iter().any(ClassifierSpec::needs_features) {
                    let net = train_fold_cnn(&train_imgs, &train_y, ctx.seed, &opts.cnn)?;
                    Some((
                        extract_batch(&net, &train_imgs)?,
                        extract_batch(&net, &test_imgs)?,
                    ))
                } else {
                    None
                };
                specs
                    .iter()
                    .map(|&s| match s {
                        ClassifierSpec::HosvdMatrix => {
                            let (h, w) = train_imgs[0].shape();
                            let [k1, k2, k3] = opts.matrix_ranks;
                            let ranks = [
                                k1.min(h),
                                k2.min(w),
                                k3.min(smallest_class(&train_y)).max(1),
                            ];
                            let model = train_matrix_mode(&train_imgs, &train_y, ranks)?;
                            test_imgs
                                .iter()
                                .map(|m| Ok(model.classify(Sample::Matrix(m))?.label))
                                .collect()
                        }
                        ClassifierSpec::CnnHead => {
                            let (_, test) = extracted.as_ref().expect("features extracted");
                            Ok(test.iter().map(|(_, logits)| argmax_low(logits)).collect())
                        }
                        _ => {
                            let (train, test) = extracted.as_ref().expect("features extracted");
                            let train_x: Vec<Vec<f64>> =
                                train.iter().map(|(f, _)| f.0.clone()).collect();
                            let test_x: Vec<Vec<f64>> =
                                test.iter().map(|(f, _)| f.0.clone()).collect();
                            predict_features(s, &train_x, &train_y, &test_x, opts, elm_seed)
                        }
                    })
                    .collect()
            }
        }
    })
}

/// Single-classifier, single-seed convenience wrapper around [`evaluate`].
pub fn cross_validate(
    spec: ClassifierSpec,
    ds: &LabeledDataset,
    k: usize,
    seed: u64,
) -> Result<EvalReport, EvalError> {
    let opts = EvalOptions {
        folds: k,
        ..EvalOptions::default()
    };
    Ok(evaluate(ds, &[spec], &[seed], &opts)?.remove(0))
}

/// Trains the standard-architecture CNN (input side taken from the images).
pub fn train_fold_cnn(
    images: &[Matrix],
    labels: &[u32],
    shuffle_seed: u64,
    cfg: &CnnTraining,
) -> Result<CnnNetwork, EvalError> {
    let side = images.first().ok_or(EvalError::EmptyTraining)?.rows();
    let descriptor = CnnDescriptor {
        input_side: side,
        ..CnnDescriptor::STANDARD
    };
    let net = CnnNetwork::init(descriptor, cfg.init_seed)?;
    if cfg.epochs == 0 {
        return Ok(net);
    }
    let (net, trace) = train_sgd(
        &net,
        images,
        labels,
        cfg.epochs,
        cfg.learning_rate,
        shuffle_seed,
    )?;
    tracing::debug!(?trace, "fold cnn trained");
    Ok(net)
}

/// Seeds `first, first + 1, …` for `repeats` repetitions.
pub fn seed_range(first: u64, repeats: usize) -> Vec<u64> {
    (0..repeats as u64).map(|i| first.wrapping_add(i)).collect()
}
