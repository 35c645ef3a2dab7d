//! The `hosvd` command line. Batch work runs in-process; `serve` starts the
//! HTTP service and `classify --server` goes through the HTTP client.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hosvd_client::Client;
use hosvd_core::api::{model_id, ClassifyResponse};
use hosvd_core::classifier::{
    model_from_bytes, save_model, DEFAULT_MATRIX_RANKS, DEFAULT_VECTOR_RANK,
};
use hosvd_core::cnn::{extract_batch, load_network, save_network};
use hosvd_core::data::{
    load_dataset, read_features_csv, synth_dataset, write_features_csv, write_image_dataset,
    LabeledDataset, Samples, SynthKind, DEFAULT_IMAGE_SEPARATION, DEFAULT_SIDE,
};
use hosvd_core::eval::{
    evaluate, parse_classifier_list, seed_range, CnnTraining, EvalOptions, EvalSummary,
    DEFAULT_ELM_HIDDEN, DEFAULT_FOLDS, DEFAULT_REPEATS, DEFAULT_SEED,
};
use hosvd_core::pipeline::{train_pipeline, Pipeline, TrainMode};
use hosvd_service::{ServiceConfig, DEFAULT_MAX_BODY, DEFAULT_PORT};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Default separation for synthetic feature vectors.
const DEFAULT_FEATURE_SEPARATION: f64 = 6.0;

#[derive(Debug, Parser)]
#[command(
    name = "hosvd",
    version,
    about = "HOSVD residual classification of blood-cell images"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model (and, in vector mode on images, its CNN).
    Train(TrainArgs),
    /// Classify one image, locally or through a running service.
    Classify(ClassifyArgs),
    /// Cross-validate classifiers and compare them with ANOVA.
    Evaluate(EvaluateArgs),
    /// Write CNN feature vectors of an image dataset to CSV.
    ExtractFeatures(ExtractArgs),
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Run the HTTP classification service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Vector,
    Matrix,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Images,
    Features,
}

#[derive(Debug, Args)]
struct CnnArgs {
    /// CNN training epochs.
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    /// CNN SGD learning rate.
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Dataset directory (healthy/, ALL/) or a feature CSV.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "vector")]
    mode: ModeArg,
    /// Vector-mode rank.
    #[arg(long, default_value_t = DEFAULT_VECTOR_RANK)]
    rank: usize,
    /// Matrix-mode ranks k1,k2,k3.
    #[arg(long, value_delimiter = ',')]
    ranks: Option<Vec<usize>>,
    /// Where to write the trained CNN (vector mode on images).
    #[arg(long)]
    cnn: Option<PathBuf>,
    /// CNN initialization and shuffling seed.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_SIDE)]
    side: usize,
    #[command(flatten)]
    training: CnnArgs,
    /// Output model file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    /// Model file (local classification).
    #[arg(long, required_unless_present = "server")]
    model: Option<PathBuf>,
    /// CNN file, required for vector-mode models.
    #[arg(long)]
    cnn: Option<PathBuf>,
    /// P5/P6 image to classify.
    #[arg(long)]
    image: PathBuf,
    /// Service base URL, e.g. http://127.0.0.1:8080.
    #[arg(long, conflicts_with_all = ["model", "cnn"])]
    server: Option<String>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Dataset directory (healthy/, ALL/) or a feature CSV.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    folds: usize,
    /// First fold seed; repetition i uses seed + i.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Number of cross-validation repetitions.
    #[arg(long, default_value_t = DEFAULT_REPEATS)]
    repeats: usize,
    /// Comma-separated: hosvd, hosvd-matrix, 1nn, 5nn, elm, cnn.
    /// Defaults to hosvd,1nn,5nn,elm,cnn (without cnn for feature CSVs).
    #[arg(long)]
    classifiers: Option<String>,
    #[arg(long, default_value_t = DEFAULT_VECTOR_RANK)]
    rank: usize,
    #[arg(long, value_delimiter = ',')]
    ranks: Option<Vec<usize>>,
    #[arg(long, default_value_t = DEFAULT_ELM_HIDDEN)]
    elm_hidden: usize,
    /// CNN initialization seed for the per-fold networks.
    #[arg(long, default_value_t = 42)]
    cnn_seed: u64,
    #[command(flatten)]
    training: CnnArgs,
    #[arg(long, default_value_t = DEFAULT_SIDE)]
    side: usize,
    /// Also write the machine-readable summary here.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Also write the text report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[arg(long)]
    cnn: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    per_class: usize,
    #[arg(long, value_enum, default_value = "images")]
    kind: KindArg,
    /// Feature dimension (features kind).
    #[arg(long, default_value_t = 128)]
    dim: usize,
    /// Image side (images kind).
    #[arg(long, default_value_t = DEFAULT_SIDE)]
    side: usize,
    /// Class separation; defaults to 4 for images and 6 for features.
    #[arg(long)]
    separation: Option<f64>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    cnn: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_PORT, value_parser = clap::value_parser!(u16).range(1..))]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    bind: std::net::IpAddr,
    #[arg(long, default_value_t = DEFAULT_MAX_BODY)]
    max_body: usize,
}

/// Errors detected after parsing that still count as usage errors.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

fn init_logging() {
    let level = match std::env::var("HOSVD_LOG").as_deref() {
        Ok("debug") => tracing::Level::DEBUG,
        Ok("info") => tracing::Level::INFO,
        Ok("warn") => tracing::Level::WARN,
        _ => tracing::Level::ERROR,
    };
    let _ = tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .try_init();
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    EXIT_OK
                }
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    eprint!("{e}");
                    EXIT_USAGE
                }
                _ => {
                    let rendered = e.render().to_string();
                    eprint!("{rendered}");
                    if !rendered.contains("Usage:") {
                        use clap::CommandFactory;
                        eprintln!("\n{}", Cli::command().render_usage());
                    }
                    EXIT_USAGE
                }
            };
        }
    };
    init_logging();
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            eprintln!("run `hosvd --help` for usage");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_RUNTIME
        }
    }
}

fn dispatch(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Train(a) => train(a),
        Command::Classify(a) => classify(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::ExtractFeatures(a) => extract(a),
        Command::Synth(a) => synth(a),
        Command::Serve(a) => serve(a),
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn load_any(path: &Path, side: usize) -> anyhow::Result<LabeledDataset> {
    let ds = if is_csv(path) {
        read_features_csv(path)?
    } else {
        load_dataset(path, side)?
    };
    if ds.skipped > 0 {
        eprintln!(
            "warning: skipped {} file(s) with unsupported extensions",
            ds.skipped
        );
    }
    tracing::info!(path = %path.display(), samples = ds.len(), kind = ?ds.kind(), "loaded dataset");
    Ok(ds)
}

fn matrix_ranks(ranks: Option<Vec<usize>>) -> anyhow::Result<[usize; 3]> {
    match ranks.as_deref() {
        None => Ok(DEFAULT_MATRIX_RANKS),
        Some(&[k1, k2, k3]) => Ok([k1, k2, k3]),
        Some(other) => Err(usage(format!(
            "--ranks takes three values k1,k2,k3, got {}",
            other.len()
        ))),
    }
}

fn cnn_training(a: &CnnArgs, init_seed: u64) -> anyhow::Result<CnnTraining> {
    if !(a.lr > 0.0 && a.lr.is_finite()) {
        return Err(usage(format!("--lr must be positive, got {}", a.lr)));
    }
    Ok(CnnTraining {
        init_seed,
        epochs: a.epochs,
        learning_rate: a.lr,
    })
}

fn train(a: TrainArgs) -> anyhow::Result<()> {
    let mode = match a.mode {
        ModeArg::Vector => TrainMode::Vector { rank: a.rank },
        ModeArg::Matrix => TrainMode::Matrix {
            ranks: matrix_ranks(a.ranks)?,
        },
    };
    let images = !is_csv(&a.data);
    if images && matches!(mode, TrainMode::Vector { .. }) && a.cnn.is_none() {
        return Err(usage(
            "vector mode on images needs --cnn PATH to store the feature extractor",
        ));
    }
    let cfg = cnn_training(&a.training, a.seed)?;
    let ds = load_any(&a.data, a.side)?;
    let started = Instant::now();
    let (model, net) = train_pipeline(&ds, mode, &cfg, a.seed)?;
    save_model(&model, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    if let (Some(net), Some(path)) = (&net, &a.cnn) {
        save_network(net, path).with_context(|| format!("writing {}", path.display()))?;
    }
    println!(
        "trained {:?}-mode model on {} samples in {:.2?}; wrote {}",
        model.mode(),
        ds.len(),
        started.elapsed(),
        a.out.display()
    );
    Ok(())
}

fn print_response(r: &ClassifyResponse) {
    println!("{}", r.label);
    println!(
        "residuals: healthy={} ALL={} margin={} model_id={}",
        r.residuals.healthy, r.residuals.all, r.margin, r.model_id
    );
}

fn classify(a: ClassifyArgs) -> anyhow::Result<()> {
    let bytes =
        std::fs::read(&a.image).with_context(|| format!("reading {}", a.image.display()))?;
    if let Some(url) = a.server {
        let rt = tokio::runtime::Runtime::new()?;
        let resp = rt.block_on(Client::new(&url).classify(bytes))?;
        print_response(&resp);
        return Ok(());
    }
    let model_path = a.model.expect("clap requires --model without --server");
    let model_bytes =
        std::fs::read(&model_path).with_context(|| format!("reading {}", model_path.display()))?;
    let model = model_from_bytes(&model_bytes)
        .with_context(|| format!("loading {}", model_path.display()))?;
    let cnn = a
        .cnn
        .as_ref()
        .map(|p| load_network(p).with_context(|| format!("loading {}", p.display())))
        .transpose()?;
    let pipeline = Pipeline::new(model, cnn)?;
    let result = pipeline
        .classify_image_bytes(&bytes)
        .with_context(|| format!("classifying {}", a.image.display()))?;
    print_response(&ClassifyResponse::from_result(
        &result,
        pipeline.model().class_labels(),
        &model_id(&model_bytes),
    ));
    Ok(())
}

fn run_evaluate(a: EvaluateArgs) -> anyhow::Result<()> {
    if a.repeats == 0 {
        return Err(usage("--repeats must be at least 1"));
    }
    let ds = load_any(&a.data, a.side)?;
    let specs = match &a.classifiers {
        Some(list) => parse_classifier_list(list).map_err(|e| usage(e.to_string()))?,
        None => {
            let all = if matches!(ds.samples, Samples::Images(_)) {
                "hosvd,1nn,5nn,elm,cnn"
            } else {
                "hosvd,1nn,5nn,elm"
            };
            parse_classifier_list(all)?
        }
    };
    let opts = EvalOptions {
        folds: a.folds,
        vector_rank: a.rank,
        matrix_ranks: matrix_ranks(a.ranks)?,
        elm_hidden: a.elm_hidden,
        cnn: cnn_training(&a.training, a.cnn_seed)?,
    };
    let started = Instant::now();
    let reports = evaluate(&ds, &specs, &seed_range(a.seed, a.repeats), &opts)?;
    let summary = EvalSummary::new(reports)?;
    let text = summary.to_text();
    print!("{text}");
    eprintln!(
        "evaluated {} samples in {:.2?}",
        ds.len(),
        started.elapsed()
    );
    if let Some(p) = &a.json {
        std::fs::write(p, summary.to_json()).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &a.report {
        std::fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn extract(a: ExtractArgs) -> anyhow::Result<()> {
    let net = load_network(&a.cnn).with_context(|| format!("loading {}", a.cnn.display()))?;
    let ds = load_any(&a.data, net.descriptor.input_side)?;
    let images = ds
        .images()
        .map_err(|_| usage("--data must be an image dataset directory"))?;
    let feats = extract_batch(&net, images)?
        .into_iter()
        .map(|(f, _)| f.0)
        .collect();
    let out = LabeledDataset::new(
        Samples::Features(feats),
        ds.labels.clone(),
        ds.names.clone(),
    )?;
    write_features_csv(&out, &a.out)?;
    println!("wrote {} feature vectors to {}", out.len(), a.out.display());
    Ok(())
}

fn synth(a: SynthArgs) -> anyhow::Result<()> {
    if a.per_class == 0 {
        return Err(usage("--per-class must be at least 1"));
    }
    let (kind, default_sep) = match a.kind {
        KindArg::Images => (SynthKind::Images { side: a.side }, DEFAULT_IMAGE_SEPARATION),
        KindArg::Features => (
            SynthKind::Features { dim: a.dim },
            DEFAULT_FEATURE_SEPARATION,
        ),
    };
    let separation = a.separation.unwrap_or(default_sep);
    if !(separation.is_finite() && separation >= 0.0) {
        return Err(usage("--separation must be finite and nonnegative"));
    }
    if a.side == 0 || a.dim == 0 {
        return Err(usage("--side and --dim must be positive"));
    }
    let ds = synth_dataset(a.seed, a.per_class, kind, separation);
    match kind {
        SynthKind::Images { .. } => {
            write_image_dataset(&ds, &a.out)?;
            println!("wrote {} images to {}", ds.len(), a.out.display());
        }
        SynthKind::Features { .. } => {
            std::fs::create_dir_all(&a.out)
                .with_context(|| format!("creating {}", a.out.display()))?;
            let path = a.out.join("features.csv");
            write_features_csv(&ds, &path)?;
            println!("wrote {} feature vectors to {}", ds.len(), path.display());
        }
    }
    Ok(())
}

fn serve(a: ServeArgs) -> anyhow::Result<()> {
    let cfg = ServiceConfig {
        bind: a.bind,
        port: a.port,
        model_path: a.model,
        cnn_path: a.cnn,
        max_body_bytes: a.max_body,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(hosvd_service::run(cfg))
        .map_err(|e| anyhow!(e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parser_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_cli(["hosvd", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run_cli(["hosvd", "train", "--bogus"]), EXIT_USAGE);
        assert_eq!(run_cli(["hosvd"]), EXIT_USAGE);
        assert_eq!(
            run_cli(["hosvd", "serve", "--model", "m", "--port", "0"]),
            EXIT_USAGE
        );
        assert_eq!(run_cli(["hosvd", "--version"]), EXIT_OK);
        assert_eq!(
            run_cli([
                "hosvd", "train", "--data", "d", "--out", "m", "--mode", "matrix", "--ranks", "1,2"
            ]),
            EXIT_USAGE
        );
    }

    #[test]
    fn runtime_errors_exit_two() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("none");
        let m = missing.to_str().unwrap();
        assert_eq!(
            run_cli(["hosvd", "classify", "--model", m, "--image", m]),
            EXIT_RUNTIME
        );
        assert_eq!(run_cli(["hosvd", "evaluate", "--data", m]), EXIT_RUNTIME);
    }

    #[test]
    fn vector_train_needs_cnn_path() {
        assert_eq!(
            run_cli(["hosvd", "train", "--data", "d", "--out", "m"]),
            EXIT_USAGE
        );
    }
}
