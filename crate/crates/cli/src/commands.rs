use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::thread;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use canids_core::baselines::{build_mlp, knn_fit, tree_fit};
use canids_core::canbus::{simulate, write_kinds, write_log, AttackKind, AttackSpec, Label, SimProfile};
use canids_core::ingest::{
    manifest_text, parse_log, parse_manifest, prepare, read_dataset, write_dataset, FeatureVector, ImputePolicy, PrepareConfig,
    PreparedDataset, Provenance, SplitConfig,
};
use canids_core::nn::{grad_check, Network, Tensor};
use canids_core::plenet::{build_plenet, predict, train, transfer_finetune, FreezeMode, TrainConfig, TrainHistory};

use crate::checkpoint::{config_digest, load_checkpoint, save_checkpoint, Checkpoint};
use crate::config::ConfigFile;
use crate::metrics::{confusion_labels, metrics, per_kind_recall, roc_auc, MetricsError, MetricsReport};
use crate::report::{ModelResult, Report};
use crate::UsageError;

#[derive(Debug, Parser)]
#[command(name = "canids", version, about = "CAN-bus intrusion detection pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled traffic log with injected attacks.
    Simulate(SimulateArgs),
    /// Clean, split and normalize logs into a dataset container.
    Prepare(PrepareArgs),
    /// Train P-LeNet or the MLP baseline on a prepared dataset.
    Train(TrainArgs),
    /// Score a checkpoint on one partition of a dataset.
    Evaluate(EvaluateArgs),
    /// Fine-tune a checkpoint on a target-domain dataset.
    Transfer(TransferArgs),
    /// Fit P-LeNet, KNN, a decision tree and the MLP on one dataset and tabulate them.
    Compare(CompareArgs),
    /// Check backpropagated gradients against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Profile file, or `three-ecu` for the built-in profile.
    #[arg(long, default_value = "three-ecu")]
    pub profile: String,
    /// Overrides the profile duration in seconds (built-in default 100).
    #[arg(long)]
    pub duration: Option<f64>,
    /// `kind:start:end:rate[:id,id,...]`, repeatable. Attack `i` draws from seed + 1 + i.
    #[arg(long = "attack")]
    pub attacks: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ImputeArg {
    Drop,
    Mean,
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// Log files; a `<log>.kinds` sidecar next to a log is picked up automatically.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[arg(long)]
    pub val_fraction: Option<f64>,
    #[arg(long, value_enum)]
    pub impute: Option<ImputeArg>,
    /// Remove rows flagged by Rosner's test instead of only reporting them.
    #[arg(long)]
    pub drop_outliers: bool,
    #[arg(long)]
    pub max_outliers: Option<usize>,
    #[arg(long)]
    pub outlier_alpha: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainFlags {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Plenet,
    Mlp,
}

impl ModelKind {
    fn name(self) -> &'static str {
        match self {
            ModelKind::Plenet => "plenet",
            ModelKind::Mlp => "mlp",
        }
    }

    fn build(self, seed: u64) -> Network {
        match self {
            ModelKind::Plenet => build_plenet(seed),
            ModelKind::Mlp => build_mlp(seed),
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "plenet")]
    pub model: ModelKind,
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Per-epoch CSV; defaults to `<output>.history.csv`.
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Validation,
    Test,
}

impl SplitArg {
    fn name(self) -> &'static str {
        match self {
            SplitArg::Train => "train",
            SplitArg::Validation => "validation",
            SplitArg::Test => "test",
        }
    }

    fn rows(self, ds: &PreparedDataset) -> &[FeatureVector] {
        match self {
            SplitArg::Train => &ds.train,
            SplitArg::Validation => &ds.validation,
            SplitArg::Test => &ds.test,
        }
    }
}

#[derive(Debug, Args)]
pub struct ReportFlags {
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    /// Also write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Append a note on the published reference figures.
    #[arg(long)]
    pub reference: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub report: ReportFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FreezeArg {
    ConvFrozen,
    None,
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    /// Checkpoint trained on the source domain.
    #[arg(long)]
    pub source: PathBuf,
    /// Target-domain dataset.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "none")]
    pub freeze: FreezeArg,
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 12)]
    pub k: usize,
    #[arg(long, default_value_t = 12)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 1)]
    pub min_leaf: usize,
    /// Use this P-LeNet checkpoint instead of training one.
    #[arg(long)]
    pub plenet: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainFlags,
    #[command(flatten)]
    pub report: ReportFlags,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
    #[arg(long, default_value_t = 4)]
    pub batch: usize,
    #[arg(long, default_value_t = canids_core::nn::DEFAULT_STEP)]
    pub step: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub tolerance: f64,
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Prepare(a) => cmd_prepare(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Transfer(a) => cmd_transfer(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// `path` with `suffix` appended to the full file name.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let mut profile = if a.profile == "three-ecu" {
        SimProfile::three_ecu(100.0, 0)
    } else {
        let text = fs::read_to_string(&a.profile).map_err(|e| usage(format!("cannot read profile {}: {e}", a.profile)))?;
        text.parse::<SimProfile>().map_err(|e| usage(format!("profile {}: {e}", a.profile)))?
    };
    if let Some(d) = a.duration {
        profile.duration = d;
    }
    if let Some(s) = a.seed {
        profile.seed = s;
    }
    let specs = a
        .attacks
        .iter()
        .enumerate()
        .map(|(i, t)| AttackSpec::parse(t, profile.seed.wrapping_add(1 + i as u64)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| usage(e.to_string()))?;
    let log = simulate(&profile, &specs).map_err(|e| usage(e.to_string()))?;
    let out = BufWriter::new(File::create(&a.output).with_context(|| format!("creating {}", a.output.display()))?);
    write_log(out, &log)?;
    let kinds_path = sidecar(&a.output, ".kinds");
    write_kinds(BufWriter::new(File::create(&kinds_path).with_context(|| format!("creating {}", kinds_path.display()))?), &log)?;
    let attacks = log.iter().filter(|r| r.label == Label::Attack).count();
    println!("wrote {} records ({} injected) to {}", log.len(), attacks, a.output.display());
    Ok(())
}

fn cmd_prepare(a: PrepareArgs) -> Result<()> {
    let file = a.config.as_deref().map(ConfigFile::load).transpose()?.unwrap_or_default();
    let impute = match a.impute {
        Some(ImputeArg::Drop) => ImputePolicy::DropRow,
        Some(ImputeArg::Mean) => ImputePolicy::FieldMean,
        None => file.get::<ImputePolicy>("impute")?.unwrap_or_default(),
    };
    let split = SplitConfig {
        test_fraction: file.resolve("test_fraction", a.test_fraction, 0.2)?,
        val_fraction: file.resolve("val_fraction", a.val_fraction, 0.2)?,
        seed: file.resolve("seed", a.seed, 0)?,
    };
    for (name, f) in [("test_fraction", split.test_fraction), ("val_fraction", split.val_fraction)] {
        if !(0.0..1.0).contains(&f) {
            return Err(usage(format!("{name} must be in [0, 1), got {f}")));
        }
    }
    let cfg = PrepareConfig {
        impute,
        split,
        drop_outliers: a.drop_outliers || file.get("drop_outliers")?.unwrap_or(false),
        max_outliers: file.resolve("max_outliers", a.max_outliers, 10)?,
        outlier_alpha: file.resolve("outlier_alpha", a.outlier_alpha, 0.05)?,
    };

    let mut raw = Vec::new();
    let mut kinds: Vec<Option<AttackKind>> = Vec::new();
    let mut any_kinds = false;
    for input in &a.inputs {
        let f = File::open(input).with_context(|| format!("opening {}", input.display()))?;
        let rows = parse_log(BufReader::new(f)).with_context(|| format!("parsing {}", input.display()))?;
        let kpath = sidecar(input, ".kinds");
        if kpath.exists() {
            let k = canids_core::canbus::read_kinds(BufReader::new(File::open(&kpath)?))
                .with_context(|| format!("reading {}", kpath.display()))?;
            if k.len() != rows.len() {
                bail!("{} lists {} rows but {} has {}", kpath.display(), k.len(), input.display(), rows.len());
            }
            kinds.extend(k);
            any_kinds = true;
        } else {
            kinds.extend(std::iter::repeat_n(None, rows.len()));
        }
        raw.extend(rows);
    }
    let source = a.inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(",");
    let (ds, report) = prepare(&raw, any_kinds.then_some(&kinds[..]), &cfg, &source)?;

    let out = BufWriter::new(File::create(&a.output).with_context(|| format!("creating {}", a.output.display()))?);
    write_dataset(out, &ds)?;
    let extra = vec![
        ("impute".to_string(), format!("{:?}", cfg.impute)),
        ("drop_outliers".to_string(), cfg.drop_outliers.to_string()),
        ("test_fraction".to_string(), cfg.split.test_fraction.to_string()),
        ("val_fraction".to_string(), cfg.split.val_fraction.to_string()),
        ("raw_rows".to_string(), report.raw_rows.to_string()),
        ("clean_rows".to_string(), report.clean_rows.to_string()),
    ];
    fs::write(sidecar(&a.output, ".manifest"), manifest_text(&ds, &extra))?;
    fs::write(sidecar(&a.output, ".report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    println!(
        "{} rows -> train {} / validation {} / test {}; {} outlier rows {}",
        report.raw_rows,
        ds.train.len(),
        ds.validation.len(),
        ds.test.len(),
        report.outlier_rows.len(),
        if report.outliers_dropped { "dropped" } else { "flagged" }
    );
    if let Some(m) = &report.correlation {
        if let Some(r) = m.get("CAN_ID", "Data_Field") {
            println!("pearson(CAN_ID, Data_Field) = {r:.4}");
        }
    }
    if let Some(note) = &report.correlation_note {
        println!("{note}");
    }
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<PreparedDataset> {
    let manifest = sidecar(path, ".manifest");
    let provenance = match fs::read_to_string(&manifest) {
        Ok(text) => parse_manifest(&text),
        Err(_) => Provenance { source: path.display().to_string(), seed: 0 },
    };
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_dataset(BufReader::new(f), provenance).with_context(|| format!("reading {}", path.display()))
}

/// Training settings from flags, then the config file, then defaults.
pub fn resolve_train_config(flags: &TrainFlags) -> Result<TrainConfig> {
    let file = flags.config.as_deref().map(ConfigFile::load).transpose()?.unwrap_or_default();
    let d = TrainConfig::default();
    let cfg = TrainConfig {
        epochs: file.resolve("epochs", flags.epochs, d.epochs)?,
        batch_size: file.resolve("batch_size", flags.batch_size, d.batch_size)?,
        lr: file.resolve("lr", flags.lr, d.lr)?,
        patience: file.resolve("patience", flags.patience, d.patience)?,
        seed: file.resolve("seed", flags.seed, d.seed)?,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn config_text(model: &str, cfg: &TrainConfig) -> String {
    format!(
        "model = {model}\nepochs = {}\nbatch_size = {}\nlr = {:?}\npatience = {}\nseed = {}\n",
        cfg.epochs, cfg.batch_size, cfg.lr, cfg.patience, cfg.seed
    )
}

fn write_outputs(
    net: Network,
    ds: &PreparedDataset,
    model: &str,
    cfg: &TrainConfig,
    hist: &TrainHistory,
    out: &Path,
    history: Option<&Path>,
) -> Result<()> {
    let ckpt = Checkpoint { network: net, norm: ds.norm.clone(), seed: cfg.seed, config_digest: config_digest(&config_text(model, cfg)) };
    save_checkpoint(&ckpt, out).with_context(|| format!("writing {}", out.display()))?;
    let hpath = history.map_or_else(|| sidecar(out, ".history.csv"), Path::to_path_buf);
    fs::write(&hpath, hist.to_csv()).with_context(|| format!("writing {}", hpath.display()))?;
    let best = hist.best();
    println!(
        "{} epochs{}; best epoch {} val_acc {:.4} val_loss {:.4}; checkpoint {}",
        hist.epochs.len(),
        if hist.stopped_early { " (early stop)" } else { "" },
        best.epoch,
        best.val_acc,
        best.val_loss,
        out.display()
    );
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let cfg = resolve_train_config(&a.train)?;
    let ds = load_dataset(&a.data)?;
    let (net, hist) = train(&a.model.build(cfg.seed), &ds, &cfg)?;
    write_outputs(net, &ds, a.model.name(), &cfg, &hist, &a.output, a.history.as_deref())
}

fn cmd_transfer(a: TransferArgs) -> Result<()> {
    let cfg = resolve_train_config(&a.train)?;
    let src = load_checkpoint(&a.source)?;
    let ds = load_dataset(&a.data)?;
    let freeze = match a.freeze {
        FreezeArg::ConvFrozen => FreezeMode::ConvFrozen,
        FreezeArg::None => FreezeMode::None,
    };
    let (net, hist) = transfer_finetune(&src.network, &ds, &cfg, freeze)?;
    write_outputs(net, &ds, &format!("transfer-{freeze}"), &cfg, &hist, &a.output, a.history.as_deref())
}

/// Confusion-derived metrics plus ROC AUC (when both classes are present) and
/// per-kind recall (when rows carry attack kinds).
pub fn score_predictions(rows: &[FeatureVector], labels: &[Label], attack_scores: &[f64]) -> Result<MetricsReport> {
    let truth: Vec<Label> = rows.iter().map(|r| r.y).collect();
    let mut m = metrics(&confusion_labels(&truth, labels)?)?;
    let bits: Vec<u8> = truth.iter().map(|l| l.bit()).collect();
    m.roc_auc = match roc_auc(attack_scores, &bits) {
        Ok(r) => Some(r.auc),
        Err(MetricsError::SingleClassInput) => None,
        Err(e) => return Err(e.into()),
    };
    let kinds: Vec<Option<AttackKind>> = rows.iter().map(|r| r.kind).collect();
    m.per_kind = per_kind_recall(&kinds, labels);
    Ok(m)
}

fn score_network(net: &Network, rows: &[FeatureVector]) -> Result<MetricsReport> {
    let preds = predict(net, rows)?;
    let labels: Vec<Label> = preds.iter().map(|p| p.label).collect();
    let scores: Vec<f64> = preds.iter().map(|p| p.p_attack).collect();
    score_predictions(rows, &labels, &scores)
}

fn emit(report: &Report, json: Option<&Path>) -> Result<()> {
    print!("{}", report.to_table());
    if let Some(p) = json {
        fs::write(p, report.to_json()).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let ckpt = load_checkpoint(&a.model)?;
    let ds = load_dataset(&a.data)?;
    if ckpt.norm != ds.norm {
        eprintln!("warning: checkpoint normalization differs from the dataset's");
    }
    let rows = a.report.split.rows(&ds);
    if rows.is_empty() {
        bail!("{} partition is empty", a.report.split.name());
    }
    let name = a.model.file_stem().map_or_else(|| "model".to_string(), |s| s.to_string_lossy().into_owned());
    let m = score_network(&ckpt.network, rows)?;
    let report = Report::new(
        &ds.provenance.source,
        a.report.split.name(),
        rows.len(),
        vec![ModelResult { model: name, metrics: m }],
        a.report.reference,
    );
    emit(&report, a.report.json.as_deref())
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    let cfg = resolve_train_config(&a.train)?;
    if a.k == 0 {
        return Err(usage("k must be at least 1"));
    }
    let ds = load_dataset(&a.data)?;
    let rows = a.report.split.rows(&ds);
    if rows.is_empty() {
        bail!("{} partition is empty", a.report.split.name());
    }
    let pretrained = a.plenet.as_deref().map(load_checkpoint).transpose()?;
    let ds = &ds;
    let results: Vec<Result<ModelResult>> = thread::scope(|s| {
        let plenet = s.spawn(|| -> Result<ModelResult> {
            let net = match &pretrained {
                Some(c) => c.network.clone(),
                None => train(&build_plenet(cfg.seed), ds, &cfg)?.0,
            };
            Ok(ModelResult { model: "plenet".into(), metrics: score_network(&net, rows)? })
        });
        let knn = s.spawn(|| -> Result<ModelResult> {
            let model = knn_fit(&ds.train)?;
            let votes = rows.iter().map(|r| model.predict(&r.x, a.k)).collect::<Result<Vec<_>, _>>()?;
            let labels: Vec<Label> = votes.iter().map(|v| v.label).collect();
            let scores: Vec<f64> = votes.iter().map(|v| v.attack_fraction).collect();
            Ok(ModelResult { model: format!("knn(k={})", a.k), metrics: score_predictions(rows, &labels, &scores)? })
        });
        let dt = s.spawn(|| -> Result<ModelResult> {
            let tree = tree_fit(&ds.train, a.max_depth, a.min_leaf)?;
            let labels: Vec<Label> = rows.iter().map(|r| tree.predict(&r.x)).collect();
            let scores: Vec<f64> = rows.iter().map(|r| tree.attack_score(&r.x)).collect();
            Ok(ModelResult { model: "dt".into(), metrics: score_predictions(rows, &labels, &scores)? })
        });
        let mlp = s.spawn(|| -> Result<ModelResult> {
            let net = train(&build_mlp(cfg.seed), ds, &cfg)?.0;
            Ok(ModelResult { model: "mlp".into(), metrics: score_network(&net, rows)? })
        });
        [plenet, knn, dt, mlp].into_iter().map(|h| h.join().expect("model thread panicked")).collect()
    });
    let models = results.into_iter().collect::<Result<Vec<_>>>()?;
    let report = Report::new(&ds.provenance.source, a.report.split.name(), rows.len(), models, a.report.reference);
    emit(&report, a.report.json.as_deref())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckSummary {
    pub model: &'static str,
    pub max_rel_err: f64,
    pub worst_seed: u64,
    pub checked: usize,
    pub skipped: usize,
}

/// Runs the finite-difference check on P-LeNet and the MLP for seeds
/// `0..seeds`. Seed `s` initializes the network and draws a batch of uniform
/// inputs in `[0, 1)` with random classes.
pub fn gradcheck_suite(seeds: u64, batch: usize, step: f64) -> Result<Vec<GradcheckSummary>> {
    let mut out = Vec::new();
    for kind in [ModelKind::Plenet, ModelKind::Mlp] {
        let mut sum = GradcheckSummary { model: kind.name(), max_rel_err: 0.0, worst_seed: 0, checked: 0, skipped: 0 };
        for seed in 0..seeds {
            let net = kind.build(seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let shape = net.input_shape();
            let xs: Vec<Tensor> =
                (0..batch).map(|_| Tensor::new(shape, (0..shape.size()).map(|_| rng.gen_range(0.0..1.0)).collect())).collect();
            let ys: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..2)).collect();
            let r = grad_check(&net, &xs, &ys, step)?;
            sum.checked += r.checked;
            sum.skipped += r.skipped;
            if r.max_rel_err > sum.max_rel_err {
                sum.max_rel_err = r.max_rel_err;
                sum.worst_seed = seed;
            }
        }
        out.push(sum);
    }
    Ok(out)
}

fn cmd_gradcheck(a: GradcheckArgs) -> Result<()> {
    if a.seeds == 0 || a.batch == 0 || a.step.is_nan() || a.step <= 0.0 {
        return Err(usage("seeds, batch and step must be positive"));
    }
    let results = gradcheck_suite(a.seeds, a.batch, a.step)?;
    let mut worst = 0.0f64;
    for r in &results {
        println!(
            "{:<7} max_rel_err {:.3e} (seed {}), {} checked, {} skipped at kinks",
            r.model, r.max_rel_err, r.worst_seed, r.checked, r.skipped
        );
        worst = worst.max(r.max_rel_err);
    }
    if worst >= a.tolerance {
        bail!("max relative error {worst:.3e} exceeds tolerance {:.1e}", a.tolerance);
    }
    println!("ok: all below {:.1e}", a.tolerance);
    Ok(())
}
