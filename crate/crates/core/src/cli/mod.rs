//! The `homnet` command line: `synth`, `pretrain`, `finetune`, `eval`,
//! `predict` and `gradcheck`. Structured results go to stdout as JSON, logs
//! to stderr.

mod error;
mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

pub use error::{CliError, EXIT_DATA, EXIT_IO, EXIT_NUMERIC, EXIT_USAGE};
pub use manifest::{manifest_path_for, ManifestBuilder, RunManifest};

use crate::data::{load_dataset, save_dataset, BagRecord};
use crate::eval::{lr_baseline, BaselineConfig, EvalReport};
use crate::model::{gradcheck_config, predict_bag, run_gradcheck, AttnNorm, ModelConfig, Prediction};
use crate::synth::{build_pretrain_corpus, make_templates, CorpusConfig, SynthManifest};
use crate::train::{evaluate_bags, finetune, load_checkpoint, pretrain, save_checkpoint, TrainConfig, TrainOutcome};

#[derive(Parser, Debug)]
#[command(name = "homnet", version, about = "Detect structural chromosome abnormalities by comparing homologous pairs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic pretraining corpus (train.jsonl, val.jsonl).
    Synth(SynthArgs),
    /// Train a fresh model with early stopping on validation AUC.
    Pretrain(PretrainArgs),
    /// Adapt a checkpoint to one site's records with frozen layers.
    Finetune(FinetuneArgs),
    /// Score labeled records and report AUC, F1 and confusion counts.
    Eval(EvalArgs),
    /// Print y_hat and pair weights for every bag.
    Predict(PredictArgs),
    /// Compare analytic and finite-difference gradients of the bag loss.
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    /// JSON file with optional "seed", "model", "train", "corpus" and "baseline" sections.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AttnNormArg {
    Softmax,
    RawEps,
}

impl From<AttnNormArg> for AttnNorm {
    fn from(a: AttnNormArg) -> Self {
        match a {
            AttnNormArg::Softmax => AttnNorm::Softmax,
            AttnNormArg::RawEps => AttnNorm::RawEps,
        }
    }
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[command(flatten)]
    common: Common,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    bags: Option<usize>,
    #[arg(long)]
    subjects: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    abnormal_ratio: Option<f64>,
    #[arg(long)]
    mixed_type_ratio: Option<f64>,
    #[arg(long)]
    val_fraction: Option<f64>,
}

#[derive(Args, Debug)]
struct TrainFlags {
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Args, Debug)]
struct PretrainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    val: PathBuf,
    /// Checkpoint path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    attn_norm: Option<AttnNormArg>,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Args, Debug)]
struct FinetuneArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    ckpt: PathBuf,
    /// One site's labeled records; split by subject into train and test.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated tensor-name prefixes to freeze.
    #[arg(long)]
    freeze: Option<String>,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, required_unless_present = "baseline_train")]
    ckpt: Option<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    /// Also write the report JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-record scores as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value_t = crate::eval::DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Evaluate the handcrafted-feature logistic regression trained on this file instead.
    #[arg(long, conflicts_with = "ckpt")]
    baseline_train: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    attn_norm: Option<AttnNormArg>,
    #[arg(long, default_value_t = 1e-5)]
    h: f64,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
}

/// Parsed `--config` file.
struct FileConfig(serde_json::Map<String, Value>);

const CONFIG_SECTIONS: [&str; 5] = ["seed", "model", "train", "corpus", "baseline"];

impl FileConfig {
    fn load(common: &Common) -> Result<Self, CliError> {
        let Some(path) = &common.config else {
            return Ok(Self(Default::default()));
        };
        let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        let value: Value = serde_json::from_str(&text)?;
        let Value::Object(map) = value else {
            return Err(CliError::usage("config file must hold a JSON object"));
        };
        if let Some(k) = map.keys().find(|k| !CONFIG_SECTIONS.contains(&k.as_str())) {
            return Err(CliError::usage(format!("config: unknown section {k:?}")));
        }
        Ok(Self(map))
    }

    fn section<T: Serialize + DeserializeOwned>(&self, name: &str, default: T) -> Result<T, CliError> {
        let mut base = serde_json::to_value(default)?;
        if let Some(overlay) = self.0.get(name) {
            merge(&mut base, overlay);
        }
        Ok(serde_json::from_value(base)?)
    }

    fn has(&self, section: &str, key: &str) -> bool {
        self.0.get(section).and_then(|s| s.get(key)).is_some()
    }

    fn seed(&self, common: &Common) -> Result<u64, CliError> {
        match (common.seed, self.0.get("seed")) {
            (Some(s), _) => Ok(s),
            (None, Some(v)) => v.as_u64().ok_or_else(|| CliError::usage("config: seed must be a non-negative integer")),
            (None, None) => Ok(0),
        }
    }
}

fn merge(base: &mut Value, overlay: &Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}

/// Pretty JSON on stdout; a closed pipe on the reading side is not an error.
fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value).map_err(CliError::io)?;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn with_path(path: &Path, e: impl Into<CliError>) -> CliError {
    let e = e.into();
    CliError {
        message: format!("{}: {}", path.display(), e.message),
        ..e
    }
}

fn open_checkpoint(path: &Path) -> Result<crate::train::Checkpoint, CliError> {
    load_checkpoint(path).map_err(|e| with_path(path, e))
}

fn load(path: &Path) -> Result<Vec<BagRecord>, CliError> {
    load_dataset(path).map_err(|e| with_path(path, e))
}

fn apply_train_flags(tcfg: &mut TrainConfig, flags: &TrainFlags, seed: u64) {
    tcfg.seed = seed;
    if let Some(v) = flags.batch_size {
        tcfg.batch_size = v;
    }
    if let Some(v) = flags.lr {
        tcfg.lr = v;
    }
    if let Some(v) = flags.epochs {
        tcfg.max_epochs = v;
    }
    if let Some(v) = flags.patience {
        tcfg.patience = v;
    }
    if flags.max_steps.is_some() {
        tcfg.max_steps = flags.max_steps;
    }
}

fn outcome_summary(out: &Path, outcome: &TrainOutcome) -> Value {
    let meta = &outcome.checkpoint.metadata;
    json!({
        "checkpoint": out,
        "best_epoch": meta.epoch,
        "best_metric": meta.best_metric,
        "monitor": meta.monitor,
        "steps": meta.step,
        "epochs_run": outcome.history.len(),
        "stopped_early": outcome.stopped_early,
        "history": outcome.history,
    })
}

fn cmd_synth(args: &SynthArgs, argv: &[String]) -> Result<(), CliError> {
    let file = FileConfig::load(&args.common)?;
    let mut cc = file.section("corpus", CorpusConfig::default())?;
    let seed = file.seed(&args.common)?;
    macro_rules! flag {
        ($field:ident, $flag:ident) => {
            if let Some(v) = args.$flag {
                cc.$field = v;
            }
        };
    }
    flag!(n_bags, bags);
    flag!(n_subjects, subjects);
    flag!(d, d);
    flag!(m, m);
    flag!(abnormal_ratio, abnormal_ratio);
    flag!(mixed_type_ratio, mixed_type_ratio);
    flag!(val_fraction, val_fraction);
    cc.validate()?;

    let mut manifest = ManifestBuilder::start("synth", argv);
    fs::create_dir_all(&args.out)?;
    let corpus = build_pretrain_corpus(&make_templates(cc.template_seed), &cc, seed)?;
    let train_path = args.out.join("train.jsonl");
    let val_path = args.out.join("val.jsonl");
    save_dataset(&corpus.train, &train_path)?;
    save_dataset(&corpus.val, &val_path)?;
    let synth = SynthManifest {
        seed,
        config: cc,
        stats: corpus.stats.clone(),
    };
    manifest
        .config(serde_json::to_value(&synth)?)
        .seed("corpus", seed)
        .output(&train_path)
        .output(&val_path)
        .finish(&manifest_path_for(&args.out))?;
    print_json(&json!({ "train": train_path, "val": val_path, "stats": corpus.stats }))
}

/// Fits the model length to the data unless the config pins it.
fn fit_length(cfg: &mut ModelConfig, file: &FileConfig, records: &[BagRecord]) -> Result<(), CliError> {
    let Some(d) = records.first().and_then(BagRecord::d) else {
        return Err(CliError::data("dataset is empty"));
    };
    if cfg.d != d {
        if file.has("model", "d") {
            return Err(CliError::data(format!("data has d = {d}, config sets d = {}", cfg.d)));
        }
        cfg.d = d;
    }
    Ok(())
}

fn cmd_pretrain(args: &PretrainArgs, argv: &[String]) -> Result<(), CliError> {
    let file = FileConfig::load(&args.common)?;
    let mut cfg = file.section("model", ModelConfig::default())?;
    let mut tcfg = file.section("train", TrainConfig::pretrain())?;
    let seed = file.seed(&args.common)?;
    apply_train_flags(&mut tcfg, &args.train, seed);
    if let Some(a) = args.attn_norm {
        cfg.attn_norm = a.into();
    }
    let train_records = load(&args.data)?;
    let val_records = load(&args.val)?;
    fit_length(&mut cfg, &file, &train_records)?;
    cfg.validate()?;
    tcfg.validate()?;

    let mut manifest = ManifestBuilder::start("pretrain", argv);
    log::info!("pretraining on {} bags, validating on {}", train_records.len(), val_records.len());
    let outcome = pretrain(&train_records, &val_records, &cfg, &tcfg)?;
    save_checkpoint(&outcome.checkpoint, &args.out)?;
    manifest
        .config(json!({ "model": cfg, "train": tcfg }))
        .seed("train", seed)
        .input(&args.data)
        .input(&args.val)
        .output(&args.out)
        .finish(&manifest_path_for(&args.out))?;
    print_json(&outcome_summary(&args.out, &outcome))
}

fn cmd_finetune(args: &FinetuneArgs, argv: &[String]) -> Result<(), CliError> {
    let file = FileConfig::load(&args.common)?;
    let mut tcfg = file.section("train", TrainConfig::finetune())?;
    let seed = file.seed(&args.common)?;
    apply_train_flags(&mut tcfg, &args.train, seed);
    if let Some(list) = &args.freeze {
        tcfg.freeze_set = list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect();
    }
    tcfg.validate()?;
    let ckpt = open_checkpoint(&args.ckpt)?;
    let records = load(&args.data)?;

    let mut manifest = ManifestBuilder::start("finetune", argv);
    let result = finetune(&ckpt, &records, &tcfg)?;
    save_checkpoint(&result.outcome.checkpoint, &args.out)?;
    let scores = evaluate_bags(&result.outcome.checkpoint.state, &ckpt.config, &result.split.test)?;
    let test = EvalReport::new(scores, crate::eval::DEFAULT_THRESHOLD).ok().map(|r| {
        json!({ "n": r.n, "auc": r.auc, "f1": r.f1, "confusion": r.confusion })
    });
    manifest
        .config(json!({ "model": ckpt.config, "train": tcfg }))
        .seed("train", seed)
        .input(&args.ckpt)
        .input(&args.data)
        .output(&args.out)
        .finish(&manifest_path_for(&args.out))?;
    let mut summary = outcome_summary(&args.out, &result.outcome);
    summary["split"] = json!({
        "train": result.split.train.len(),
        "val": result.split.val.len(),
        "test": result.split.test.len(),
    });
    summary["test"] = test.unwrap_or(Value::Null);
    print_json(&summary)
}

fn cmd_eval(args: &EvalArgs, argv: &[String]) -> Result<(), CliError> {
    let file = FileConfig::load(&args.common)?;
    let records = load(&args.data)?;
    let mut manifest = ManifestBuilder::start("eval", argv);
    manifest.input(&args.data);
    let report = if let Some(train_path) = &args.baseline_train {
        let bcfg = file.section("baseline", BaselineConfig::default())?;
        let train_records = load(train_path)?;
        manifest.input(train_path).config(json!({ "baseline": bcfg }));
        let mut report = lr_baseline(&train_records, &records, &bcfg)?;
        if report.threshold != args.threshold {
            report = EvalReport::new(report.records, args.threshold)?;
        }
        report
    } else {
        let path = args.ckpt.as_ref().ok_or_else(|| CliError::usage("--ckpt is required"))?;
        let ckpt = open_checkpoint(path)?;
        manifest.input(path).config(json!({ "model": ckpt.config }));
        let scores = evaluate_bags(&ckpt.state, &ckpt.config, &records)?;
        EvalReport::new(scores, args.threshold)?
    };
    if let Some(csv) = &args.csv {
        report.save_csv(csv)?;
        manifest.output(csv);
    }
    if let Some(out) = &args.out {
        crate::fsutil::write_atomic(out, report.to_json()?.as_bytes())?;
        manifest.output(out).finish(&manifest_path_for(out))?;
    } else if let Some(csv) = &args.csv {
        manifest.finish(&manifest_path_for(csv))?;
    }
    print_json(&report)
}

#[derive(Serialize)]
struct PredictionRow<'a> {
    record_id: &'a str,
    #[serde(flatten)]
    prediction: Prediction,
}

fn cmd_predict(args: &PredictArgs, argv: &[String]) -> Result<(), CliError> {
    let ckpt = open_checkpoint(&args.ckpt)?;
    let records = load(&args.data)?;
    let mut manifest = ManifestBuilder::start("predict", argv);
    let start = Instant::now();
    let rows = records
        .iter()
        .map(|r| {
            Ok(PredictionRow {
                record_id: &r.record_id,
                prediction: predict_bag(r, &ckpt.state, &ckpt.config)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    log::info!("predicted {} bags in {:.1} ms", rows.len(), start.elapsed().as_secs_f64() * 1e3);
    if let Some(out) = &args.out {
        let bytes = serde_json::to_vec_pretty(&rows).map_err(CliError::io)?;
        crate::fsutil::write_atomic(out, &bytes)?;
        manifest
            .config(json!({ "model": ckpt.config }))
            .input(&args.ckpt)
            .input(&args.data)
            .output(out)
            .finish(&manifest_path_for(out))?;
    }
    print_json(&rows)
}

fn cmd_gradcheck(args: &GradcheckArgs) -> Result<(), CliError> {
    let file = FileConfig::load(&args.common)?;
    let mut cfg = file.section("model", gradcheck_config())?;
    if let Some(a) = args.attn_norm {
        cfg.attn_norm = a.into();
    }
    cfg.validate()?;
    let seed = file.seed(&args.common)?;
    let report = run_gradcheck(&cfg, seed, args.h, args.tol)?;
    let passed = report.passed();
    print_json(&json!({
        "passed": passed,
        "config": cfg,
        "seed": seed,
        "h": report.h,
        "tol": report.tol,
        "checked": report.checked,
        "excluded": report.excluded,
        "max_rel_err": report.max_rel_err,
        "failures": report.failures.iter().take(20).collect::<Vec<_>>(),
    }))?;
    if passed {
        Ok(())
    } else {
        Err(CliError::numeric(format!(
            "{} gradient elements exceed tolerance {}",
            report.failures.len(),
            report.tol
        )))
    }
}

/// Runs the command line on `argv` and returns the process exit code.
pub fn run(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Synth(a) => cmd_synth(a, argv),
        Command::Pretrain(a) => cmd_pretrain(a, argv),
        Command::Finetune(a) => cmd_finetune(a, argv),
        Command::Eval(a) => cmd_eval(a, argv),
        Command::Predict(a) => cmd_predict(a, argv),
        Command::Gradcheck(a) => cmd_gradcheck(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let argv: Vec<String> = std::env::args().collect();
    run(&argv)
}
