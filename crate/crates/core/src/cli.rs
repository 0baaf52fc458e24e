//! Command-line front end: `gen`, `filter`, `train`, `eval`, `report` and
//! `bench`. Defaults reproduce the reference configuration.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::data::{load_records, save_records, Dataset, Format, Split};
use crate::error::{Error, Result};
use crate::experiment::{
    median_eers, run_benchmark, train_gbdt_model, BenchmarkConfig, BenchmarkRun,
};
use crate::filter::{balance_report, filter_by_mos, BalanceReport, FilterConfig, MosKey};
use crate::fusion::{
    predict_batch, FeatureSet, FusionModel, GateInput, HiddenSize, ModelFile,
    ThresholdConfig, Thresholded,
};
use crate::gbdt::GbdtConfig;
use crate::metrics::{
    bootstrap_significance, det_curve, evaluate, labelled, relative_reduction, write_det_csv,
    EvalReport, SignificanceResult,
};
use crate::synth::{generate_split, GenConfig};
use crate::train::{train_model, ModelSpec, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "scorefuse", version, about = "MOS-guided score fusion for fake audio detection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic score corpus (train/valid/eval + manifest).
    Gen(GenArgs),
    /// Keep records whose MOS lies in a band and report class balance.
    Filter(FilterArgs),
    /// Train a fusion model.
    Train(TrainArgs),
    /// Score a dataset with a trained model and compute EER/AUC.
    Eval(EvalArgs),
    /// Tabulate several evaluation reports with relative EER reductions.
    Report(ReportArgs),
    /// Run the full synthetic benchmark over several seeds.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Generator configuration (JSON); omitted fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the seed from the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = FormatArg::Jsonl)]
    pub format: FormatArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Jsonl,
    Csv,
}

impl FormatArg {
    fn format(self) -> Format {
        match self {
            FormatArg::Jsonl => Format::Jsonl,
            FormatArg::Csv => Format::Csv,
        }
    }

    fn ext(self) -> &'static str {
        match self {
            FormatArg::Jsonl => "jsonl",
            FormatArg::Csv => "csv",
        }
    }
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 3.0)]
    pub lo: f64,
    #[arg(long, default_value_t = 4.0)]
    pub hi: f64,
    /// Exclude the band edges.
    #[arg(long)]
    pub exclusive: bool,
    /// MOS used for filtering: `fused`, `auto`, or a component index.
    #[arg(long, default_value = "fused")]
    pub key: MosKey,
    /// Also write the before/after balance report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Mlp,
    GatedMlp,
    Gbdt,
    MosFuser,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FeatureArg {
    Fad,
    FadFused,
    FadMos,
}

impl From<FeatureArg> for FeatureSet {
    fn from(f: FeatureArg) -> Self {
        match f {
            FeatureArg::Fad => FeatureSet::Fad,
            FeatureArg::FadFused => FeatureSet::FadFused,
            FeatureArg::FadMos => FeatureSet::FadMos,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GateArg {
    /// Gate on the fused MOS (score fusion).
    Fused,
    /// Gate on every MOS component (embedding fusion).
    Mos,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub model: ModelArg,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub valid: PathBuf,
    /// Model file to write (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch (or per-round) training history CSV.
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Inputs of the MLP and GBDT models.
    #[arg(long, value_enum, default_value_t = FeatureArg::FadFused)]
    pub features: FeatureArg,
    #[arg(long, value_enum, default_value_t = GateArg::Fused)]
    pub gate_input: GateArg,
    /// Hidden width; defaults to 3, or half the input width with `--half-hidden`.
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long, conflicts_with = "hidden")]
    pub half_hidden: bool,
    /// Regress MOS-fuser targets on the 0.125 quantization grid.
    #[arg(long)]
    pub quantize_targets: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 1)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1000)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 20)]
    pub patience: usize,

    #[arg(long, default_value_t = 16)]
    pub num_leaves: usize,
    #[arg(long, default_value_t = 25)]
    pub max_bin: usize,
    #[arg(long, default_value_t = 4)]
    pub max_depth: usize,
    /// GBDT shrinkage.
    #[arg(long, default_value_t = 0.1)]
    pub gbdt_lr: f64,
    #[arg(long, default_value_t = 100)]
    pub num_rounds: usize,
    #[arg(long, default_value_t = 20)]
    pub early_stopping: usize,
    #[arg(long, default_value_t = 5)]
    pub min_data_in_leaf: usize,
    #[arg(long, default_value_t = 0.0)]
    pub lambda_l2: f64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Apply the MOS threshold override.
    #[arg(long)]
    pub threshold: bool,
    #[arg(long, default_value_t = 2.5)]
    pub m1: f64,
    #[arg(long, default_value_t = 4.0)]
    pub m2: f64,
    /// Scores CSV (`utt_id,score`).
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Evaluation report JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// DET curve CSV (`threshold,far,frr`).
    #[arg(long)]
    pub det: Option<PathBuf>,
    /// Name of the system in the report; defaults to the model file stem.
    #[arg(long)]
    pub name: Option<String>,
    /// Second model to test against (the evaluated model is system A).
    #[arg(long)]
    pub compare: Option<PathBuf>,
    /// Apply the threshold override to the comparison model too.
    #[arg(long, requires = "compare")]
    pub compare_threshold: bool,
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Evaluation report JSON files, in table order.
    pub reports: Vec<PathBuf>,
    /// System the reductions are measured against (name or 0-based index);
    /// defaults to the first report.
    #[arg(long)]
    pub reference: Option<String>,
    #[arg(long)]
    pub markdown: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Benchmark configuration (JSON); omitted fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    #[arg(long, default_value_t = 42)]
    pub first_seed: u64,
    /// Train on the unfiltered corpus.
    #[arg(long)]
    pub no_filter: bool,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Filter(a) => cmd_filter(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Report(a) => cmd_report(&a),
        Command::Bench(a) => cmd_bench(&a),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

fn load(path: &Path) -> Result<Dataset> {
    load_records(path, Format::from_path(path))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub config: GenConfig,
    pub files: Vec<ManifestFile>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestFile {
    pub split: Split,
    pub path: String,
    pub records: usize,
    pub balance: BalanceReport,
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    let mut cfg: GenConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => GenConfig::default(),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let mut files = Vec::new();
    for split in Split::ALL {
        let ds = generate_split(&cfg, split)?;
        let name = format!("{}.{}", split.as_str(), a.format.ext());
        save_records(&ds, &a.out.join(&name), a.format.format())?;
        eprintln!("{split}: {} records -> {name}", ds.len());
        files.push(ManifestFile {
            split,
            path: name,
            records: ds.len(),
            balance: balance_report(&ds),
        });
    }
    let manifest = Manifest {
        seed: cfg.seed,
        config: cfg,
        files,
    };
    write_json(&a.out.join("manifest.json"), &manifest)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FilterSummary {
    pub lo: f64,
    pub hi: f64,
    pub before: BalanceReport,
    pub after: BalanceReport,
}

fn cmd_filter(a: &FilterArgs) -> Result<()> {
    let cfg = FilterConfig {
        lo: a.lo,
        hi: a.hi,
        inclusive: !a.exclusive,
    };
    let ds = load(&a.input)?;
    let kept = filter_by_mos(&ds, a.key, &cfg)?;
    save_records(&kept, &a.out, Format::from_path(&a.out))?;
    let summary = FilterSummary {
        lo: a.lo,
        hi: a.hi,
        before: balance_report(&ds),
        after: balance_report(&kept),
    };
    let line = |name: &str, b: &BalanceReport| {
        let ratio = b.ratio.map_or("n/a".into(), |r| format!("{r:.3}"));
        format!(
            "{name:<7} total {:>7}  bonafide {:>7}  spoof {:>7}  spoof:bonafide {ratio}",
            b.total, b.n_bonafide, b.n_spoof
        )
    };
    println!("{}", line("before", &summary.before));
    println!("{}", line("after", &summary.after));
    if let Some(p) = &a.report {
        write_json(p, &summary)?;
    }
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let train = load(&a.train)?;
    let valid = load(&a.valid)?;
    let features: FeatureSet = a.features.into();

    if a.model == ModelArg::Gbdt {
        let cfg = GbdtConfig {
            num_leaves: a.num_leaves,
            max_bin: a.max_bin,
            max_depth: a.max_depth,
            learning_rate: a.gbdt_lr,
            num_rounds: a.num_rounds,
            early_stopping_patience: a.early_stopping,
            min_data_in_leaf: a.min_data_in_leaf,
            lambda_l2: a.lambda_l2,
            ..GbdtConfig::default()
        };
        let (model, history) = train_gbdt_model(&train, &valid, features, &cfg)?;
        if let Some(p) = &a.history {
            let mut w = csv::Writer::from_writer(create(p)?);
            w.write_record(["round", "train_logloss", "valid_auc"])
                .and_then(|_| {
                    for r in &history.rounds {
                        w.write_record([
                            r.round.to_string(),
                            r.train_logloss.to_string(),
                            r.valid_auc.map_or(String::new(), |v| v.to_string()),
                        ])?;
                    }
                    w.flush().map_err(csv::Error::from)
                })
                .map_err(|e| Error::io(p, std::io::Error::other(e)))?;
        }
        eprintln!(
            "gbdt: kept {} of {} rounds",
            history.best_round,
            history.rounds.len()
        );
        let file = ModelFile {
            model,
            init_seed: None,
            train_config: serde_json::to_value(&cfg)?,
        };
        return file.save(&a.out);
    }

    let hidden = match (a.hidden, a.half_hidden) {
        (Some(h), _) => HiddenSize::Fixed(h),
        (None, true) => HiddenSize::HalfInput,
        (None, false) => HiddenSize::Three,
    };
    let spec = match a.model {
        ModelArg::Mlp => ModelSpec::Mlp { features, hidden },
        ModelArg::GatedMlp => ModelSpec::GatedMlp {
            gate_input: match a.gate_input {
                GateArg::Fused => GateInput::Fused,
                GateArg::Mos => GateInput::Mos,
            },
            hidden,
        },
        ModelArg::MosFuser => ModelSpec::MosFuser {
            quantize_targets: a.quantize_targets,
        },
        ModelArg::Gbdt => unreachable!("handled above"),
    };
    let cfg = TrainConfig {
        learning_rate: a.lr,
        batch_size: a.batch_size,
        max_epochs: a.max_epochs,
        patience: a.patience,
        seed: a.seed,
        shuffle: true,
    };
    let (model, history) = train_model(&spec, &train, &valid, &cfg)?;
    if let Some(p) = &a.history {
        history
            .write_csv(create(p)?)
            .map_err(|e| Error::io(p, e))?;
    }
    if let Some(best) = history.best() {
        eprintln!(
            "{}: best epoch {} (valid loss {:.6}), stopped at {}",
            model.kind(),
            history.best_epoch,
            best.valid_loss,
            history.stopped_epoch
        );
    }
    let file = ModelFile {
        model,
        init_seed: Some(a.seed),
        train_config: serde_json::json!({ "spec": spec, "train": cfg }),
    };
    file.save(&a.out)
}

/// What `eval` writes and `report` reads.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalOutput {
    pub system: String,
    pub model_type: String,
    pub threshold: Option<ThresholdConfig>,
    pub report: Option<EvalReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub significance: Option<SignificanceResult>,
}

fn score_with(model: &FusionModel, threshold: Option<ThresholdConfig>, ds: &Dataset) -> Result<Vec<f64>> {
    model.check_dataset(ds)?;
    match threshold {
        Some(cfg) => predict_batch(&Thresholded::new(model, cfg), ds),
        None => predict_batch(model, ds),
    }
}

fn has_both_classes(labels: &[bool]) -> bool {
    labels.iter().any(|&b| b) && labels.iter().any(|&b| !b)
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let threshold_cfg = ThresholdConfig { m1: a.m1, m2: a.m2 };
    threshold_cfg.validate()?;
    let threshold = a.threshold.then_some(threshold_cfg);
    let model = ModelFile::load(&a.model)?.model;
    let ds = load(&a.data)?;
    let scores = score_with(&model, threshold, &ds)?;

    if let Some(p) = &a.scores {
        let mut w = csv::Writer::from_writer(create(p)?);
        let res: std::result::Result<(), csv::Error> = (|| {
            w.write_record(["utt_id", "score"])?;
            for (r, s) in ds.iter().zip(&scores) {
                w.write_record([r.utt_id.as_str(), &s.to_string()])?;
            }
            w.flush()?;
            Ok(())
        })();
        res.map_err(|e| Error::io(p, std::io::Error::other(e)))?;
    }

    let (s, l) = labelled(&scores, &ds);
    let report = if has_both_classes(&l) {
        Some(evaluate(&s, &l)?)
    } else {
        eprintln!("no labelled records of both classes; skipping EER");
        None
    };
    if let (Some(p), Some(_)) = (&a.det, &report) {
        write_det_csv(&det_curve(&s, &l)?, create(p)?).map_err(|e| Error::io(p, e))?;
    }

    let significance = match &a.compare {
        Some(other) if report.is_some() => {
            let other = ModelFile::load(other)?.model;
            let other_scores = score_with(&other, a.compare_threshold.then_some(threshold_cfg), &ds)?;
            let (sb, _) = labelled(&other_scores, &ds);
            Some(bootstrap_significance(&s, &sb, &l, a.bootstrap, a.seed, a.alpha)?)
        }
        _ => None,
    };

    let mut system = a.name.clone().unwrap_or_else(|| stem(&a.model));
    if a.name.is_none() && threshold.is_some() {
        system.push_str(" + threshold");
    }
    let out = EvalOutput {
        system,
        model_type: model.kind().to_string(),
        threshold,
        report,
        significance,
    };
    if let Some(r) = &out.report {
        println!(
            "{}: EER {:.4} (threshold {:.6}), AUC {:.4}, {} bonafide / {} spoof",
            out.system, r.eer, r.eer_threshold, r.auc, r.n_bonafide, r.n_spoof
        );
    }
    if let Some(sig) = &out.significance {
        println!(
            "bootstrap: EER {:.4} vs {:.4}, p = {} ({} replicates){}",
            sig.eer_a,
            sig.eer_b,
            sig.p_value,
            sig.n_bootstrap,
            if sig.significant { ", significant" } else { "" }
        );
    }
    if let Some(p) = &a.report {
        write_json(p, &out)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub system: String,
    pub eer: f64,
    pub auc: Option<f64>,
    /// `(eer_ref - eer) / eer_ref`.
    pub relative_reduction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub reference: String,
    pub rows: Vec<ReportRow>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ReportInput {
    Eval(EvalOutput),
    Bare(EvalReport),
}

fn read_report(path: &Path) -> Result<(String, f64, Option<f64>)> {
    let missing = || Error::InvalidConfig(format!("{} holds no EER", path.display()));
    match read_json::<ReportInput>(path)? {
        ReportInput::Eval(e) => {
            let r = e.report.ok_or_else(missing)?;
            Ok((e.system, r.eer, Some(r.auc)))
        }
        ReportInput::Bare(r) => Ok((stem(path), r.eer, Some(r.auc))),
    }
}

/// Builds the comparison table; `reference` is a system name or index.
pub fn build_report(entries: &[(String, f64, Option<f64>)], reference: Option<&str>) -> Result<ReportSummary> {
    if entries.is_empty() {
        return Err(Error::InvalidConfig("report needs at least one input".into()));
    }
    let ref_idx = match reference {
        None => 0,
        Some(r) => entries
            .iter()
            .position(|e| e.0 == r)
            .or_else(|| r.parse::<usize>().ok().filter(|&i| i < entries.len()))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown reference system {r:?}")))?,
    };
    let eer_ref = entries[ref_idx].1;
    let rows = entries
        .iter()
        .map(|(system, eer, auc)| {
            Ok(ReportRow {
                system: system.clone(),
                eer: *eer,
                auc: *auc,
                relative_reduction: relative_reduction(*eer, eer_ref)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReportSummary {
        reference: entries[ref_idx].0.clone(),
        rows,
    })
}

pub fn report_markdown(summary: &ReportSummary) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "| System | EER | AUC | Rel. reduction vs {} |\n|---|---:|---:|---:|\n",
        summary.reference
    ));
    for r in &summary.rows {
        let auc = r.auc.map_or("-".to_string(), |a| format!("{a:.4}"));
        out.push_str(&format!(
            "| {} | {:.4} | {auc} | {:.1}% |\n",
            r.system,
            r.eer,
            100.0 * r.relative_reduction
        ));
    }
    out
}

fn cmd_report(a: &ReportArgs) -> Result<()> {
    let entries = a
        .reports
        .iter()
        .map(|p| read_report(p))
        .collect::<Result<Vec<_>>>()?;
    let summary = build_report(&entries, a.reference.as_deref())?;
    let md = report_markdown(&summary);
    print!("{md}");
    if let Some(p) = &a.markdown {
        fs::write(p, &md).map_err(|e| Error::io(p, e))?;
    }
    if let Some(p) = &a.json {
        write_json(p, &summary)?;
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BenchSummary {
    pub config: BenchmarkConfig,
    pub runs: Vec<BenchmarkRun>,
    pub median_oracle_eer: f64,
    pub median_eer: Vec<(String, f64)>,
}

fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let mut cfg: BenchmarkConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => BenchmarkConfig::default(),
    };
    if a.no_filter {
        cfg.filter_training = false;
    }
    if a.seeds == 0 {
        return Err(Error::InvalidConfig("--seeds must be at least 1".into()));
    }
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let mut runs = Vec::new();
    for seed in a.first_seed..a.first_seed + a.seeds {
        let run = run_benchmark(&cfg, seed)?;
        eprintln!("seed {seed}: oracle EER {:.4}", run.oracle_eer);
        runs.push(run);
    }
    let mut oracle: Vec<f64> = runs.iter().map(|r| r.oracle_eer).collect();
    let median_oracle_eer = crate::experiment::median(&mut oracle);
    let medians = median_eers(&runs);

    let mut md = format!(
        "Median eval EER over {} seeds ({} training data)\n\n| System | EER |\n|---|---:|\n",
        runs.len(),
        if cfg.filter_training { "filtered" } else { "unfiltered" }
    );
    md.push_str(&format!("| Bayes oracle | {median_oracle_eer:.4} |\n"));
    for (s, e) in &medians {
        md.push_str(&format!("| {} | {e:.4} |\n", s.name()));
    }
    print!("{md}");
    let summary = BenchSummary {
        config: cfg,
        runs,
        median_oracle_eer,
        median_eer: medians.iter().map(|(s, e)| (s.name().to_string(), *e)).collect(),
    };
    write_json(&a.out.join("bench.json"), &summary)?;
    let p = a.out.join("bench.md");
    let mut f = create(&p)?;
    f.write_all(md.as_bytes()).map_err(|e| Error::io(&p, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_reduction_column() {
        let entries = vec![
            ("previous".to_string(), 0.1564, None),
            ("gated".to_string(), 0.1351, None),
        ];
        let s = build_report(&entries, Some("previous")).unwrap();
        assert_eq!(s.rows[0].relative_reduction, 0.0);
        assert!((s.rows[1].relative_reduction - 0.136189).abs() < 1e-6);
        assert!(report_markdown(&s).contains("| gated | 0.1351 | - | 13.6% |"));
        assert!(build_report(&[], None).is_err());
        assert!(build_report(&entries, Some("nope")).is_err());
        assert_eq!(build_report(&entries, Some("1")).unwrap().reference, "gated");
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
