//! `sstextu` command-line interface.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 numeric or solver failure.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::data::{f32le_bytes, load_dataset, read_f32le, save_dataset, write_file, Dataset, PrototypeMatrix, UnlabeledSet};
use crate::error::{Error, Result};
use crate::experiment::{
    generate_synthetic, run_benchmark, sample_support, silhouette_score, summarize, to_csv, BenchmarkConfig,
    BenchmarkData, MetricReport, SamplingSpec, SyntheticSpec,
};
use crate::objectives::LambdaPolicy;
use crate::solvers::{MarginalSource, Solver, SolverConfig};
use crate::zeroshot::{classify, ensemble_text_prototypes, Temperature};
use crate::VERSION;

#[derive(Debug, Parser)]
#[command(name = "sstextu", version, about = "Semi-supervised few-shot adaptation of VLM embeddings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Generate a synthetic dataset.
    Generate(GenerateArgs),
    /// Sample a support set, fit a solver and write the learned prototypes.
    Adapt(AdaptArgs),
    /// Evaluate prototypes on a dataset.
    Eval(EvalArgs),
    /// Run a solver × shots × seeds sweep.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SyntheticArgs {
    #[arg(long, default_value_t = SyntheticSpec::default().class_count)]
    pub classes: usize,
    #[arg(long, default_value_t = SyntheticSpec::default().dim)]
    pub dim: usize,
    #[arg(long, default_value_t = SyntheticSpec::default().pool_size)]
    pub pool: usize,
    /// Generator seed.
    #[arg(long, default_value_t = SyntheticSpec::default().seed)]
    pub seed: u64,
    /// Minimum angle between class centers, radians.
    #[arg(long, default_value_t = SyntheticSpec::default().separation)]
    pub separation: f64,
    /// Sample noise norm.
    #[arg(long, default_value_t = SyntheticSpec::default().noise)]
    pub noise: f64,
    /// Text prototype noise norm.
    #[arg(long, default_value_t = SyntheticSpec::default().text_noise)]
    pub text_noise: f64,
    /// Norm of the offset shared by all image samples.
    #[arg(long, default_value_t = SyntheticSpec::default().shared)]
    pub shared: f64,
    /// Scale of the per-class text offsets along the shared direction.
    #[arg(long, default_value_t = SyntheticSpec::default().text_bias)]
    pub text_bias: f64,
    /// Comma-separated class frequencies. Defaults to the built-in imbalanced
    /// marginal for 5 classes and to uniform otherwise.
    #[arg(long, value_delimiter = ',')]
    pub marginal: Option<Vec<f64>>,
}

impl SyntheticArgs {
    pub fn spec(&self) -> SyntheticSpec {
        let default = SyntheticSpec::default();
        let marginal = match &self.marginal {
            Some(m) => m.clone(),
            None if self.classes == default.class_count => default.marginal,
            None => vec![1.0; self.classes],
        };
        SyntheticSpec {
            class_count: self.classes,
            dim: self.dim,
            separation: self.separation,
            noise: self.noise,
            marginal,
            text_noise: self.text_noise,
            shared: self.shared,
            text_bias: self.text_bias,
            pool_size: self.pool,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
    /// Temperature recorded in the manifest.
    #[arg(long, default_value_t = Temperature::DEFAULT.get())]
    pub tau: f64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LambdaMode {
    Adaptive,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MarginalArg {
    Support,
    Uncorrected,
    Oracle,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Softmax temperature; overrides the manifest value (default 0.01).
    #[arg(long)]
    pub tau: Option<f64>,
    /// BCM iterations T.
    #[arg(long, default_value_t = 3)]
    pub t_bcm: usize,
    /// Sinkhorn iterations per z-step.
    #[arg(long, default_value_t = 10)]
    pub t_ot: usize,
    /// Floor ratio r for classes missing from the support.
    #[arg(long, default_value_t = 0.25)]
    pub ratio_r: f64,
    #[arg(long, value_enum, default_value_t = LambdaMode::Adaptive)]
    pub lambda_mode: LambdaMode,
    /// λ^T for every class in fixed mode.
    #[arg(long)]
    pub lambda_text: Option<f64>,
    /// λ^U for every class in fixed mode.
    #[arg(long)]
    pub lambda_unlabeled: Option<f64>,
    /// Source of the transport marginal. `oracle` is only accepted by `benchmark`.
    #[arg(long, value_enum, default_value_t = MarginalArg::Support)]
    pub marginal_source: MarginalArg,
}

impl SolverArgs {
    fn config(&self, classes: usize, manifest_tau: Option<f64>) -> Result<SolverConfig> {
        let tau = Temperature::new(self.tau.or(manifest_tau).unwrap_or(Temperature::DEFAULT.get()))?;
        let lambdas = match self.lambda_mode {
            LambdaMode::Adaptive => {
                if self.lambda_text.is_some() || self.lambda_unlabeled.is_some() {
                    return Err(Error::Config("--lambda-text/--lambda-unlabeled need --lambda-mode fixed".into()));
                }
                LambdaPolicy::Adaptive
            }
            LambdaMode::Fixed => {
                let (Some(text), Some(unlabeled)) = (self.lambda_text, self.lambda_unlabeled) else {
                    return Err(Error::Config(
                        "--lambda-mode fixed needs --lambda-text and --lambda-unlabeled".into(),
                    ));
                };
                LambdaPolicy::fixed_uniform(classes, text, unlabeled)
            }
        };
        let cfg = SolverConfig {
            tau,
            bcm_iters: self.t_bcm,
            ot_iters: self.t_ot,
            marginal_ratio: self.ratio_r,
            lambdas,
            marginal_source: match self.marginal_source {
                MarginalArg::Support => MarginalSource::SupportEstimate,
                MarginalArg::Uncorrected => MarginalSource::Uncorrected,
                MarginalArg::Oracle => MarginalSource::Oracle,
            },
            record_codes: false,
        };
        cfg.validate(classes)?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct AdaptArgs {
    /// Dataset manifest.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_parser = parse_solver, default_value = "sstextu")]
    pub solver: Solver,
    #[command(flatten)]
    pub solver_args: SolverArgs,
    #[arg(long, default_value_t = 1)]
    pub shots: usize,
    /// Unlabeled samples per class drawn from the pool. Ignored when the manifest
    /// carries its own unlabeled set.
    #[arg(long, default_value_t = 24)]
    pub unlabeled_mult: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Draw exactly K support samples per class.
    #[arg(long)]
    pub stratified: bool,
    /// Rebuild text prototypes from the per-template embeddings in the manifest.
    #[arg(long)]
    pub from_templates: bool,
    /// Output directory for prototypes and the fit report.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Dataset manifest; every pool sample is evaluated.
    #[arg(long)]
    pub data: PathBuf,
    /// Prototype manifest written by `adapt`. Defaults to the dataset's text prototypes.
    #[arg(long)]
    pub prototypes: Option<PathBuf>,
    /// Also compute the silhouette score of the embeddings w.r.t. the true labels.
    #[arg(long)]
    pub silhouette: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Dataset manifest. Without it a synthetic pool is generated from the flags below.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Fixed held-out eval manifest (only with --data).
    #[arg(long)]
    pub eval: Option<PathBuf>,
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
    #[arg(long, value_delimiter = ',', value_parser = parse_solver, default_value = "zeroshot,simpleshot,sstext,sstextu")]
    pub solvers: Vec<Solver>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
    pub shots: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    pub seeds: usize,
    #[arg(long, default_value_t = 0)]
    pub base_seed: u64,
    #[arg(long, default_value_t = 24)]
    pub unlabeled_mult: usize,
    #[arg(long)]
    pub stratified: bool,
    #[command(flatten)]
    pub solver_args: SolverArgs,
    /// Worker threads; defaults to all cores. Output does not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Record wall-clock runtime per fit (makes outputs non-reproducible).
    #[arg(long)]
    pub record_runtime: bool,
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
}

fn parse_solver(s: &str) -> std::result::Result<Solver, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Parses the process arguments, runs the command and returns the exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numeric() {
                3
            } else {
                2
            }
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => cmd_generate(&args),
        Command::Adapt(args) => cmd_adapt(&args),
        Command::Eval(args) => cmd_eval(&args),
        Command::Benchmark(args) => cmd_benchmark(&args),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let spec = args.synthetic.spec();
    let tau = Temperature::new(args.tau)?;
    let data = generate_synthetic(&spec)?;
    let mut dataset = Dataset::new(data.pool, data.prototypes)?;
    dataset.tau = Some(tau.get());
    create_dir(&args.out)?;
    save_dataset(&dataset, &args.out.join("manifest.json"))?;
    write_json(
        &args.out.join("generate.json"),
        &json!({ "version": VERSION, "command": "generate", "spec": spec, "tau": tau }),
    )
}

/// Manifest of a learned prototype file.
#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct PrototypeManifest {
    pub c: usize,
    pub d: usize,
    pub dtype: String,
    pub prototypes: String,
    pub version: String,
    pub config: serde_json::Value,
}

pub fn read_prototypes(path: &Path) -> Result<PrototypeMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let manifest: PrototypeManifest =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if manifest.dtype != crate::data::DTYPE_F32LE {
        return Err(Error::Format(format!("unsupported dtype {:?}", manifest.dtype)));
    }
    let blob = path.parent().unwrap_or(Path::new(".")).join(&manifest.prototypes);
    let values = read_f32le(&blob, manifest.c * manifest.d)?;
    let values = ndarray::Array2::from_shape_vec((manifest.c, manifest.d), values.into_iter().map(f64::from).collect())
        .expect("length checked");
    PrototypeMatrix::new(values)
}

pub fn cmd_adapt(args: &AdaptArgs) -> Result<()> {
    let dataset = load_dataset(&args.data)?;
    let classes = dataset.class_count();
    let cfg = args.solver_args.config(classes, dataset.tau)?;
    if cfg.marginal_source == MarginalSource::Oracle {
        return Err(Error::Config("the oracle marginal is only available in benchmark mode".into()));
    }
    let text = match (&dataset.templates, args.from_templates) {
        (Some(t), true) => ensemble_text_prototypes(t.view())?,
        (None, true) => return Err(Error::Config("--from-templates given but the manifest has no templates".into())),
        (_, false) => dataset.prototypes.clone(),
    };
    let spec = SamplingSpec {
        shots: args.shots,
        unlabeled_multiplier: if dataset.unlabeled.is_some() { 0 } else { args.unlabeled_mult },
        seed: args.seed,
        stratified: args.stratified,
    };
    let split = sample_support(&dataset.pool, &spec)?;
    let unlabeled = match (&dataset.unlabeled, args.solver) {
        (_, s) if s != Solver::SsTextU => UnlabeledSet::empty(dataset.dim()),
        (Some(u), _) => u.clone(),
        (None, _) => split.unlabeled.clone(),
    };
    let fit = args.solver.fit(&split.support, &unlabeled, &text, &cfg, None)?;
    let pred = classify(split.eval.embeddings(), &fit.prototypes)?;
    let metrics = if split.eval.is_empty() {
        None
    } else {
        Some(MetricReport::new(&pred, split.eval.labels(), classes)?)
    };

    let config = json!({
        "command": "adapt",
        "data": args.data,
        "solver": args.solver,
        "solver_config": cfg,
        "sampling": spec,
        "from_templates": args.from_templates,
    });
    create_dir(&args.out)?;
    write_file(&args.out.join("prototypes.bin"), &f32le_bytes(fit.prototypes.view().iter()))?;
    write_json(
        &args.out.join("prototypes.json"),
        &PrototypeManifest {
            c: classes,
            d: dataset.dim(),
            dtype: crate::data::DTYPE_F32LE.into(),
            prototypes: "prototypes.bin".into(),
            version: VERSION.into(),
            config: config.clone(),
        },
    )?;
    write_json(
        &args.out.join("report.json"),
        &json!({
            "version": VERSION,
            "config": config,
            "support_size": split.support.len(),
            "support_class_counts": split.support.class_counts(),
            "unlabeled_size": unlabeled.len(),
            "eval_size": split.eval.len(),
            "empty_classes": fit.empty_classes,
            "target_marginal": fit.target_marginal.as_ref().map(|m| m.to_vec()),
            "objective_trace": fit.objective_trace,
            "pre_update_objectives": fit.pre_update_objectives,
            "ot_residuals": fit.ot_residuals,
            "runtime_ms": fit.runtime_ms,
            "eval": metrics,
            "warnings": dataset.warnings,
        }),
    )
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let dataset = load_dataset(&args.data)?;
    let prototypes = match &args.prototypes {
        Some(path) => read_prototypes(path)?,
        None => dataset.prototypes.clone(),
    };
    let pred = classify(dataset.pool.embeddings(), &prototypes)?;
    let mut report = MetricReport::new(&pred, dataset.pool.labels(), dataset.class_count())?;
    if args.silhouette {
        report.silhouette = Some(silhouette_score(dataset.pool.embeddings(), dataset.pool.labels())?);
    }
    let out = json!({
        "version": VERSION,
        "config": { "command": "eval", "data": args.data, "prototypes": args.prototypes, "silhouette": args.silhouette },
        "metrics": report,
    });
    match &args.out {
        Some(path) => write_json(path, &out),
        None => {
            println!("{}", serde_json::to_string_pretty(&out).expect("serializable"));
            Ok(())
        }
    }
}

fn load_benchmark_data(args: &BenchmarkArgs) -> Result<(BenchmarkData, serde_json::Value)> {
    match &args.data {
        Some(path) => {
            let dataset = load_dataset(path)?;
            let fixed_eval = match &args.eval {
                Some(eval_path) => Some(load_dataset(eval_path)?.pool),
                None => None,
            };
            let name = path
                .parent()
                .and_then(|p| p.file_name())
                .or_else(|| path.file_stem())
                .and_then(|s| s.to_str())
                .unwrap_or("dataset")
                .to_string();
            let source = json!({ "data": path, "eval": args.eval, "tau": dataset.tau });
            let data = BenchmarkData::new(name, dataset.pool, dataset.prototypes, fixed_eval)?;
            Ok((data, source))
        }
        None => {
            if args.eval.is_some() {
                return Err(Error::Config("--eval requires --data".into()));
            }
            let spec = args.synthetic.spec();
            let data = BenchmarkData::from_synthetic(&spec)?;
            Ok((data, json!({ "synthetic": spec })))
        }
    }
}

pub fn cmd_benchmark(args: &BenchmarkArgs) -> Result<()> {
    let (data, source) = load_benchmark_data(args)?;
    let manifest_tau = source.get("tau").and_then(|t| t.as_f64());
    let cfg = BenchmarkConfig {
        solvers: args.solvers.clone(),
        shots: args.shots.clone(),
        seeds: args.seeds,
        base_seed: args.base_seed,
        unlabeled_multiplier: args.unlabeled_mult,
        stratified: args.stratified,
        solver: args.solver_args.config(data.pool.class_count(), manifest_tau)?,
        record_runtime: args.record_runtime,
    };
    if args.threads == Some(0) {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    let rows = match args.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(|| run_benchmark(&data, &cfg))?,
        None => run_benchmark(&data, &cfg)?,
    };
    let summary = summarize(&rows);
    let csv = to_csv(&rows);
    match &args.out_csv {
        Some(path) => write_file(path, csv.as_bytes())?,
        None if args.out_json.is_none() => print!("{csv}"),
        None => {}
    }
    if let Some(path) = &args.out_json {
        write_json(
            path,
            &json!({
                "version": VERSION,
                "config": { "command": "benchmark", "source": source, "benchmark": cfg },
                "rows": rows,
                "summary": summary,
            }),
        )?;
    }
    for s in &summary {
        eprintln!(
            "{:<10} K={:<3} ACA {:.4} ± {:.4}  Acc {:.4} ± {:.4}  ({} runs, {} failed)",
            s.solver.name(),
            s.k,
            s.aca_mean,
            s.aca_std,
            s.acc_mean,
            s.acc_std,
            s.runs,
            s.failures
        );
    }
    if rows.iter().any(|r| r.is_ok()) {
        Ok(())
    } else {
        Err(Error::Numeric("every benchmark cell failed".into()))
    }
}
