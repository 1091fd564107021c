//! Pipeline driver. Each subcommand reads its inputs from the output
//! directory, writes its artifacts there, and records a manifest.

mod config;
mod manifest;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{ContourOptions, DatasetSpec, EvalOptions, RunConfig, SweepOptions, TheoryOptions};
pub use manifest::{sha256_bytes, sha256_file, ArtifactRef, Manifest};

use crate::baselines::NnrVariant;
use crate::data::DataBundle;
use crate::error::{Error, Result};
use crate::evalkit::{
    degenerate_check, density_contours, lambda_sweep, scatter_svg, theory_consistency, write_svg, DensityField,
    MetricsReport, SweepResult, TheoryOracle,
};
use crate::model::{train_with_partition, RecourseModel, TrainConfig};
use crate::pairing::{partition, CostFn, PairTable};
use crate::pipeline::{build_gold, eval_queries, fit_lof, relabel, Experiment};
use crate::predictors::{accuracy, train_mlp, Gold, MlpClassifier, MlpConfig};
use crate::rng::SeedStream;
use crate::sampling::{sample_recourse_batch, Recourse, SampleConfig};

pub const DATA: &str = "data.json";
pub const GOLD: &str = "gold.json";
pub const LABELED: &str = "labeled.json";
pub const CLASSIFIER: &str = "classifier.json";
pub const MODEL: &str = "model.json";
pub const UNCONDITIONAL: &str = "model_unconditional.json";
pub const CANDIDATES: &str = "candidates.json";
pub const REPORT: &str = "report.json";
pub const REPORT_TABLE: &str = "report.txt";

#[derive(Debug, Parser)]
#[command(name = "recourse", version, about = "Generative recourse pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true, env = "RECOURSE_CONFIG")]
    pub config: Option<PathBuf>,
    /// Root seed; every stage derives its own stream from it
    #[arg(long, global = true, env = "RECOURSE_SEED")]
    pub seed: Option<u64>,
    /// Artifact directory.
    #[arg(long, global = true, env = "RECOURSE_OUT")]
    pub out: Option<PathBuf>,
    /// `moons`, `circles`, `corr`, or a CSV path with a sibling `<stem>.schema.json`.
    #[arg(long, global = true, env = "RECOURSE_DATASET")]
    pub dataset: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate or load a dataset, or summarize one.
    #[command(subcommand)]
    Data(DataCmd),
    /// Fit the gold labeling model or relabel the data with it.
    #[command(subcommand)]
    Gold(GoldCmd),
    /// Train the classifier h.
    #[command(subcommand)]
    Clf(ClfCmd),
    /// Dump and summarize the training pair distributions.
    #[command(subcommand)]
    Pairs(PairsCmd),
    /// Train the conditional recourse model.
    Train,
    /// Draw best-of-N recourse for the evaluation set.
    Sample,
    /// Score sampled recourse and the baselines.
    Eval,
    /// Retrain and evaluate across λ values.
    Sweep,
    /// Comparisons against variants of the recourse model
    #[command(subcommand)]
    Ablation(AblationCmd),
    /// Importance-sampling convergence experiment.
    Theory,
    /// SVG scatter of the training data with recourse edges.
    Plot,
    /// Serve the trained artifacts over HTTP.
    #[cfg(feature = "server")]
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080", env = "RECOURSE_ADDR")]
        addr: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum DataCmd {
    Gen,
    Inspect,
}

#[derive(Debug, Subcommand)]
pub enum GoldCmd {
    Train,
    Label,
}

#[derive(Debug, Subcommand)]
pub enum ClfCmd {
    Train,
}

#[derive(Debug, Subcommand)]
pub enum PairsCmd {
    Audit,
}

#[derive(Debug, Subcommand)]
pub enum AblationCmd {
    /// Log-density fields of the conditional and unconditional models.
    Contours,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Data(DataCmd::Gen) => "data gen",
            Command::Data(DataCmd::Inspect) => "data inspect",
            Command::Gold(GoldCmd::Train) => "gold train",
            Command::Gold(GoldCmd::Label) => "gold label",
            Command::Clf(ClfCmd::Train) => "clf train",
            Command::Pairs(PairsCmd::Audit) => "pairs audit",
            Command::Train => "train",
            Command::Sample => "sample",
            Command::Eval => "eval",
            Command::Sweep => "sweep",
            Command::Ablation(AblationCmd::Contours) => "ablation contours",
            Command::Theory => "theory",
            Command::Plot => "plot",
            #[cfg(feature = "server")]
            Command::Serve { .. } => "serve",
        }
    }
}

/// Loads the config file (if any) and applies flag overrides.
pub fn resolve_config(args: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.out = o.clone();
    }
    if let Some(d) = &args.dataset {
        cfg.dataset = DatasetSpec::from_flag(d);
    }
    Ok(cfg)
}

/// Stage seeds all derive from the root seed by name.
struct Seeds(SeedStream);

impl Seeds {
    fn gold(&self) -> u64 {
        self.0.seed("gold")
    }
    fn classifier(&self) -> u64 {
        self.0.seed("classifier")
    }
    fn generator(&self) -> u64 {
        self.0.seed("generator")
    }
    fn sampler(&self) -> u64 {
        self.0.seed("sampler")
    }
    fn theory(&self) -> u64 {
        self.0.seed("theory")
    }
    fn sweep(&self, lambda: f64) -> u64 {
        self.0.child("sweep").seed(&format!("lambda-{lambda}"))
    }
}

/// Best-of-N output of `sample`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub method: String,
    pub sample: SampleConfig,
    pub queries: Vec<Vec<f64>>,
    pub recourse: Vec<Recourse>,
}

struct Ctx {
    cfg: RunConfig,
    dir: PathBuf,
    seeds: Seeds,
    manifest: Manifest,
}

impl Ctx {
    fn new(command: &str, cfg: RunConfig) -> Result<Self> {
        let dir = cfg.out.clone();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self {
            seeds: Seeds(SeedStream::new(cfg.seed)),
            manifest: Manifest::new(command, &cfg)?,
            cfg,
            dir,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Path of a required input, recorded in the manifest.
    fn need(&mut self, name: &str, producer: &str) -> Result<PathBuf> {
        let p = self.path(name);
        if !p.is_file() {
            return Err(Error::Invalid(format!(
                "missing {}; run `recourse {producer}` first",
                p.display()
            )));
        }
        self.manifest.input(&self.dir, name)?;
        Ok(p)
    }

    fn labeled(&mut self) -> Result<DataBundle> {
        DataBundle::load(&self.need(LABELED, "gold label")?)
    }

    fn gold(&mut self) -> Result<Gold> {
        Gold::load(&self.need(GOLD, "gold train")?)
    }

    fn classifier(&mut self) -> Result<MlpClassifier> {
        MlpClassifier::load(&self.need(CLASSIFIER, "clf train")?)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let p = self.path(name);
        std::fs::write(&p, serde_json::to_vec_pretty(value)?).map_err(|e| Error::io(&p, e))?;
        self.manifest.output(&self.dir, name)
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        self.manifest.output(&self.dir, name)
    }

    fn produced(&mut self, name: &str) -> Result<()> {
        self.manifest.output(&self.dir, name)
    }

    fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            seed,
            ..self.cfg.train.clone()
        }
    }

    fn sample_config(&self) -> SampleConfig {
        SampleConfig {
            seed: self.seeds.sampler(),
            ..self.cfg.sample
        }
    }

    fn finish(self) -> Result<()> {
        self.manifest.write(&self.dir)
    }
}

/// Runs one parsed command. Output for people goes to stdout.
pub fn run(cli: Cli) -> Result<()> {
    let cfg = resolve_config(&cli.global)?;
    let mut ctx = Ctx::new(cli.command.name(), cfg)?;
    match cli.command {
        Command::Data(DataCmd::Gen) => data_gen(&mut ctx)?,
        Command::Data(DataCmd::Inspect) => data_inspect(&mut ctx)?,
        Command::Gold(GoldCmd::Train) => gold_train(&mut ctx)?,
        Command::Gold(GoldCmd::Label) => gold_label(&mut ctx)?,
        Command::Clf(ClfCmd::Train) => clf_train(&mut ctx)?,
        Command::Pairs(PairsCmd::Audit) => pairs_audit(&mut ctx)?,
        Command::Train => train_model(&mut ctx)?,
        Command::Sample => sample(&mut ctx)?,
        Command::Eval => eval(&mut ctx)?,
        Command::Sweep => sweep(&mut ctx)?,
        Command::Ablation(AblationCmd::Contours) => contours(&mut ctx)?,
        Command::Theory => theory(&mut ctx)?,
        Command::Plot => plot(&mut ctx)?,
        #[cfg(feature = "server")]
        Command::Serve { addr } => return crate::service::http::serve_dir(&addr, &ctx.dir),
    }
    ctx.finish()
}

/// One-line JSON error for stderr.
pub fn error_line(e: &Error) -> String {
    serde_json::json!({"error": e.code(), "message": e.to_string()}).to_string()
}

fn data_gen(ctx: &mut Ctx) -> Result<()> {
    if let DatasetSpec::Csv { path, schema, .. } = &ctx.cfg.dataset {
        ctx.manifest.inputs.push(ArtifactRef {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        ctx.manifest.inputs.push(ArtifactRef {
            path: schema.display().to_string(),
            sha256: sha256_file(schema)?,
        });
    }
    let bundle = ctx.cfg.dataset.load(ctx.cfg.seed)?;
    let p = ctx.path(DATA);
    bundle.save(&p)?;
    ctx.produced(DATA)?;
    println!(
        "{}: {} train / {} test rows, {} encoded features",
        bundle.name,
        bundle.train.len(),
        bundle.test.len(),
        bundle.schema().encoded_dim()
    );
    Ok(())
}

#[derive(Serialize)]
struct FeatureSummary {
    name: String,
    kind: String,
    mutable: bool,
    range: Option<(f64, f64)>,
    categories: Option<Vec<String>>,
}

fn data_inspect(ctx: &mut Ctx) -> Result<()> {
    let name = if ctx.path(LABELED).is_file() { LABELED } else { DATA };
    let bundle = DataBundle::load(&ctx.need(name, "data gen")?)?;
    let positives = |d: &crate::data::Dataset| d.labels().map(|l| l.iter().filter(|&&y| y == 1).count());
    let features: Vec<FeatureSummary> = bundle
        .schema()
        .features
        .iter()
        .zip(&bundle.preprocessor.scalers)
        .map(|(f, s)| {
            let (range, categories) = match s {
                crate::data::FeatureScaler::Continuous { min, max } => (Some((*min, *max)), None),
                crate::data::FeatureScaler::Categorical { vocab } => (None, Some(vocab.clone())),
            };
            FeatureSummary {
                name: f.name.clone(),
                kind: format!("{:?}", f.kind).to_lowercase(),
                mutable: f.mutable,
                range,
                categories,
            }
        })
        .collect();
    let summary = serde_json::json!({
        "file": name,
        "dataset": bundle.name,
        "train": bundle.train.len(),
        "test": bundle.test.len(),
        "train_positives": positives(&bundle.train)?,
        "test_positives": positives(&bundle.test)?,
        "encoded_dim": bundle.schema().encoded_dim(),
        "features": features,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn gold_train(ctx: &mut Ctx) -> Result<()> {
    let bundle = DataBundle::load(&ctx.need(DATA, "data gen")?)?;
    let gold = build_gold(&bundle, &ctx.cfg.forest, ctx.seeds.gold())?;
    gold.save(&ctx.path(GOLD))?;
    ctx.produced(GOLD)?;
    let acc = accuracy(&gold, &bundle.test.rows, bundle.test.labels()?)?;
    println!(
        "gold {} test accuracy against generator labels: {acc:.4}",
        gold_kind(&gold)
    );
    Ok(())
}

fn gold_kind(g: &Gold) -> &'static str {
    match g {
        Gold::Analytic(_) => "analytic",
        Gold::Forest(_) => "forest",
    }
}

fn gold_label(ctx: &mut Ctx) -> Result<()> {
    let mut bundle = DataBundle::load(&ctx.need(DATA, "data gen")?)?;
    let gold = ctx.gold()?;
    relabel(&mut bundle, &gold, ctx.seeds.gold())?;
    bundle.save(&ctx.path(LABELED))?;
    ctx.produced(LABELED)?;
    let pos = bundle.train.labels()?.iter().filter(|&&y| y == 1).count();
    println!("relabeled {} train rows ({pos} favorable)", bundle.train.len());
    Ok(())
}

fn clf_train(ctx: &mut Ctx) -> Result<()> {
    let bundle = ctx.labeled()?;
    let cfg = MlpConfig {
        seed: ctx.seeds.classifier(),
        ..ctx.cfg.classifier
    };
    let h = train_mlp(&bundle.train, Some(&bundle.test), &cfg)?;
    h.save(&ctx.path(CLASSIFIER))?;
    ctx.produced(CLASSIFIER)?;
    println!(
        "classifier accuracy: train {:.4}, test {:.4}",
        h.train_accuracy,
        h.test_accuracy.unwrap_or(f64::NAN)
    );
    Ok(())
}

#[derive(Serialize)]
struct PairAudit {
    negatives: usize,
    pool: usize,
    skipped: usize,
    lambda: f64,
    top_k: usize,
    /// Mean over negatives of 1 / Σ q².
    mean_effective_support: f64,
    mean_mode_weight: f64,
    mean_mode_cost: f64,
}

fn pairs_audit(ctx: &mut Ctx) -> Result<()> {
    let bundle = ctx.labeled()?;
    let h = ctx.classifier()?;
    let t = ctx.cfg.train.clone();
    let part = partition(&bundle.train, &h, t.gamma)?;
    let cost = CostFn::new(bundle.schema());
    let table = PairTable::build(&bundle.train, &part, &cost, t.lambda, t.top_k)?;
    table.dump_jsonl(&ctx.path("pairs.jsonl"))?;
    ctx.produced("pairs.jsonl")?;
    let n = table.dists.len() as f64;
    let mean = |f: &dyn Fn(usize) -> f64| (0..table.dists.len()).map(f).sum::<f64>() / n;
    let audit = PairAudit {
        negatives: table.negatives.len(),
        pool: table.pool.len(),
        skipped: table.skipped.len(),
        lambda: t.lambda,
        top_k: t.top_k,
        mean_effective_support: mean(&|i| 1.0 / table.dists[i].weights.iter().map(|w| w * w).sum::<f64>()),
        mean_mode_weight: mean(&|i| table.dists[i].weights[0]),
        mean_mode_cost: mean(&|i| {
            let x = &bundle.train.rows[table.negatives[i]];
            let y = &bundle.train.rows[table.pool[table.dists[i].mode()]];
            cost.cost(x, y).unwrap_or(f64::NAN)
        }),
    };
    println!("{}", serde_json::to_string_pretty(&audit)?);
    ctx.write_json("pairs_audit.json", &audit)
}

fn train_model(ctx: &mut Ctx) -> Result<()> {
    let bundle = ctx.labeled()?;
    let h = ctx.classifier()?;
    let cfg = ctx.train_config(ctx.seeds.generator());
    let part = partition(&bundle.train, &h, cfg.gamma)?;
    let (model, summary) = train_with_partition(&bundle.train, &part, &cfg)?;
    model.save(&ctx.path(MODEL))?;
    ctx.produced(MODEL)?;
    ctx.write_json("train_summary.json", &summary)?;
    println!(
        "trained on {} negatives / {} pool rows; loss {:.4} -> {:.4}",
        summary.negatives,
        summary.pool,
        summary.losses.first().copied().unwrap_or(f64::NAN),
        summary.losses.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn sample(ctx: &mut Ctx) -> Result<()> {
    let bundle = ctx.labeled()?;
    let h = ctx.classifier()?;
    let model = RecourseModel::load(&ctx.need(MODEL, "train")?, Some(bundle.schema()))?;
    let queries = eval_queries(&bundle.test, &h, ctx.cfg.eval.size)?;
    let cfg = ctx.sample_config();
    let recourse = sample_recourse_batch(&queries, &model, &h, &bundle.schema().immutable_mask(), &cfg)?;
    let set = CandidateSet {
        method: "GenRe".into(),
        sample: cfg,
        queries,
        recourse,
    };
    ctx.write_json(CANDIDATES, &set)?;
    println!("sampled {} candidates for {} queries", cfg.n_samples, set.queries.len());
    Ok(())
}

fn experiment(ctx: &mut Ctx, queries: Vec<Vec<f64>>) -> Result<Experiment> {
    let bundle = ctx.labeled()?;
    let gold = ctx.gold()?;
    let h = ctx.classifier()?;
    let lof = fit_lof(&bundle, &gold, &ctx.cfg.eval.lof)?;
    let queries = if queries.is_empty() {
        eval_queries(&bundle.test, &h, ctx.cfg.eval.size)?
    } else {
        queries
    };
    Ok(Experiment {
        bundle,
        gold,
        h,
        lof,
        queries,
        seeds: ctx.seeds.0,
    })
}

fn eval(ctx: &mut Ctx) -> Result<()> {
    let set: CandidateSet = read_json(&ctx.need(CANDIDATES, "sample")?)?;
    let exp = experiment(ctx, set.queries.clone())?;
    let best: Vec<Vec<f64>> = set.recourse.iter().map(|r| r.best().x.clone()).collect();
    let mut methods = vec![exp.score(&set.method, &best)?];
    if ctx.cfg.eval.baselines {
        let gamma = ctx.cfg.train.gamma;
        for v in [
            NnrVariant::Plain,
            NnrVariant::ConfidentH { gamma },
            NnrVariant::PoolConstrained { gamma },
        ] {
            methods.push(exp.run_nnr(v)?.0);
        }
        methods.push(exp.run_wachter(&ctx.cfg.eval.wachter)?.0);
    }
    let report = MetricsReport {
        dataset: exp.bundle.name.clone(),
        d: exp.dim(),
        methods,
    };
    let table = report.table();
    print!("{table}");
    ctx.write_json(REPORT, &report)?;
    ctx.write_text(REPORT_TABLE, &table)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

fn sweep(ctx: &mut Ctx) -> Result<()> {
    let exp = experiment(ctx, Vec::new())?;
    let lambdas = ctx.cfg.sweep.lambdas.clone();
    let sample = ctx.sample_config();
    let configs: Vec<TrainConfig> = lambdas
        .iter()
        .map(|&l| TrainConfig {
            lambda: l,
            ..ctx.train_config(ctx.seeds.sweep(l))
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.cfg.sweep.threads)
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    let results: Vec<_> = pool.install(|| {
        configs
            .par_iter()
            .map(|cfg| {
                let (model, _) = exp.train_generator(cfg)?;
                Ok(exp.run_sampler("GenRe", &model, &sample)?.0)
            })
            .collect()
    });
    let mut results = results.into_iter();
    let report: SweepResult = lambda_sweep(&lambdas, exp.dim(), |_| results.next().expect("one result per λ"));
    println!("{:>6}  {:>7}  {:>5}  {:>5}", "lambda", "-Cost/d", "Val", "LOF");
    for p in &report.points {
        println!(
            "{:>6}  {:>7.4}  {:>5.2}  {:>5.2}",
            p.lambda, p.neg_cost, p.validity, p.lof
        );
    }
    for (l, e) in &report.failures {
        println!("{l:>6}  failed: {e}");
    }
    ctx.write_json("sweep.json", &report)
}

#[derive(Serialize)]
struct FieldSummary {
    argmax: [f64; 2],
    /// Grid fraction holding half the probability mass.
    high_density_fraction: f64,
}

impl From<&DensityField> for FieldSummary {
    fn from(f: &DensityField) -> Self {
        Self {
            argmax: f.argmax(),
            high_density_fraction: f.high_density_fraction(0.5),
        }
    }
}

fn contours(ctx: &mut Ctx) -> Result<()> {
    let exp = experiment(ctx, Vec::new())?;
    let model = RecourseModel::load(&ctx.need(MODEL, "train")?, Some(exp.bundle.schema()))?;
    let cfg = ctx.train_config(ctx.seeds.generator());
    let uncond = exp.train_unconditional(&cfg)?;
    uncond.save(&ctx.path(UNCONDITIONAL))?;
    ctx.produced(UNCONDITIONAL)?;
    let query = match ctx.cfg.contours.query {
        Some(q) => q.to_vec(),
        None => exp.queries[0].clone(),
    };
    let res = ctx.cfg.contours.resolution;
    let cond = density_contours(&model, &query, res)?;
    let marg = density_contours(&uncond, &query, res)?;
    ctx.write_text("contours_conditional.svg", &cond.svg()?)?;
    ctx.write_text("contours_unconditional.svg", &marg.svg()?)?;
    let summary = serde_json::json!({
        "query": query,
        "conditional": FieldSummary::from(&cond),
        "unconditional": FieldSummary::from(&marg),
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    ctx.write_json("contours.json", &summary)
}

fn theory(ctx: &mut Ctx) -> Result<()> {
    let oracle = TheoryOracle::default();
    let opts = &ctx.cfg.theory;
    let report = theory_consistency(&oracle, &opts.sizes, opts.trials, ctx.seeds.theory())?;
    let degenerate = degenerate_check(&oracle, *opts.sizes.last().unwrap_or(&6400), ctx.seeds.theory())?;
    for (n, m) in report.sizes.iter().zip(&report.mse) {
        println!("N+ = {n:>6}  MSE = {m:.3e}");
    }
    println!("slope = {:.4}", report.slope);
    println!(
        "degenerate: equals pool mean = {}, within 3σ/√N = {}",
        degenerate.equals_pool_mean(),
        degenerate.within_tolerance()
    );
    ctx.write_json(
        "theory.json",
        &serde_json::json!({"consistency": report, "degenerate": degenerate}),
    )
}

fn plot(ctx: &mut Ctx) -> Result<()> {
    let bundle = ctx.labeled()?;
    let edges: Vec<(Vec<f64>, Vec<f64>)> = if ctx.path(CANDIDATES).is_file() {
        let set: CandidateSet = read_json(&ctx.need(CANDIDATES, "sample")?)?;
        set.queries
            .into_iter()
            .zip(set.recourse.iter().map(|r| r.best().x.clone()))
            .collect()
    } else {
        Vec::new()
    };
    let svg = scatter_svg(&bundle.train.rows, bundle.train.labels()?, &edges)?;
    write_svg(&ctx.path("plot.svg"), &svg)?;
    ctx.produced("plot.svg")?;
    println!(
        "wrote {} ({} points, {} edges)",
        ctx.path("plot.svg").display(),
        bundle.train.len(),
        edges.len()
    );
    Ok(())
}
