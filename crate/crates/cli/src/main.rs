use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use ordbasis::basis::{
    choose_basis, BasisConfig, BasisDocument, BasisRun, CandidateRule, HullRule, Strategy,
};
use ordbasis::data::{
    generate, load_csv, load_positions, save_csv, save_positions, Dataset, DatasetManifest,
    GenParams, GmmParams, Kind,
};
use ordbasis::embed::{embed_all, embed_all_linear};
use ordbasis::eval::{evaluate, TableRow};
use ordbasis::oracle::GroundTruthOracle;
use ordbasis::pipeline::{run_pipeline, Method, PipelineConfig};
use ordbasis::refine::{
    basis_chains, basis_triples, chain_triples, default_k, harvest_knn_chains, harvest_knn_triples,
    Encoding, HarvestMode, TripleSet,
};
use ordbasis::soe::{soe_fit_doubling, SoeConfig, SoeResult, StepSchedule};
use ordbasis::Error;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(name = "ordbasis", version, about = "Ordinal embedding from triplet comparisons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a synthetic dataset and save it as CSV.
    Generate(GenerateArgs),
    /// Discover a basis and save it as JSON.
    Basis(BasisArgs),
    /// Turn a saved basis into ordinal coordinates.
    Embed(EmbedArgs),
    /// Export sorted knowledge plus kNN refinement as triples.
    Refine(RefineArgs),
    /// Fit a soft ordinal embedding to a triples file.
    Soe(SoeArgs),
    /// Score an embedding against the hidden points.
    Evaluate(EvaluateArgs),
    /// Run every stage end to end.
    Pipeline(PipelineArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
struct DataArgs {
    /// Numeric CSV of hidden points.
    #[arg(long, conflicts_with = "generate")]
    dataset: Option<PathBuf>,
    /// Synthetic dataset, e.g. `gmm:500:3`.
    #[arg(long, value_name = "KIND:N:D")]
    generate: Option<String>,
    /// Mixture components for `gmm`.
    #[arg(long, default_value_t = 5)]
    gmm_components: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
struct RunArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for SOE restarts and evaluation.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum StrategyArg {
    ChooseBasis,
    Frft,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum CandidateRuleArg {
    TwoCenter,
    Literal,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum HullRuleArg {
    AffineSet,
    AllEndpoints,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum EncodingArg {
    Consecutive,
    Dyadic,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
enum MethodArg {
    #[value(name = "basis")]
    #[serde(rename = "basis")]
    Basis,
    #[value(name = "basis+soe")]
    #[serde(rename = "basis+soe")]
    BasisSoe,
    #[value(name = "extra+soe")]
    #[serde(rename = "extra+soe")]
    ExtraSoe,
}

#[derive(Args, Debug, Clone, Serialize)]
struct BasisOpts {
    #[arg(long, value_enum, default_value_t = StrategyArg::ChooseBasis)]
    strategy: StrategyArg,
    #[arg(long, value_enum, default_value_t = CandidateRuleArg::TwoCenter)]
    candidate_rule: CandidateRuleArg,
    #[arg(long, value_enum, default_value_t = HullRuleArg::AffineSet)]
    hull_rule: HullRuleArg,
}

#[derive(Args, Debug, Clone, Serialize)]
struct RefineOpts {
    /// Neighbourhood size; defaults to ceil(log2 n).
    #[arg(long)]
    k: Option<usize>,
    /// Only separate the k nearest instead of sorting all 2k.
    #[arg(long)]
    select: bool,
    /// How sorted chains are written as triples.
    #[arg(long, value_enum, default_value_t = EncodingArg::Dyadic)]
    encoding: EncodingArg,
}

#[derive(Args, Debug, Clone, Serialize)]
struct SoeOpts {
    #[arg(long, default_value_t = 20)]
    soe_restarts: usize,
    #[arg(long, default_value_t = 0.1)]
    soe_margin: f64,
    #[arg(long, default_value_t = 1e-3)]
    loss_threshold: f64,
    #[arg(long, default_value_t = 3000)]
    max_iterations: usize,
}

#[derive(Args, Debug, Serialize)]
struct GenerateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug, Serialize)]
struct BasisArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    basis: BasisOpts,
}

#[derive(Args, Debug, Serialize)]
struct EmbedArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Basis JSON; defaults to `<out>/basis.json`.
    #[arg(long)]
    basis: Option<PathBuf>,
    /// Pick the truly nearest lens member (needs the dataset).
    #[arg(long)]
    linear_search_coords: bool,
}

#[derive(Args, Debug, Serialize)]
struct RefineArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    basis: Option<PathBuf>,
    /// Embedding CSV; defaults to `<out>/embedding.csv`.
    #[arg(long)]
    embedding: Option<PathBuf>,
    #[command(flatten)]
    refine: RefineOpts,
}

#[derive(Args, Debug, Serialize)]
struct SoeArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Triples file; defaults to `<out>/triples.txt`.
    #[arg(long)]
    triples: Option<PathBuf>,
    /// Number of objects; defaults to one past the largest index seen.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[command(flatten)]
    soe: SoeOpts,
}

#[derive(Args, Debug, Serialize)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Positions or embedding CSV (`id,c0,...`).
    #[arg(long)]
    embedding: PathBuf,
    /// Method name written into the report row.
    #[arg(long, default_value = "external")]
    label: String,
    /// Neighbourhood size for kNN precision.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
struct PipelineArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Basis)]
    method: MethodArg,
    #[command(flatten)]
    basis: BasisOpts,
    #[command(flatten)]
    refine: RefineOpts,
    #[command(flatten)]
    soe: SoeOpts,
    /// Also write the triples file for the plain basis method.
    #[arg(long)]
    emit_triples: bool,
    #[arg(long)]
    linear_search_coords: bool,
}

enum CliError {
    Usage(String),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

type CliResult<T> = Result<T, CliError>;

impl BasisOpts {
    fn config(&self, seed: u64) -> BasisConfig {
        BasisConfig {
            strategy: match self.strategy {
                StrategyArg::ChooseBasis => Strategy::ChooseBasis,
                StrategyArg::Frft => Strategy::Frft,
            },
            candidate_rule: match self.candidate_rule {
                CandidateRuleArg::TwoCenter => CandidateRule::TwoCenter,
                CandidateRuleArg::Literal => CandidateRule::Literal,
            },
            hull_rule: match self.hull_rule {
                HullRuleArg::AffineSet => HullRule::AffineSet,
                HullRuleArg::AllEndpoints => HullRule::AllEndpoints,
            },
            seed,
        }
    }
}

impl RefineOpts {
    fn encoding(&self) -> Encoding {
        match self.encoding {
            EncodingArg::Consecutive => Encoding::Consecutive,
            EncodingArg::Dyadic => Encoding::Dyadic,
        }
    }

    fn mode(&self) -> HarvestMode {
        if self.select {
            HarvestMode::Select
        } else {
            HarvestMode::Sort
        }
    }
}

impl SoeOpts {
    fn config(&self, dim: usize, run: &RunArgs) -> SoeConfig {
        SoeConfig {
            dim,
            margin: self.soe_margin,
            restarts: self.soe_restarts,
            max_iterations: self.max_iterations,
            loss_threshold: self.loss_threshold,
            step_schedule: StepSchedule::default(),
            seed: run.seed,
            threads: run.threads,
        }
    }
}

fn parse_generate(spec: &str) -> CliResult<(Kind, usize, usize)> {
    let usage = || CliError::Usage(format!("--generate expects KIND:N:D, got `{spec}`"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [kind, n, d] = parts.as_slice() else {
        return Err(usage());
    };
    let kind: Kind = kind.parse().map_err(|e: Error| CliError::Usage(e.to_string()))?;
    let n = n.parse().map_err(|_| usage())?;
    let d = d.parse().map_err(|_| usage())?;
    Ok((kind, n, d))
}

fn gen_params(data: &DataArgs) -> GenParams {
    GenParams {
        gmm: GmmParams {
            components: data.gmm_components,
            ..GmmParams::default()
        },
    }
}

fn load_dataset(data: &DataArgs, seed: u64) -> CliResult<Dataset> {
    match (&data.dataset, &data.generate) {
        (Some(path), _) => Ok(load_csv(path)?),
        (None, Some(spec)) => {
            let (kind, n, d) = parse_generate(spec)?;
            Ok(generate(kind, n, d, seed, &gen_params(data))?)
        }
        (None, None) => Err(CliError::Usage("one of --dataset or --generate is required".into())),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Files written by a command, in creation order.
#[derive(Default)]
struct Artifacts {
    paths: Vec<PathBuf>,
}

impl Artifacts {
    fn add(&mut self, path: PathBuf) -> PathBuf {
        self.paths.push(path.clone());
        path
    }

    fn describe(&self) -> Vec<Value> {
        self.paths
            .iter()
            .map(|p| {
                let name = p.file_name().map(|n| n.to_string_lossy().into_owned());
                let hash = fs::read(p).ok().map(|b| sha256_hex(&b));
                json!({ "file": name, "sha256": hash })
            })
            .collect()
    }
}

fn read_basis(path: &Path) -> CliResult<BasisRun> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let doc: BasisDocument = serde_json::from_str(&text).map_err(Error::from)?;
    Ok(BasisRun::from_document(doc)?)
}

fn soe_summary(attempts: &[SoeResult]) -> Value {
    Value::Array(
        attempts
            .iter()
            .map(|a| {
                json!({
                    "dim": a.positions.dim(),
                    "final_loss": a.final_loss,
                    "converged": a.converged,
                    "restarts_used": a.restarts_used,
                    "discarded": a.discarded,
                    "restart_losses": a.restart_losses,
                })
            })
            .collect(),
    )
}

fn cmd_generate(args: &GenerateArgs, out: &mut Artifacts) -> CliResult<Value> {
    let spec = args
        .data
        .generate
        .as_deref()
        .ok_or_else(|| CliError::Usage("generate needs --generate KIND:N:D".into()))?;
    let (kind, n, d) = parse_generate(spec)?;
    let params = gen_params(&args.data);
    let ds = generate(kind, n, d, args.run.seed, &params)?;
    save_csv(&out.add(args.run.out.join("dataset.csv")), &ds)?;
    let manifest = DatasetManifest::new(kind, n, d, args.run.seed, &params);
    write_json(&out.add(args.run.out.join("dataset.manifest.json")), &manifest)?;
    println!("{} points of {} written", ds.len(), ds.name);
    Ok(json!({ "dataset": ds.name, "n": n, "d": d }))
}

fn cmd_basis(args: &BasisArgs, out: &mut Artifacts) -> CliResult<Value> {
    let ds = load_dataset(&args.data, args.run.seed)?;
    let mut oracle = GroundTruthOracle::from_points(ds.points);
    let run = choose_basis(&mut oracle, &args.basis.config(args.run.seed))?;
    write_json(&out.add(args.run.out.join("basis.json")), &run.to_document())?;
    println!(
        "d_hat={} comparisons={}",
        run.basis.dimension_estimate, run.basis.comparisons_used
    );
    Ok(json!({
        "d_hat": run.basis.dimension_estimate,
        "comparisons_unique": run.basis.comparisons_used,
        "comparisons_total": run.basis.comparisons_total,
    }))
}

fn cmd_embed(args: &EmbedArgs, out: &mut Artifacts) -> CliResult<Value> {
    let basis_path = args.basis.clone().unwrap_or_else(|| args.run.out.join("basis.json"));
    let run = read_basis(&basis_path)?;
    let (embedding, spent) = if args.linear_search_coords {
        let ds = load_dataset(&args.data, args.run.seed)?;
        let mut oracle = GroundTruthOracle::from_points(ds.points);
        let e = embed_all_linear(&run.ranks, &run.basis.axes, &mut oracle)?;
        (e, oracle.ledger().unique_count())
    } else {
        (embed_all(&run)?, 0)
    };
    save_positions(&out.add(args.run.out.join("embedding.csv")), &embedding.to_positions())?;
    println!("{} objects embedded in {} axes", embedding.len(), embedding.dim());
    Ok(json!({ "basis_ref": embedding.basis_ref, "comparisons_unique": spent }))
}

fn cmd_refine(args: &RefineArgs, out: &mut Artifacts) -> CliResult<Value> {
    let ds = load_dataset(&args.data, args.run.seed)?;
    let basis_path = args.basis.clone().unwrap_or_else(|| args.run.out.join("basis.json"));
    let emb_path = args
        .embedding
        .clone()
        .unwrap_or_else(|| args.run.out.join("embedding.csv"));
    let run = read_basis(&basis_path)?;
    let positions = load_positions(&emb_path)?;
    let mut oracle = GroundTruthOracle::from_points(ds.points);
    let k = args.refine.k.unwrap_or_else(|| default_k(oracle.len()));
    let mut set = chain_triples(&basis_chains(&run.ranks)?, args.refine.encoding())?;
    let extra = match args.refine.mode() {
        HarvestMode::Sort => chain_triples(
            &harvest_knn_chains(&positions, &mut oracle, k)?,
            args.refine.encoding(),
        )?,
        HarvestMode::Select => harvest_knn_triples(&positions, &mut oracle, k, HarvestMode::Select)?,
    };
    set.extend(&extra);
    set.write(&out.add(args.run.out.join("triples.txt")))?;
    println!("{} triples written", set.len());
    Ok(json!({
        "triples": set.len(),
        "k": k,
        "comparisons_unique": oracle.ledger().unique_count(),
    }))
}

fn cmd_soe(args: &SoeArgs, out: &mut Artifacts) -> CliResult<Value> {
    let path = args.triples.clone().unwrap_or_else(|| args.run.out.join("triples.txt"));
    let set = TripleSet::read(&path)?;
    let n = args.n.unwrap_or_else(|| set.object_count());
    let attempts = soe_fit_doubling(&set, n, &args.soe.config(args.dim, &args.run))?;
    let last = attempts.last().expect("at least one attempt");
    save_positions(&out.add(args.run.out.join("positions.csv")), &last.positions)?;
    let summary = soe_summary(&attempts);
    write_json(&out.add(args.run.out.join("soe.json")), &summary)?;
    println!(
        "dim={} loss={} converged={}",
        last.positions.dim(),
        last.final_loss,
        last.converged
    );
    Ok(json!({ "soe": summary }))
}

fn cmd_evaluate(args: &EvaluateArgs, out: &mut Artifacts) -> CliResult<Value> {
    let ds = load_dataset(&args.data, args.run.seed)?;
    let positions = load_positions(&args.embedding)?;
    let report = evaluate(&ds.points, &positions, args.k)?;
    let row = TableRow::from_report(&args.label, &ds.name, ds.dim(), &report);
    write_json(&out.add(args.run.out.join("report.json")), &row)?;
    write_json(&out.add(args.run.out.join("eval.json")), &report)?;
    println!("{}", serde_json::to_string(&row).map_err(Error::from)?);
    Ok(json!({}))
}

fn cmd_pipeline(args: &PipelineArgs, out: &mut Artifacts) -> CliResult<Value> {
    let ds = load_dataset(&args.data, args.run.seed)?;
    let method = match args.method {
        MethodArg::Basis => Method::Basis,
        MethodArg::BasisSoe => Method::BasisSoe,
        MethodArg::ExtraSoe => Method::ExtraSoe,
    };
    let config = PipelineConfig {
        method,
        seed: args.run.seed,
        basis: args.basis.config(args.run.seed),
        k: args.refine.k,
        harvest_mode: args.refine.mode(),
        encoding: args.refine.encoding(),
        soe: args.soe.config(1, &args.run),
        linear_search_coords: args.linear_search_coords,
    };
    let result = run_pipeline(&ds.points, &config)?;
    let dir = &args.run.out;
    write_json(&out.add(dir.join("basis.json")), &result.run.to_document())?;
    save_positions(&out.add(dir.join("embedding.csv")), &result.embedding.to_positions())?;
    match &result.triples {
        Some(set) => set.write(&out.add(dir.join("triples.txt")))?,
        None if args.emit_triples => {
            basis_triples(&result.run.ranks)?.write(&out.add(dir.join("triples.txt")))?
        }
        None => {}
    }
    save_positions(&out.add(dir.join("positions.csv")), &result.positions)?;
    if !result.soe_attempts.is_empty() {
        write_json(&out.add(dir.join("soe.json")), &soe_summary(&result.soe_attempts))?;
    }
    let row = TableRow::from_report(&method.to_string(), &ds.name, ds.dim(), &result.report);
    write_json(&out.add(dir.join("report.json")), &row)?;
    write_json(&out.add(dir.join("eval.json")), &result.report)?;
    println!("{}", serde_json::to_string(&row).map_err(Error::from)?);
    let embed_cost = result.ledger.after_embed.unique - result.ledger.after_basis.unique;
    Ok(json!({ "ledger": result.ledger, "embed_comparisons": embed_cost }))
}

fn execute(command: &Command, out: &mut Artifacts) -> CliResult<Value> {
    match command {
        Command::Generate(a) => cmd_generate(a, out),
        Command::Basis(a) => cmd_basis(a, out),
        Command::Embed(a) => cmd_embed(a, out),
        Command::Refine(a) => cmd_refine(a, out),
        Command::Soe(a) => cmd_soe(a, out),
        Command::Evaluate(a) => cmd_evaluate(a, out),
        Command::Pipeline(a) => cmd_pipeline(a, out),
    }
}

fn run_args(command: &Command) -> &RunArgs {
    match command {
        Command::Generate(a) => &a.run,
        Command::Basis(a) => &a.run,
        Command::Embed(a) => &a.run,
        Command::Refine(a) => &a.run,
        Command::Soe(a) => &a.run,
        Command::Evaluate(a) => &a.run,
        Command::Pipeline(a) => &a.run,
    }
}

fn resolved_config(command: &Command) -> (&'static str, Value) {
    let to = |v: Result<Value, serde_json::Error>| v.unwrap_or(Value::Null);
    match command {
        Command::Generate(a) => ("generate", to(serde_json::to_value(a))),
        Command::Basis(a) => ("basis", to(serde_json::to_value(a))),
        Command::Embed(a) => ("embed", to(serde_json::to_value(a))),
        Command::Refine(a) => ("refine", to(serde_json::to_value(a))),
        Command::Soe(a) => ("soe", to(serde_json::to_value(a))),
        Command::Evaluate(a) => ("evaluate", to(serde_json::to_value(a))),
        Command::Pipeline(a) => ("pipeline", to(serde_json::to_value(a))),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let run = run_args(&cli.command).clone();
    if run.threads < 1 {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(1);
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(run.threads).build_global() {
        info!("keeping existing thread pool: {e}");
    }
    if let Err(e) = fs::create_dir_all(&run.out) {
        eprintln!("error: {}: {e}", run.out.display());
        return ExitCode::from(2);
    }

    let (name, config) = resolved_config(&cli.command);
    let config_hash = sha256_hex(config.to_string().as_bytes());
    let mut artifacts = Artifacts::default();
    let outcome = execute(&cli.command, &mut artifacts);
    let (status, details, code) = match outcome {
        Ok(details) => (json!("ok"), details, 0),
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            (json!({ "error": msg }), Value::Null, 1)
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            (json!({ "error": e.to_string() }), Value::Null, 2)
        }
    };
    let manifest = json!({
        "command": name,
        "version": VERSION,
        "seed": run.seed,
        "config": config,
        "config_hash": config_hash,
        "status": status,
        "details": details,
        "artifacts": artifacts.describe(),
    });
    if let Err(e) = write_json(&run.out.join("manifest.json"), &manifest) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    ExitCode::from(code)
}
