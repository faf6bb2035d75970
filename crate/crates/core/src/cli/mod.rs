//! Operator surface: one binary, five subcommands covering world
//! generation, training, evaluation, interactive serving, and the fusion
//! scaling benchmark. Every subcommand is deterministic given its seed and
//! inputs (wall-time columns excepted).

mod bench;
mod serve;

pub use bench::{aic, cmd_bench_fid, max_rel_residual, polyfit, BenchFidArgs, BENCH_COUNTS};
pub use serve::{cmd_serve, ServeArgs};

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::context::BundleLimits;
use crate::error::{Error, Result};
use crate::eval::{
    generate_world, load_world, run_ablation, save_corpus, save_world, AblationGrid,
    SyntheticWorld, WorldConfig,
};
use crate::model::{load_checkpoint, save_checkpoint, ModelConfig, UnityModel};
use crate::retrieval::RetrievalPath;
use crate::training::{stats_csv, train_run, TrainConfig};

/// Name of the environment variable that overrides `--seed`.
pub const SEED_ENV: &str = "AUGU_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "augu",
    version,
    about = "Context-augmented keyword retrieval: generate a synthetic world, \
             train the dual-path model, evaluate, serve, and benchmark fusion scaling"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Directory all artifacts live under.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Model scale profile.
    #[arg(long, global = true, value_enum, default_value_t = Profile::Desk)]
    pub profile: Profile,

    /// Base seed for world, model init, and training shuffles
    /// (the AUGU_SEED environment variable takes precedence).
    #[arg(long, global = true, default_value_t = 7)]
    pub seed: u64,

    /// World file (default <out>/world.json).
    #[arg(long, global = true)]
    pub world: Option<PathBuf>,

    /// Keyword corpus file (default <out>/corpus.txt).
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,

    /// Context cache file (default <out>/cache.tsv).
    #[arg(long, global = true)]
    pub cache: Option<PathBuf>,

    /// Model checkpoint file (default <out>/model.ckpt).
    #[arg(long, global = true)]
    pub checkpoint: Option<PathBuf>,

    /// Evaluation report file (default <out>/report.csv).
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Profile {
    /// Small dimensions; full runs finish in minutes on a laptop core.
    Desk,
    /// Production-scale dimensions; expect hours per epoch.
    Paper,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Desk => "desk",
            Profile::Paper => "paper",
        }
    }

    pub fn model_config(self) -> ModelConfig {
        match self {
            Profile::Desk => ModelConfig::desk(),
            Profile::Paper => ModelConfig::paper(),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic world: world file, keyword corpus, and
    /// train/test pair files.
    GenWorld(GenWorldArgs),
    /// Train the model; writes a checkpoint and per-epoch stats CSV.
    Train(TrainArgs),
    /// Evaluate a checkpoint over context subsets and retrieval paths.
    Eval(EvalArgs),
    /// Interactive retrieval loop over stdin with the live context cache.
    Serve(ServeArgs),
    /// Benchmark fusion encoding against a full-concatenation encoder.
    BenchFid(BenchFidArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenWorld(_) => "gen-world",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Serve(_) => "serve",
            Command::BenchFid(_) => "bench-fid",
        }
    }
}

#[derive(Debug, Default, Args)]
pub struct GenWorldArgs {
    /// World config overrides as key=value (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,

    /// Overwrite existing output files.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Default, Args)]
pub struct TrainArgs {
    /// Optional `key = value` training config file.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Training config overrides as key=value (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,

    /// Zero every glancing maximum (the no-curriculum arm).
    #[arg(long)]
    pub no_glancing: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Comma-separated context subsets to evaluate.
    #[arg(long, default_value = "all", value_delimiter = ',')]
    pub contexts: Vec<String>,

    /// Retrieval path: dr, nlg, or both.
    #[arg(long, default_value = "both")]
    pub path: String,
}

impl Default for EvalArgs {
    fn default() -> Self {
        EvalArgs { contexts: vec!["all".into()], path: "both".into() }
    }
}

/// Resolved artifact locations for one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArtifactPaths {
    pub world: PathBuf,
    pub corpus: PathBuf,
    pub cache: PathBuf,
    pub checkpoint: PathBuf,
    pub report: PathBuf,
}

/// Everything a subcommand reads besides its own flags, resolved and
/// validated up front.
#[derive(Debug, Clone)]
pub struct CliConfig {
    pub subcommand: String,
    pub paths: ArtifactPaths,
    pub profile: Profile,
    pub seed: u64,
    /// Raw key=value overrides carried by the subcommand, if any.
    pub overrides: Vec<(String, String)>,
}

fn parse_overrides(raw: &[String]) -> Result<Vec<(String, String)>> {
    raw.iter()
        .map(|item| {
            let (k, v) = item.split_once('=').ok_or_else(|| {
                Error::Config(format!("override '{item}' is not of the form key=value"))
            })?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

impl Cli {
    /// Resolve paths, seed, and overrides; validates override syntax and the
    /// seed environment variable, not file existence (each subcommand checks
    /// its own preconditions before touching anything).
    pub fn resolve(&self) -> Result<CliConfig> {
        let seed = match std::env::var(SEED_ENV) {
            Ok(v) => v
                .parse::<u64>()
                .map_err(|_| Error::Config(format!("{SEED_ENV}='{v}' is not a u64")))?,
            Err(_) => self.seed,
        };
        let pick = |given: &Option<PathBuf>, name: &str| {
            given.clone().unwrap_or_else(|| self.out.join(name))
        };
        let overrides = match &self.command {
            Command::GenWorld(a) => parse_overrides(&a.set)?,
            Command::Train(a) => parse_overrides(&a.set)?,
            _ => Vec::new(),
        };
        Ok(CliConfig {
            subcommand: self.command.name().to_string(),
            paths: ArtifactPaths {
                world: pick(&self.world, "world.json"),
                corpus: pick(&self.corpus, "corpus.txt"),
                cache: pick(&self.cache, "cache.tsv"),
                checkpoint: pick(&self.checkpoint, "model.ckpt"),
                report: pick(&self.report, "report.csv"),
            },
            profile: self.profile,
            seed,
            overrides,
        })
    }
}

/// Dispatch a parsed invocation. Output goes to stdout; serve reads stdin.
pub fn run(cli: &Cli) -> Result<()> {
    let config = cli.resolve()?;
    match &cli.command {
        Command::GenWorld(args) => {
            cmd_gen_world(&config, args, &mut std::io::stdout())
        }
        Command::Train(args) => cmd_train(&config, args, &mut std::io::stdout()),
        Command::Eval(args) => cmd_eval(&config, args, &mut std::io::stdout()),
        Command::Serve(args) => {
            let stdin = std::io::stdin();
            cmd_serve(&config, args, stdin.lock(), &mut std::io::stdout())
        }
        Command::BenchFid(args) => {
            cmd_bench_fid(&config, args, &mut std::io::stdout())
        }
    }
}

/// Error for a missing input artifact (exit code 2: data, not usage).
fn require_file(path: &Path, hint: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Contract(format!(
            "missing input {}: {hint}",
            path.display()
        )))
    }
}

fn create_parent_dirs(paths: &[&Path]) -> Result<()> {
    for p in paths {
        if let Some(dir) = p.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir)?;
            }
        }
    }
    Ok(())
}

/// Train/test pair files emitted alongside the world (tab-separated).
pub const TRAIN_PAIRS_NAME: &str = "train_pairs.tsv";
pub const TEST_QUERIES_NAME: &str = "test_queries.tsv";

pub fn train_pairs_tsv(world: &SyntheticWorld) -> String {
    let mut out = String::from("surface\tintent\tkeyword_id\tmatch_type\tkeyword\n");
    for p in &world.train_pairs {
        let kw = &world.keywords[p.keyword_id as usize];
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            p.surface,
            p.intent,
            p.keyword_id,
            kw.match_type.name(),
            kw.text
        ));
    }
    out
}

pub fn test_queries_tsv(world: &SyntheticWorld) -> String {
    let mut out = String::from("surface\tintent\n");
    for q in &world.test_queries {
        out.push_str(&format!("{}\t{}\n", q.surface, q.intent));
    }
    out
}

/// Generate and write the world, corpus, and pair files. Refuses to clobber
/// existing outputs unless `--force` is given.
pub fn cmd_gen_world(
    config: &CliConfig,
    args: &GenWorldArgs,
    out: &mut impl std::io::Write,
) -> Result<()> {
    let mut wc = WorldConfig::default();
    for (k, v) in &config.overrides {
        wc.set(k, v)?;
    }
    let dir = config
        .paths
        .world
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let pairs_path = dir.join(TRAIN_PAIRS_NAME);
    let queries_path = dir.join(TEST_QUERIES_NAME);
    let outputs = [
        &config.paths.world,
        &config.paths.corpus,
        &pairs_path,
        &queries_path,
    ];
    if !args.force {
        for p in &outputs {
            if p.exists() {
                return Err(Error::Config(format!(
                    "refusing to overwrite {}; pass --force",
                    p.display()
                )));
            }
        }
    }
    create_parent_dirs(&outputs.map(|p| p.as_path()))?;

    let world = generate_world(&wc, config.seed)?;
    save_world(&world, &config.paths.world)?;
    save_corpus(&world, &config.paths.corpus)?;
    fs::write(&pairs_path, train_pairs_tsv(&world))?;
    fs::write(&queries_path, test_queries_tsv(&world))?;
    writeln!(
        out,
        "world seed={}: {} intents, {} surfaces ({:.0}% ambiguous), {} keywords, \
         {} train pairs, {} test queries",
        config.seed,
        world.intents.len(),
        world.surfaces.len(),
        100.0 * world.ambiguous_share(),
        world.keywords.len(),
        world.train_pairs.len(),
        world.test_queries.len(),
    )?;
    writeln!(out, "wrote {}", config.paths.world.display())?;
    writeln!(out, "wrote {}", config.paths.corpus.display())?;
    writeln!(out, "wrote {}", pairs_path.display())?;
    writeln!(out, "wrote {}", queries_path.display())?;
    Ok(())
}

/// Per-epoch stats CSV written next to the checkpoint.
pub const TRAIN_STATS_NAME: &str = "train_stats.csv";

/// Train on the generated world and write checkpoint plus stats CSV.
pub fn cmd_train(
    config: &CliConfig,
    args: &TrainArgs,
    out: &mut impl std::io::Write,
) -> Result<()> {
    require_file(&config.paths.world, "run gen-world first")?;
    require_file(&config.paths.corpus, "run gen-world first")?;

    let mut tc = match &args.config {
        Some(path) => TrainConfig::from_file(path)?,
        None => TrainConfig::default(),
    };
    tc.profile = config.profile.name().to_string();
    tc.seed = config.seed;
    for (k, v) in &config.overrides {
        tc.set(k, v)?;
    }
    if args.no_glancing {
        tc = tc.without_glancing();
    }

    let world = load_world(&config.paths.world)?;
    let mc = config.profile.model_config();
    let tok = world.tokenizer(mc.vocab_size)?;
    let pairs =
        crate::eval::build_training_pairs(&world, &tok, &BundleLimits::standard(), &mc)?;
    writeln!(
        out,
        "training {} profile on {} pairs for {} epochs (batch {}, glancing {})",
        tc.profile,
        pairs.len(),
        tc.epochs,
        tc.batch_size,
        if tc.max_rates.is_zero() { "off" } else { "on" },
    )?;

    let mut model = UnityModel::new(mc, config.seed)?;
    let stats = train_run(&mut model, &pairs, &tc)?;

    let stats_path = config
        .paths
        .checkpoint
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default()
        .join(TRAIN_STATS_NAME);
    create_parent_dirs(&[&config.paths.checkpoint, &stats_path])?;
    save_checkpoint(&model, &config.paths.checkpoint)?;
    fs::write(&stats_path, stats_csv(&stats))?;

    if let (Some(first), Some(last)) = (stats.first(), stats.last()) {
        writeln!(
            out,
            "nlg loss {:.4} -> {:.4}, dr loss {:.4} -> {:.4}",
            first.nlg_loss, last.nlg_loss, first.dr_loss, last.dr_loss
        )?;
    }
    writeln!(out, "wrote {}", config.paths.checkpoint.display())?;
    writeln!(out, "wrote {}", stats_path.display())?;
    Ok(())
}

fn parse_paths(name: &str) -> Result<Vec<RetrievalPath>> {
    match name {
        "dr" => Ok(vec![RetrievalPath::Dr]),
        "nlg" => Ok(vec![RetrievalPath::Nlg]),
        "both" => Ok(vec![RetrievalPath::Dr, RetrievalPath::Nlg]),
        other => Err(Error::Config(format!(
            "unknown path '{other}'; valid: dr, nlg, both"
        ))),
    }
}

/// Evaluate the checkpoint over the requested context subsets and paths;
/// writes the report CSV and prints the aligned table.
pub fn cmd_eval(
    config: &CliConfig,
    args: &EvalArgs,
    out: &mut impl std::io::Write,
) -> Result<()> {
    // Usage errors (unknown subset or path names) surface before any file IO.
    let subsets: Vec<&str> = args.contexts.iter().map(String::as_str).collect();
    for name in &subsets {
        BundleLimits::subset(name)?;
    }
    let paths = parse_paths(&args.path)?;
    require_file(&config.paths.checkpoint, "run train first")?;
    require_file(&config.paths.world, "run gen-world first")?;

    let world = load_world(&config.paths.world)?;
    let model = load_checkpoint(&config.paths.checkpoint, None)?;
    let model_dir = config
        .paths
        .checkpoint
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let ckpt_name = config
        .paths
        .checkpoint
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| {
            Error::Config(format!(
                "checkpoint path {} has no file name",
                config.paths.checkpoint.display()
            ))
        })?;

    let grid = AblationGrid::from_subsets(ckpt_name, &subsets, &paths)?;
    let report = run_ablation(&grid, &model_dir, &world, &model.config)?;

    create_parent_dirs(&[&config.paths.report])?;
    fs::write(&config.paths.report, crate::eval::report_csv(&report))?;
    write!(out, "{}", crate::eval::report_table(&report))?;
    writeln!(out, "wrote {}", config.paths.report.display())?;
    Ok(())
}
