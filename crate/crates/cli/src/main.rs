mod config;
mod error;
mod stages;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use absa_kit::mixer::Strategy;
use absa_kit::{MatchOptions, Split, TaskKind};
use clap::{Args, Parser, Subcommand};

use config::{PipelineConfig, ResolvedConfig, DEFAULT_IN_FLIGHT, DEFAULT_SEED, DEFAULT_TIMEOUT_MS};
use error::{Failure, Kind};

/// Instruction-style ABSA data preparation, inference and scoring.
#[derive(Parser)]
#[command(name = "absa-kit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert an ACOS directory (train/dev/test .tsv) into review records.
    Convert(ConvertArgs),
    /// Sample K reviews from a review file.
    Kshot(KshotArgs),
    /// Derive task instances from a review file.
    Derive(DeriveArgs),
    /// Render task instances into prompts and targets.
    Render(RenderArgs),
    /// Build a multi-task training mixture from rendered records.
    Mix(MixArgs),
    /// Run rendered prompts through a backend.
    Infer(InferArgs),
    /// Parse generated outputs back into tuples.
    Parse(ParseArgs),
    /// Score parsed predictions against derived gold instances.
    Score(ScoreArgs),
    /// Run every stage end to end, writing all intermediate files.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct ConvertArgs {
    /// Directory holding the split files.
    #[arg(long, env = "ABSA_DATA_DIR")]
    data_dir: PathBuf,
    /// Dataset name; defaults to the directory name.
    #[arg(long)]
    name: Option<String>,
    /// Category list, one per line. Defaults to categories.txt in the data
    /// directory, or the categories seen in the data.
    #[arg(long)]
    categories: Option<PathBuf>,
    /// Output directory for reviews-{train,dev,test}.jsonl.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct KshotArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(short, long)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DeriveArgs {
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated task names, or "all".
    #[arg(long, default_value = "all")]
    tasks: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    input: PathBuf,
    /// TOML file overriding templates and task-name tokens.
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MixArgs {
    #[arg(long)]
    input: PathBuf,
    /// random, uniform-under, uniform-over or batch-uniform.
    #[arg(long, default_value = "random")]
    strategy: String,
    /// Defaults to every task in the input.
    #[arg(long)]
    tasks: Option<String>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    input: PathBuf,
    /// gold, corrupt[:drop=P,mangle=Q,seed=N], cmd:<argv> or http:<url>.
    #[arg(long)]
    backend: String,
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_TIMEOUT_MS)]
    timeout_ms: u64,
    #[arg(long, default_value_t = DEFAULT_IN_FLIGHT)]
    max_in_flight: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ParseArgs {
    /// Prediction records.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    /// Parsed prediction records.
    #[arg(long)]
    pred: PathBuf,
    /// Derived task instances holding the gold targets.
    #[arg(long)]
    gold: PathBuf,
    /// Defaults to every task in the gold file.
    #[arg(long)]
    tasks: Option<String>,
    #[arg(long)]
    case_insensitive: bool,
    /// Report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report as a plain-text table.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    /// TOML file with any of the settings below; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "ABSA_DATA_DIR")]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    categories: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tasks: Option<String>,
    /// Reviews sampled from each shot split.
    #[arg(short, long)]
    k: Option<usize>,
    /// Splits K-shot sampling applies to (default train,dev).
    #[arg(long, value_delimiter = ',')]
    shot_splits: Option<Vec<Split>>,
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long)]
    timeout_ms: Option<u64>,
    #[arg(long)]
    max_in_flight: Option<usize>,
    #[arg(long)]
    case_insensitive: bool,
    /// Split sent through the backend and scored (default test).
    #[arg(long)]
    eval_split: Option<Split>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Convert(a) => convert(a),
        Command::Kshot(a) => kshot(a),
        Command::Derive(a) => derive(a),
        Command::Render(a) => render(a),
        Command::Mix(a) => mix(a),
        Command::Infer(a) => infer(a),
        Command::Parse(a) => parse(a),
        Command::Score(a) => score(a),
        Command::Pipeline(a) => pipeline(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("absa-kit: {f}");
            f.kind.exit_code()
        }
    }
}

fn config_err(stage: &'static str, e: impl std::fmt::Display) -> Failure {
    Failure::new(stage, Kind::Config, e.to_string())
}

fn convert(a: ConvertArgs) -> Result<(), Failure> {
    let manifests = stages::convert(&a.data_dir, a.name.as_deref(), a.categories.as_deref())?;
    for m in &manifests {
        stages::write(
            &stages::manifest_file(m),
            &stages::reviews_path(&a.out, m.split),
            "convert",
        )?;
    }
    Ok(())
}

fn kshot(a: KshotArgs) -> Result<(), Failure> {
    let m = stages::manifest_from(stages::read(&a.input, "kshot")?, "kshot")?;
    let shot = stages::kshot(&m, a.k, a.seed)?;
    stages::write(&stages::manifest_file(&shot), &a.out, "kshot")
}

fn derive(a: DeriveArgs) -> Result<(), Failure> {
    let tasks = stages::parse_tasks(&a.tasks, "derive")?;
    let m = stages::manifest_from(stages::read(&a.input, "derive")?, "derive")?;
    stages::write(&stages::derive(&m, &tasks), &a.out, "derive")
}

fn render(a: RenderArgs) -> Result<(), Failure> {
    let table = stages::load_templates(a.templates.as_deref(), "render")?;
    let derived = stages::read(&a.input, "render")?;
    stages::write(&stages::render_file(&derived, &table)?, &a.out, "render")
}

fn mix(a: MixArgs) -> Result<(), Failure> {
    let strategy: Strategy = a.strategy.parse().map_err(|e| config_err("mix", e))?;
    let rendered = stages::read(&a.input, "mix")?;
    let tasks = match &a.tasks {
        Some(t) => stages::parse_tasks(t, "mix")?,
        None => stages::tasks_present(&rendered.records, |e: &absa_kit::RenderedExample| {
            e.instance.task
        }),
    };
    let mixed = stages::mix(&rendered, strategy, &tasks, a.seed, a.batch_size)?;
    stages::write(&mixed, &a.out, "mix")
}

fn infer(a: InferArgs) -> Result<(), Failure> {
    let table = stages::load_templates(a.templates.as_deref(), "infer")?;
    let backend = stages::backend(&a.backend, a.seed)?;
    let rendered = stages::read(&a.input, "infer")?;
    let preds = stages::infer(&rendered, &backend, &table, a.timeout_ms, a.max_in_flight)?;
    report_timeouts(&preds);
    stages::write(&preds, &a.out, "infer")
}

fn report_timeouts(preds: &absa_kit::RecordFile<absa_kit::gateway::Prediction>) {
    let n = preds.records.iter().filter(|p| p.timed_out).count();
    if n > 0 {
        eprintln!("absa-kit: infer: {n} requests timed out");
    }
}

fn parse(a: ParseArgs) -> Result<(), Failure> {
    let table = stages::load_templates(a.templates.as_deref(), "parse")?;
    let preds = stages::read(&a.input, "parse")?;
    let parsed = stages::parse(&preds, &table);
    println!(
        "parsed {} outputs, {} summaries failed",
        parsed.records.len(),
        stages::failure_count(&parsed)
    );
    stages::write(&parsed, &a.out, "parse")
}

fn score(a: ScoreArgs) -> Result<(), Failure> {
    let tasks = a
        .tasks
        .as_deref()
        .map(|t| stages::parse_tasks(t, "score"))
        .transpose()?;
    let parsed = stages::read(&a.pred, "score")?;
    let gold = stages::read(&a.gold, "score")?;
    let opts = MatchOptions {
        case_insensitive: a.case_insensitive,
    };
    let scored = stages::score(&parsed, &gold, tasks.as_deref(), opts)?;
    if scored.missing > 0 {
        eprintln!(
            "absa-kit: score: {} gold instances had no prediction",
            scored.missing
        );
    }
    stages::write_report(&scored.report, a.out.as_deref(), a.table.as_deref())?;
    print!("{}", scored.report.to_table());
    Ok(())
}

fn resolve(a: PipelineArgs) -> Result<ResolvedConfig, Failure> {
    let file = match &a.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    let missing = |what: &str| {
        config_err(
            "config",
            format!("{what} is required (flag or config file)"),
        )
    };
    Ok(ResolvedConfig {
        data_dir: a
            .data_dir
            .or(file.data_dir)
            .ok_or_else(|| missing("data_dir"))?,
        name: a.name.or(file.name),
        categories: a.categories.or(file.categories),
        out: a.out.or(file.out).ok_or_else(|| missing("out"))?,
        seed: a.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        tasks: a
            .tasks
            .or(file.tasks.map(|t| t.spec()))
            .unwrap_or_else(|| "all".into()),
        k: a.k.or(file.k),
        shot_splits: a
            .shot_splits
            .or(file.shot_splits)
            .unwrap_or_else(|| vec![Split::Train, Split::Dev]),
        strategy: a
            .strategy
            .or(file.strategy)
            .unwrap_or_else(|| "random".into()),
        batch_size: a.batch_size.or(file.batch_size),
        backend: a.backend.or(file.backend).unwrap_or_else(|| "gold".into()),
        templates: a.templates.or(file.templates),
        timeout_ms: a
            .timeout_ms
            .or(file.timeout_ms)
            .unwrap_or(DEFAULT_TIMEOUT_MS),
        max_in_flight: a
            .max_in_flight
            .or(file.max_in_flight)
            .unwrap_or(DEFAULT_IN_FLIGHT),
        case_insensitive: a.case_insensitive || file.case_insensitive.unwrap_or(false),
        eval_split: a.eval_split.or(file.eval_split).unwrap_or(Split::Test),
    })
}

/// The same stage functions as the individual subcommands, with every
/// intermediate written under the output directory.
fn pipeline(a: PipelineArgs) -> Result<(), Failure> {
    let cfg = resolve(a)?;
    let tasks: Vec<TaskKind> = stages::parse_tasks(&cfg.tasks, "config")?;
    let strategy: Strategy = cfg.strategy.parse().map_err(|e| config_err("config", e))?;
    let table = stages::load_templates(cfg.templates.as_deref(), "config")?;
    let backend = stages::backend(&cfg.backend, cfg.seed)?;
    let out = cfg.out.as_path();
    std::fs::create_dir_all(out)
        .map_err(|e| Failure::new("config", Kind::Data, format!("{}: {e}", out.display())))?;
    let resolved = toml::to_string(&cfg).map_err(|e| config_err("config", e))?;
    std::fs::write(out.join("config.toml"), resolved)
        .map_err(|e| Failure::new("config", Kind::Data, e.to_string()))?;

    let manifests = stages::convert(
        &cfg.data_dir,
        cfg.name.as_deref(),
        cfg.categories.as_deref(),
    )?;
    let mut derived_eval = None;
    let mut rendered_eval = None;
    for m in manifests {
        let split = m.split;
        stages::write(
            &stages::manifest_file(&m),
            &stages::reviews_path(out, split),
            "convert",
        )?;
        let m = match cfg.k {
            Some(k) if cfg.shot_splits.contains(&split) => {
                let shot = stages::kshot(&m, k, cfg.seed)?;
                stages::write(
                    &stages::manifest_file(&shot),
                    &path(out, "shots", split),
                    "kshot",
                )?;
                shot
            }
            _ => m,
        };
        let derived = stages::derive(&m, &tasks);
        stages::write(&derived, &path(out, "derived", split), "derive")?;
        let rendered = stages::render_file(&derived, &table)?;
        stages::write(&rendered, &path(out, "rendered", split), "render")?;
        if split == Split::Train {
            let mixed = stages::mix(&rendered, strategy, &tasks, cfg.seed, cfg.batch_size)?;
            stages::write(&mixed, &out.join("mixture.jsonl"), "mix")?;
        }
        if split == cfg.eval_split {
            derived_eval = Some(derived);
            rendered_eval = Some(rendered);
        }
    }
    let (derived, rendered) = derived_eval.zip(rendered_eval).expect("every split loaded");

    let preds = stages::infer(
        &rendered,
        &backend,
        &table,
        cfg.timeout_ms,
        cfg.max_in_flight,
    )?;
    report_timeouts(&preds);
    stages::write(&preds, &out.join("predictions.jsonl"), "infer")?;
    let parsed = stages::parse(&preds, &table);
    stages::write(&parsed, &out.join("parsed.jsonl"), "parse")?;
    let opts = MatchOptions {
        case_insensitive: cfg.case_insensitive,
    };
    let scored = stages::score(&parsed, &derived, None, opts)?;
    stages::write_report(
        &scored.report,
        Some(&out.join("report.json")),
        Some(&out.join("report.txt")),
    )?;
    print!("{}", scored.report.to_table());
    Ok(())
}

fn path(dir: &Path, stem: &str, split: Split) -> PathBuf {
    dir.join(format!("{stem}-{split}.jsonl"))
}
