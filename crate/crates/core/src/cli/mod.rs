//! Command-line front end.
//!
//! Exit codes: 0 success, 1 a negative result (violations found, or a
//! building that is not both complete and satisfying), 2 usage, 3 startup
//! or configuration error, 4 generation failure, 5 export failure, 6
//! unreadable input file.

mod config;
mod eval;
mod pipeline;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use config::{ConfigError, FileConfig, Offset, PipelineConfig, TargetKind};
pub use eval::{run_eval, Counts, EvalReport, Ratios, TrialRow};
pub use pipeline::{
    build_transport, fresh_dir, generation_settings, json_text, run_pipeline, timestamp, trace_id, write_failure,
    write_run, PipelineOutput, PipelineReport, Resources, StartupError, DUMP_FILE, INTERLAYER_FILE, PLACEMENT_FILE,
    REPAIRS_FILE, REPORT_FILE, RESPONSES_FILE, SCRIPT_FILE, TRACE_FILE,
};

use crate::assess::{assess, AssessmentConfig};
use crate::export::{command_script, parse_voxel_dump, place_via_http, voxel_dump};
use crate::interlayer::{extract_json, parse_document, serialize_document, InterlayerDocument, ParseMode};
use crate::repair::{repair_document, validate_document, BlockRegistry};
use crate::stub::{StubConfig, StubServer};
use crate::voxel::{synthesize, VoxelGrid};

pub const EXIT_OK: u8 = 0;
pub const EXIT_NEGATIVE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_CONFIG: u8 = 3;
pub const EXIT_GENERATION: u8 = 4;
pub const EXIT_EXPORT: u8 = 5;
pub const EXIT_INPUT: u8 = 6;

#[derive(Debug, Parser)]
#[command(name = "t2bm", version, about = "Generate, check and export Minecraft buildings from text prompts")]
pub struct Cli {
    /// TOML config file; flags override its keys.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the whole pipeline for one prompt.
    Generate(PipelineArgs),
    /// Report registry violations in an interlayer file.
    Validate(ValidateArgs),
    /// Repair an interlayer file; the log goes to stderr.
    Repair(RepairArgs),
    /// Check completeness and satisfaction of a voxel dump.
    Assess(AssessArgs),
    /// Export a voxel dump or interlayer file to one target.
    Export(ExportArgs),
    /// Run many generations and tabulate C/S outcomes.
    Eval(EvalArgs),
    /// Serve the bundled placement stub until killed.
    ServeStub(StubArgs),
}

#[derive(Debug, Default, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub prompt: Option<String>,
    /// Send the prompt as-is, without a refinement step.
    #[arg(long)]
    pub no_refine: bool,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub base_url: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_tokens: Option<u32>,
    #[arg(long)]
    pub max_attempts: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Concurrent requests / trials.
    #[arg(long)]
    pub parallelism: Option<usize>,
    /// Replay responses from this directory instead of calling the service.
    #[arg(long, value_name = "DIR")]
    pub fixtures: Option<PathBuf>,
    #[command(flatten)]
    pub tables: TableArgs,
    /// Prompt-template directory.
    #[arg(long, value_name = "DIR")]
    pub prompts: Option<PathBuf>,
    #[arg(long = "target", value_enum)]
    pub targets: Vec<TargetKind>,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long, value_name = "X,Y,Z")]
    pub offset: Option<Offset>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub gdpc_axes: bool,
    #[arg(long, value_name = "X,Y,Z")]
    pub start_point: Option<Offset>,
    /// Root directory for run outputs.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Args)]
pub struct TableArgs {
    /// Registry version (e.g. 1.19.2) or path to a registry file.
    #[arg(long)]
    pub registry: Option<String>,
    #[arg(long, value_name = "PATH")]
    pub aliases: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub keywords: Option<PathBuf>,
    /// Required material id or alias group; repeatable.
    #[arg(long = "require", value_name = "ID|GROUP")]
    pub require: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub registry: Option<String>,
    /// Reject comments, trailing commas and quoted numbers.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct RepairArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub registry: Option<String>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AssessArgs {
    /// Voxel dump.
    pub input: PathBuf,
    #[command(flatten)]
    pub tables: TableArgs,
    /// Derive requirements from this prompt's keywords when no --require is given.
    #[arg(long)]
    pub prompt: Option<String>,
    #[arg(long, value_name = "X,Y,Z")]
    pub start_point: Option<Offset>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Voxel dump or interlayer file.
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub target: TargetKind,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long, value_name = "X,Y,Z")]
    pub offset: Option<Offset>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub gdpc_axes: bool,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Args)]
pub struct StubArgs {
    #[arg(long, default_value = "127.0.0.1:9000")]
    pub bind: String,
    /// Answer chat-completion requests with this file's content.
    #[arg(long, value_name = "PATH")]
    pub chat_reply: Option<PathBuf>,
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn new(code: u8, message: impl std::fmt::Display) -> Self {
        Self { code, message: message.to_string() }
    }
}

type CliResult = Result<u8, CliError>;

fn load_file_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    match path {
        Some(p) => FileConfig::load(p).map_err(|e| CliError::new(EXIT_CONFIG, e)),
        None => Ok(FileConfig::default()),
    }
}

/// Config file, then flags.
pub fn resolve_pipeline(file: &FileConfig, args: &PipelineArgs) -> Result<(PipelineConfig, Option<String>), CliError> {
    let mut cfg = PipelineConfig::from_file(file);
    if args.no_refine {
        cfg.refine = false;
    }
    macro_rules! take {
        ($($field:ident),*) => { $( if let Some(v) = args.$field.clone() { cfg.$field = v; } )* };
    }
    take!(model, base_url, temperature, max_attempts, parallelism, endpoint, batch_size);
    if let Some(v) = &args.tables.registry {
        cfg.registry = v.clone();
    }
    for (slot, arg) in [
        (&mut cfg.aliases, &args.tables.aliases),
        (&mut cfg.keywords, &args.tables.keywords),
        (&mut cfg.prompts, &args.prompts),
        (&mut cfg.fixtures, &args.fixtures),
    ] {
        if arg.is_some() {
            slot.clone_from(arg);
        }
    }
    if args.max_tokens.is_some() {
        cfg.max_tokens = args.max_tokens;
    }
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    if !args.tables.require.is_empty() {
        cfg.require = args.tables.require.clone();
    }
    if !args.targets.is_empty() {
        cfg.targets = args.targets.clone();
    }
    if let Some(o) = args.offset {
        cfg.offset = o.0;
    }
    if args.gdpc_axes {
        cfg.gdpc_axes = true;
    }
    if let Some(p) = args.start_point {
        cfg.start_point = Some(p.0);
    }
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    cfg.check().map_err(|e| CliError::new(EXIT_CONFIG, e))?;
    let prompt = args.prompt.clone().or_else(|| file.prompt.clone());
    Ok((cfg, prompt))
}

fn require_prompt(prompt: Option<String>) -> Result<String, CliError> {
    match prompt {
        Some(p) if !p.trim().is_empty() => Ok(p),
        _ => Err(CliError::new(EXIT_USAGE, "a nonempty --prompt is required")),
    }
}

fn startup(cfg: &PipelineConfig) -> Result<Resources, CliError> {
    Resources::load(cfg).map_err(|e| CliError::new(EXIT_CONFIG, e))
}

fn export_failed(e: impl std::fmt::Display) -> CliError {
    CliError::new(EXIT_EXPORT, e)
}

fn cmd_generate(file: &FileConfig, args: &PipelineArgs) -> CliResult {
    let (cfg, prompt) = resolve_pipeline(file, args)?;
    let prompt = require_prompt(prompt)?;
    let res = startup(&cfg)?;
    let transport = build_transport(&cfg);
    match run_pipeline(&prompt, &cfg, &res, transport.as_ref(), &generation_settings(&cfg)) {
        Ok(out) => {
            let dir = fresh_dir(&cfg.out, &format!("{}-{}", timestamp(), trace_id(&out.trace))).map_err(export_failed)?;
            let placement = write_run(&out, &cfg, &dir).map_err(export_failed)?;
            println!("{}", dir.display());
            println!("C={} S={}", out.completeness(), out.satisfaction());
            if let Some(p) = placement {
                println!("placed {}/{} blocks", p.acknowledged, p.sent);
            }
            Ok(EXIT_OK)
        }
        Err(failed) => {
            let dir = fresh_dir(&cfg.out, &format!("{}-{}", timestamp(), trace_id(&failed.trace))).map_err(export_failed)?;
            write_failure(&failed, &dir).map_err(export_failed)?;
            Err(CliError::new(EXIT_GENERATION, format!("{failed} (trace in {})", dir.display())))
        }
    }
}

fn cmd_eval(file: &FileConfig, args: &EvalArgs) -> CliResult {
    let (cfg, prompt) = resolve_pipeline(file, &args.pipeline)?;
    let prompt = require_prompt(prompt)?;
    let trials = args.trials.or(file.trials).unwrap_or(50);
    if trials == 0 {
        return Err(CliError::new(EXIT_USAGE, "--trials must be at least 1"));
    }
    let res = startup(&cfg)?;
    let transport = build_transport(&cfg);
    let dir = fresh_dir(&cfg.out, &format!("{}-eval", timestamp())).map_err(export_failed)?;
    let report = run_eval(&prompt, trials, &cfg, &res, transport.as_ref(), &dir).map_err(export_failed)?;
    let table = report.table();
    std::fs::write(dir.join("eval.json"), json_text(&report)).map_err(export_failed)?;
    std::fs::write(dir.join("table.md"), &table).map_err(export_failed)?;
    print!("{table}");
    println!("{}", dir.display());
    Ok(EXIT_OK)
}

fn read_input(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::new(EXIT_INPUT, format!("{}: {e}", path.display())))
}

fn parse_interlayer(path: &Path, mode: ParseMode) -> Result<InterlayerDocument, CliError> {
    let text = read_input(path)?;
    let json = extract_json(&text).map_err(|e| CliError::new(EXIT_INPUT, format!("{}: {e}", path.display())))?;
    parse_document(json, mode).map_err(|e| CliError::new(EXIT_INPUT, format!("{}: {e}", path.display())))
}

fn registry(file: &FileConfig, flag: &Option<String>) -> Result<BlockRegistry, CliError> {
    let spec = flag.clone().or_else(|| file.registry.clone()).unwrap_or_else(|| crate::repair::DEFAULT_VERSION.into());
    BlockRegistry::resolve(&spec).map_err(|e| CliError::new(EXIT_CONFIG, e))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| export_failed(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(export_failed),
    }
}

fn cmd_validate(file: &FileConfig, args: &ValidateArgs) -> CliResult {
    let reg = registry(file, &args.registry)?;
    let mode = if args.strict { ParseMode::Strict } else { ParseMode::Lenient };
    let doc = parse_interlayer(&args.input, mode)?;
    let violations = validate_document(&doc, &reg);
    for v in &violations {
        println!("{v}");
    }
    if violations.is_empty() {
        println!("ok: {} sections, no violations", doc.sections.len());
        Ok(EXIT_OK)
    } else {
        Ok(EXIT_NEGATIVE)
    }
}

fn cmd_repair(file: &FileConfig, args: &RepairArgs) -> CliResult {
    let reg = registry(file, &args.registry)?;
    let doc = parse_interlayer(&args.input, ParseMode::Lenient)?;
    let (fixed, log) = repair_document(&doc, &reg);
    for entry in &log.entries {
        eprintln!("{entry}");
    }
    emit(args.out.as_deref(), &serialize_document(&fixed))?;
    Ok(EXIT_OK)
}

fn cmd_assess(file: &FileConfig, args: &AssessArgs) -> CliResult {
    let mut cfg = PipelineConfig::from_file(file);
    if let Some(v) = &args.tables.registry {
        cfg.registry = v.clone();
    }
    if args.tables.aliases.is_some() {
        cfg.aliases.clone_from(&args.tables.aliases);
    }
    if args.tables.keywords.is_some() {
        cfg.keywords.clone_from(&args.tables.keywords);
    }
    if !args.tables.require.is_empty() {
        cfg.require = args.tables.require.clone();
    }
    let res = startup(&cfg)?;
    let text = read_input(&args.input)?;
    let grid = parse_voxel_dump(&text).map_err(|e| CliError::new(EXIT_INPUT, format!("{}: {e}", args.input.display())))?;
    let prompt = args.prompt.clone().or_else(|| file.prompt.clone()).unwrap_or_default();
    let reqs = res.requirements(&prompt, &cfg.require);
    let start = args.start_point.map(|o| o.0).or(cfg.start_point);
    let report = assess(&grid, &reqs, &AssessmentConfig { start_point: start, ..Default::default() })
        .map_err(|e| CliError::new(EXIT_NEGATIVE, e))?;
    emit(args.out.as_deref(), &json_text(&report))?;
    eprintln!("C={} S={}", report.completeness, report.satisfaction);
    Ok(if report.completeness && report.satisfaction { EXIT_OK } else { EXIT_NEGATIVE })
}

/// A dump is a JSON object with `version` and `blocks`; anything else is
/// read as an interlayer document and synthesized.
fn load_grid(path: &Path) -> Result<VoxelGrid, CliError> {
    let text = read_input(path)?;
    let looks_like_dump = serde_json::from_str::<serde_json::Value>(&text)
        .ok()
        .is_some_and(|v| v.get("version").is_some() && v.get("blocks").is_some());
    if looks_like_dump {
        return parse_voxel_dump(&text).map_err(|e| CliError::new(EXIT_INPUT, format!("{}: {e}", path.display())));
    }
    let doc = parse_interlayer(path, ParseMode::Lenient)?;
    Ok(synthesize(&doc, crate::interlayer::BlockPoint::ORIGIN).0)
}

fn cmd_export(file: &FileConfig, args: &ExportArgs) -> CliResult {
    let mut cfg = PipelineConfig::from_file(file);
    if let Some(e) = &args.endpoint {
        cfg.endpoint = e.clone();
    }
    if let Some(o) = args.offset {
        cfg.offset = o.0;
    }
    if let Some(b) = args.batch_size {
        cfg.batch_size = b;
    }
    cfg.gdpc_axes |= args.gdpc_axes;
    cfg.check().map_err(|e| CliError::new(EXIT_CONFIG, e))?;
    let grid = load_grid(&args.input)?;
    match args.target {
        TargetKind::Script => emit(args.out.as_deref(), &command_script(&grid, cfg.offset))?,
        TargetKind::Dump => emit(args.out.as_deref(), &voxel_dump(&grid))?,
        TargetKind::Http => {
            let result = place_via_http(&grid, &pipeline::http_target(&cfg)).map_err(export_failed)?;
            emit(args.out.as_deref(), &json_text(&result))?;
            if !result.failed.is_empty() {
                return Ok(EXIT_NEGATIVE);
            }
        }
    }
    Ok(EXIT_OK)
}

fn cmd_serve_stub(args: &StubArgs) -> CliResult {
    let chat_reply = args.chat_reply.as_deref().map(read_input).transpose()?;
    let server = StubServer::bind(args.bind.as_str(), StubConfig { chat_reply, ..Default::default() })
        .map_err(|e| CliError::new(EXIT_CONFIG, format!("cannot bind {}: {e}", args.bind)))?;
    println!("listening on {}", server.url());
    server.join();
    Ok(EXIT_OK)
}

pub fn dispatch(cli: &Cli) -> CliResult {
    let file = load_file_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Generate(a) => cmd_generate(&file, a),
        Command::Validate(a) => cmd_validate(&file, a),
        Command::Repair(a) => cmd_repair(&file, a),
        Command::Assess(a) => cmd_assess(&file, a),
        Command::Export(a) => cmd_export(&file, a),
        Command::Eval(a) => cmd_eval(&file, a),
        Command::ServeStub(a) => cmd_serve_stub(a),
    }
}

/// Parses `argv` and runs; usage errors exit with 2 (clap's convention).
pub fn main_with<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
