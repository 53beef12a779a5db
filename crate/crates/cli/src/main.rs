//! `driverse`: trajectory prompting, spatial anchors, window planning, latent
//! consistency and trajectory alignment from the command line.

mod anchors;
mod config;
mod dwg;
mod gae;
mod lma;
mod output;
mod synth;
mod tokenize;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::config::{Config, SEED_ENV};
use crate::output::Ctx;

#[derive(Debug, Parser)]
#[command(name = "driverse", version, about = "Trajectory-conditioned driving video tooling")]
struct Cli {
    /// TOML file overriding the built-in numeric defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthetic scenes with known geometry.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Turn a manifest's ego trajectory into a clock-token prompt.
    Tokenize(tokenize::TokenizeArgs),
    /// Spatial anchor projection and control-frame rendering.
    #[command(subcommand)]
    Anchors(AnchorsCommand),
    /// Visibility-driven window planning.
    #[command(subcommand)]
    Dwg(DwgCommand),
    /// Motion-weighted latent consistency.
    #[command(subcommand)]
    Lma(LmaCommand),
    /// Similarity-aligned trajectory error.
    #[command(subcommand)]
    Gae(GaeCommand),
}

#[derive(Debug, Subcommand)]
enum SynthCommand {
    /// Generate a scene: manifest, ground-truth trajectory and point tracks.
    Gen(synth::GenArgs),
}

#[derive(Debug, Subcommand)]
enum AnchorsCommand {
    /// Render control frames as PPM images.
    Render(anchors::RenderArgs),
    /// Write per-frame anchor projections as JSON.
    Dump(anchors::DumpArgs),
}

#[derive(Debug, Subcommand)]
enum DwgCommand {
    /// Plan generation windows and their key frames.
    Plan(dwg::PlanArgs),
}

#[derive(Debug, Subcommand)]
enum LmaCommand {
    /// Evaluate the consistency loss.
    Loss(lma::LossArgs),
    /// Compare the analytic gradient with central differences.
    Gradcheck(lma::GradcheckArgs),
}

#[derive(Debug, Subcommand)]
enum GaeCommand {
    /// Align an estimated trajectory to ground truth and report the error.
    Eval(gae::EvalArgs),
}

/// Where a report goes: a file when given, stdout otherwise.
#[derive(Debug, Clone, Args)]
pub struct ReportArg {
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn run(cli: Cli, ctx: &Ctx) -> anyhow::Result<()> {
    let seed_env = std::env::var(SEED_ENV).ok();
    let cfg = Config::load(cli.config.as_deref(), seed_env.as_deref())?;
    match cli.command {
        Command::Synth(SynthCommand::Gen(a)) => synth::gen(&a, &cfg, ctx),
        Command::Tokenize(a) => tokenize::run(&a, &cfg),
        Command::Anchors(AnchorsCommand::Render(a)) => anchors::render(&a, &cfg, ctx),
        Command::Anchors(AnchorsCommand::Dump(a)) => anchors::dump(&a, &cfg, ctx),
        Command::Dwg(DwgCommand::Plan(a)) => dwg::plan(&a, &cfg, ctx),
        Command::Lma(LmaCommand::Loss(a)) => lma::loss(&a, &cfg, ctx),
        Command::Lma(LmaCommand::Gradcheck(a)) => lma::gradcheck(&a, &cfg, ctx),
        Command::Gae(GaeCommand::Eval(a)) => gae::eval(&a, &cfg, ctx),
    }
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    err.chain()
        .find_map(|e| e.downcast_ref::<driverse_core::Error>())
        .map(driverse_core::Error::kind)
        .unwrap_or("cli")
}

fn fail(kind: &str, message: String, code: u8) -> ExitCode {
    let body = json!({ "error": { "kind": kind, "message": message } });
    eprintln!("{body}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.render().to_string().trim_end().to_string(), 2),
    };
    let ctx = Ctx::from_env();
    match run(cli, &ctx) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(error_kind(&e), format!("{e:#}"), 1),
    }
}
