use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use driverse_core::manifest::SceneManifest;
use driverse_core::trend::{build_prompt, tokenize};

use crate::config::Config;

#[derive(Debug, Args)]
pub struct TokenizeArgs {
    /// Scene manifest (JSON).
    #[arg(long)]
    manifest: PathBuf,
    /// Segments shorter than this (m) repeat the previous token.
    #[arg(long)]
    eps: Option<f64>,
    /// Scene description appended after the trajectory sentence.
    #[arg(long, default_value = "")]
    base_prompt: String,
    /// Write the prompt here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(a: &TokenizeArgs, cfg: &Config) -> Result<()> {
    let m = SceneManifest::ingest(&a.manifest)?;
    let tokens = tokenize(&m.trajectory, a.eps.unwrap_or(cfg.trend.stationary_eps))?;
    let mut prompt = build_prompt(&tokens, &a.base_prompt)?;
    prompt.push('\n');
    match &a.out {
        Some(p) => std::fs::write(p, prompt).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{prompt}");
            Ok(())
        }
    }
}
