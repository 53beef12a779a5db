use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

/// Per-invocation context shared by the subcommands.
pub struct Ctx {
    /// `driverse` followed by the arguments as given.
    pub invocation: Vec<String>,
}

impl Ctx {
    pub fn from_env() -> Self {
        let invocation = std::iter::once("driverse".to_string())
            .chain(std::env::args().skip(1))
            .collect();
        Self { invocation }
    }

    /// Writes the report to `path`, or to stdout when no path is given.
    pub fn report<T: Serialize>(&self, report: &T, path: Option<&Path>) -> Result<()> {
        match path {
            Some(p) => driverse_core::report::emit_report(report, &self.invocation, p)
                .with_context(|| format!("writing report {}", p.display())),
            None => {
                let text = driverse_core::report::render_report(report, &self.invocation)?;
                std::io::stdout().lock().write_all(text.as_bytes())?;
                Ok(())
            }
        }
    }
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}
