//! Report envelopes written by the command-line tools.

use std::path::Path;

use serde::Serialize;

use crate::error::Result;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    invocation: &'a [String],
    #[serde(flatten)]
    report: &'a T,
}

/// Pretty-printed JSON with `schema_version` and the invocation that produced
/// it. `report` must serialize as a JSON object; its keys sit at top level.
pub fn render_report<T: Serialize>(report: &T, invocation: &[String]) -> Result<String> {
    let env = Envelope {
        schema_version: REPORT_SCHEMA_VERSION,
        invocation,
        report,
    };
    let mut s = serde_json::to_string_pretty(&env)?;
    s.push('\n');
    Ok(s)
}

pub fn emit_report<T: Serialize>(report: &T, invocation: &[String], path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, render_report(report, invocation)?)?;
    Ok(())
}
