//! Trajectory CSV format.
//!
//! A commented header block (`# ` prefixed) carries the format tag, the run
//! metadata and the full scenario document, followed by a header row and one
//! row per sample. Numbers use Rust's shortest round-trip formatting, so
//! parsing a log reproduces the samples bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, Read, Write};

use thiserror::Error;

use crate::scenario::{ConfigError, ScenarioFile};
use crate::sim::{Outcome, Sample, TrajectoryLog};

pub const FORMAT_TAG: &str = "# fw-unicycle log v1";
const SCENARIO_BEGIN: &str = "scenario-begin";
const SCENARIO_END: &str = "scenario-end";

#[derive(Debug, Error)]
pub enum LogError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("missing `{FORMAT_TAG}` tag on the first line")]
    MissingTag,
    #[error("unexpected header row: {0}")]
    Columns(String),
    #[error("row {row}: {reason}")]
    Row { row: usize, reason: String },
    #[error("embedded scenario: {0}")]
    Scenario(#[from] ConfigError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

/// Writes `log` in the versioned CSV format.
pub fn write_log<W: Write>(log: &TrajectoryLog, mut out: W) -> io::Result<()> {
    let h = &log.header;
    let mut head = String::new();
    writeln!(head, "{FORMAT_TAG}").unwrap();
    writeln!(head, "# label: {}", h.scenario.label).unwrap();
    writeln!(head, "# controller: {}", h.scenario.controller.name()).unwrap();
    match log.outcome {
        Outcome::Converged { t } | Outcome::Collision { t } => {
            writeln!(head, "# outcome: {} {}", log.outcome.name(), num(t)).unwrap()
        }
        Outcome::Timeout => writeln!(head, "# outcome: Timeout").unwrap(),
    }
    writeln!(head, "# fw_point: {} {}", num(h.solution.point.x), num(h.solution.point.y)).unwrap();
    writeln!(head, "# solver_status: {:?}", h.solution.status).unwrap();
    writeln!(head, "# solver_residual: {}", num(h.solution.residual)).unwrap();
    writeln!(head, "# solver_iterations: {}", h.solution.iterations).unwrap();
    let existence: Vec<&str> = h.existence.iter().map(|&b| if b { "true" } else { "false" }).collect();
    writeln!(head, "# existence: {}", existence.join(" ")).unwrap();
    if !h.existence.iter().all(|&b| b) {
        writeln!(head, "# warning: existence inequality fails; uniqueness of the minimiser is not certified").unwrap();
    }
    writeln!(head, "# {SCENARIO_BEGIN}").unwrap();
    for line in ScenarioFile::from_scenario(&h.scenario).to_toml().lines() {
        if line.is_empty() {
            writeln!(head, "#").unwrap();
        } else {
            writeln!(head, "# {line}").unwrap();
        }
    }
    writeln!(head, "# {SCENARIO_END}").unwrap();
    writeln!(head, "{}", Sample::COLUMNS.join(",")).unwrap();
    out.write_all(head.as_bytes())?;

    let mut row = String::with_capacity(512);
    for s in &log.samples {
        row.clear();
        for (i, v) in s.to_array().iter().enumerate() {
            if i > 0 {
                row.push(',');
            }
            row.push_str(&num(*v));
        }
        row.push('\n');
        out.write_all(row.as_bytes())?;
    }
    out.flush()
}

/// A log read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLog {
    /// `key: value` lines of the comment header.
    pub meta: BTreeMap<String, String>,
    /// Embedded scenario document, when present.
    pub scenario: Option<ScenarioFile>,
    pub samples: Vec<Sample>,
}

pub fn read_log<R: Read>(mut input: R) -> Result<ParsedLog, LogError> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    parse_log(&text)
}

pub fn parse_log(text: &str) -> Result<ParsedLog, LogError> {
    let mut lines = text.lines();
    if lines.next() != Some(FORMAT_TAG) {
        return Err(LogError::MissingTag);
    }
    let mut meta = BTreeMap::new();
    let mut scenario_text: Option<String> = None;
    let mut in_scenario = false;
    for line in text.lines().skip(1).take_while(|l| l.starts_with('#')) {
        let body = line.strip_prefix("# ").or_else(|| line.strip_prefix('#')).unwrap_or("");
        if body == SCENARIO_BEGIN {
            in_scenario = true;
            scenario_text = Some(String::new());
        } else if body == SCENARIO_END {
            in_scenario = false;
        } else if in_scenario {
            let buf = scenario_text.as_mut().expect("set on begin");
            buf.push_str(body);
            buf.push('\n');
        } else if let Some((k, v)) = body.split_once(": ") {
            meta.insert(k.to_string(), v.to_string());
        }
    }
    let scenario = scenario_text.map(|t| ScenarioFile::parse(&t)).transpose()?;

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.iter().ne(Sample::COLUMNS.iter().copied()) {
        return Err(LogError::Columns(headers.iter().collect::<Vec<_>>().join(",")));
    }
    let mut samples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let mut values = [0.0; 14];
        for (slot, field) in values.iter_mut().zip(record.iter()) {
            *slot = field.trim().parse().map_err(|_| LogError::Row {
                row: row + 1,
                reason: format!("`{field}` is not a number"),
            })?;
        }
        samples.push(Sample::from_array(values));
    }
    if samples.is_empty() {
        return Err(LogError::Row {
            row: 0,
            reason: "log has no samples".into(),
        });
    }
    Ok(ParsedLog {
        meta,
        scenario,
        samples,
    })
}
