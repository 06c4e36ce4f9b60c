//! Run-record export: CSV (fixed 13-column schema), JSON with metadata, and
//! simple SVG regret charts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::harness::bounds::BoundReport;
use crate::harness::runner::RunRecord;
use crate::harness::{ExperimentConfig, HarnessError};

pub const CSV_HEADER: &str = "t,eps_t,n_t,reward,pseudo_regret_kant,pseudo_regret_ent,\
cum_kant_lo,cum_kant_hi,cum_ent,beta_t,theta_norm,optimism_value,in_confidence_set";

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => fmt_f64(x),
        None => "NaN".to_string(),
    }
}

/// Render one record as CSV text (header plus one line per round).
pub fn record_to_csv(record: &RunRecord) -> String {
    let mut out = String::with_capacity(64 * (record.rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &record.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.t,
            fmt_f64(r.eps_t),
            r.n_t,
            fmt_f64(r.reward),
            fmt_f64(r.pseudo_regret_kant),
            fmt_opt(r.pseudo_regret_ent),
            fmt_f64(r.cum_kant_lo),
            fmt_f64(r.cum_kant_hi),
            fmt_opt(r.cum_ent),
            fmt_f64(r.beta_t),
            fmt_f64(r.theta_norm),
            fmt_f64(r.optimism_value),
            r.in_confidence_set,
        );
    }
    out
}

/// JSON envelope mirroring the CSV output plus provenance metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExportEnvelope {
    pub metadata: ExportMetadata,
    pub records: Vec<RunRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExportMetadata {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub master_seed: u64,
    pub env_hash: Option<String>,
    pub version: String,
}

pub fn envelope(config: &ExperimentConfig, records: Vec<RunRecord>) -> ExportEnvelope {
    ExportEnvelope {
        metadata: ExportMetadata {
            config: config.clone(),
            config_hash: config.hash_hex(),
            master_seed: config.master_seed,
            env_hash: records.first().map(|r| r.summary.env_hash.clone()),
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        records,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
    Svg,
}

impl std::str::FromStr for ExportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            "svg" => Ok(ExportFormat::Svg),
            other => Err(format!("unknown format '{other}' (expected csv|json|svg)")),
        }
    }
}

/// Write records under `dir`: `run_XXX.csv` per repetition, `records.json`,
/// or `regret.svg` depending on the format. Returns the written paths.
pub fn export(
    records: &[RunRecord],
    config: &ExperimentConfig,
    format: ExportFormat,
    dir: &Path,
    bound: Option<&BoundReport>,
) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    match format {
        ExportFormat::Csv => {
            for record in records {
                let path = dir.join(format!("run_{:03}.csv", record.summary.rep));
                fs::write(&path, record_to_csv(record))?;
                written.push(path);
            }
        }
        ExportFormat::Json => {
            let path = dir.join("records.json");
            let env = envelope(config, records.to_vec());
            fs::write(&path, serde_json::to_string_pretty(&env)?)?;
            written.push(path);
        }
        ExportFormat::Svg => {
            let path = dir.join("regret.svg");
            fs::write(&path, regret_svg(records, bound))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Cumulative Kantorovich pseudo-regret per repetition (upper interval end),
/// with the realized-design bound overlaid when available.
pub fn regret_svg(records: &[RunRecord], bound: Option<&BoundReport>) -> String {
    const W: f64 = 800.0;
    const H: f64 = 500.0;
    const ML: f64 = 60.0; // margins
    const MB: f64 = 40.0;
    const MT: f64 = 20.0;
    const MR: f64 = 20.0;

    let horizon = records.iter().map(|r| r.rows.len()).max().unwrap_or(1).max(2);
    let mut ymax = 1e-9_f64;
    for r in records {
        for row in &r.rows {
            ymax = ymax.max(row.cum_kant_hi.abs());
        }
    }
    if let Some(b) = bound {
        if let Some(last) = b.rows.last() {
            ymax = ymax.max(last.realized_total);
        }
    }
    ymax *= 1.05;

    let x = |t: usize| ML + (t as f64 / (horizon - 1).max(1) as f64) * (W - ML - MR);
    let y = |v: f64| H - MB - (v.max(0.0) / ymax) * (H - MB - MT);

    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    );
    let _ = writeln!(s, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    // Axes.
    let _ = writeln!(
        s,
        "<line x1=\"{ML}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        H - MB,
        W - MR,
        H - MB
    );
    let _ = writeln!(s, "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{}\" stroke=\"black\"/>", H - MB);
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">round</text>",
        (ML + W - MR) / 2.0,
        H - 8.0
    );
    let _ = writeln!(
        s,
        "<text x=\"14\" y=\"{}\" font-size=\"12\" transform=\"rotate(-90 14 {})\" text-anchor=\"middle\">cumulative regret</text>",
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{:.3}</text>",
        ML - 4.0,
        MT + 10.0,
        ymax
    );

    for (idx, r) in records.iter().enumerate() {
        let hue = (idx * 47) % 360;
        let pts: Vec<String> = r
            .rows
            .iter()
            .enumerate()
            .map(|(t, row)| format!("{:.2},{:.2}", x(t), y(row.cum_kant_hi)))
            .collect();
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"hsl({hue},60%,45%)\" stroke-width=\"1\"/>",
            pts.join(" ")
        );
    }
    if let Some(b) = bound {
        let pts: Vec<String> = b
            .rows
            .iter()
            .enumerate()
            .map(|(t, row)| format!("{:.2},{:.2}", x(t), y(row.realized_total)))
            .collect();
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\" stroke-dasharray=\"6 3\"/>",
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">bound</text>",
            W - MR - 4.0,
            MT + 12.0
        );
    }
    s.push_str("</svg>\n");
    s
}
