use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Args;

use hklab::checkers::ConditionReport;

use crate::check::RUN_CONFIG_FILE;
use crate::{read_file, CliError, CliResult};

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory of `<checker>.json` reports.
    pub dir: PathBuf,
    /// Where to write the summary CSV; defaults to `<dir>/summary.csv`.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

const HEADER: [&str; 10] = [
    "condition", "verdict", "cells", "flagged", "max", "min", "spread", "symbol", "exponent", "r2",
];

/// Exponent symbols in the order they are looked up among a report's constants.
const SYMBOLS: [&str; 3] = ["alpha", "beta", "beta_prime"];

struct Row {
    condition: String,
    verdict: String,
    cells: usize,
    flagged: usize,
    max: Option<f64>,
    min: Option<f64>,
    spread: Option<f64>,
    symbol: Option<&'static str>,
    exponent: Option<f64>,
    r2: Option<f64>,
}

impl Row {
    fn from_report(r: &ConditionReport) -> Self {
        let exponent = r.summary.exponent;
        let symbol = exponent.map(|e| {
            SYMBOLS
                .into_iter()
                .find(|s| r.constant(s) == Some(e))
                .unwrap_or("exponent")
        });
        Self {
            condition: r.condition.clone(),
            verdict: format!("{:?}", r.verdict).to_lowercase(),
            cells: r.cells.len(),
            flagged: r.cells.iter().filter(|c| c.flag.is_some()).count(),
            max: r.summary.max,
            min: r.summary.min,
            spread: r.summary.spread,
            symbol,
            exponent,
            r2: r.summary.r2,
        }
    }

    fn fields(&self) -> [String; 10] {
        let num = |v: Option<f64>| v.map(|v| format!("{v}")).unwrap_or_default();
        [
            self.condition.clone(),
            self.verdict.clone(),
            self.cells.to_string(),
            self.flagged.to_string(),
            num(self.max),
            num(self.min),
            num(self.spread),
            self.symbol.unwrap_or("").to_string(),
            num(self.exponent),
            num(self.r2),
        ]
    }

    fn display(&self) -> [String; 10] {
        let num = |v: Option<f64>| v.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
        [
            self.condition.clone(),
            self.verdict.clone(),
            self.cells.to_string(),
            self.flagged.to_string(),
            num(self.max),
            num(self.min),
            num(self.spread),
            self.symbol.unwrap_or("-").to_string(),
            num(self.exponent),
            num(self.r2),
        ]
    }
}

/// Every `*.json` report in `dir` except the recorded run config, sorted by
/// file name. A file that is not a condition report is an error.
pub fn load_reports(dir: &Path) -> CliResult<Vec<ConditionReport>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .filter(|p| p.file_name().is_some_and(|n| n != RUN_CONFIG_FILE))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            ConditionReport::from_json(&read_file(p)?).map_err(|e| {
                CliError::Config(format!(
                    "{} does not follow the report schema ({e}); mixed report directories are rejected",
                    p.display()
                ))
            })
        })
        .collect()
}

fn table(rows: &[Row]) -> String {
    let cells: Vec<[String; 10]> = rows.iter().map(Row::display).collect();
    let mut widths = HEADER.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let line = |fields: &[String]| {
        fields
            .iter()
            .zip(widths)
            .map(|(f, w)| format!("{f:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(&HEADER.map(String::from));
    out.push('\n');
    for row in &cells {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}

pub fn run(args: &ReportArgs) -> CliResult<ExitCode> {
    let reports = load_reports(&args.dir)?;
    if reports.is_empty() {
        println!("no reports in {}", args.dir.display());
        return Ok(ExitCode::from(1));
    }
    let rows: Vec<Row> = reports.iter().map(Row::from_report).collect();
    print!("{}", table(&rows));

    let path = args.csv.clone().unwrap_or_else(|| args.dir.join("summary.csv"));
    let mut writer = csv::Writer::from_path(&path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let io = |e: csv::Error| CliError::Config(format!("{}: {e}", path.display()));
    writer.write_record(HEADER).map_err(io)?;
    for row in &rows {
        writer.write_record(row.fields()).map_err(io)?;
    }
    writer.flush().map_err(|e| CliError::Io(path.clone(), e))?;
    Ok(ExitCode::SUCCESS)
}
