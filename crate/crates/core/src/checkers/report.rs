use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::Grid;
use crate::error::{LabError, Result};

/// One measured grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub x: usize,
    #[serde(rename = "R")]
    pub r: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<usize>,
    /// Symbol of the measured ratio, e.g. `V(x,2R)/V(x,R)`.
    pub quantity: String,
    /// `None` when the cell could not be evaluated; see `flag`.
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

impl Cell {
    pub fn new(x: usize, r: usize, quantity: &str, value: f64) -> Self {
        Self {
            x,
            r,
            n: None,
            y: None,
            quantity: quantity.to_string(),
            value: Some(value),
            flag: None,
        }
    }

    pub fn flagged(x: usize, r: usize, quantity: &str, flag: impl Into<String>) -> Self {
        Self {
            value: None,
            flag: Some(flag.into()),
            ..Self::new(x, r, quantity, 0.0)
        }
    }

    pub fn at_time(mut self, n: u64) -> Self {
        self.n = Some(n);
        self
    }

    pub fn with_target(mut self, y: usize) -> Self {
        self.y = Some(y);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub max: Option<f64>,
    pub min: Option<f64>,
    /// `max / min`.
    pub spread: Option<f64>,
    pub exponent: Option<f64>,
    pub r2: Option<f64>,
}

/// A measured constant compared against its configured threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: Option<f64>,
    /// `"<="` or `">="`.
    pub relation: String,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, value: Option<f64>, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            relation: "<=".into(),
            threshold,
            pass: value.is_some_and(|v| v <= threshold),
        }
    }

    pub fn at_least(name: &str, value: Option<f64>, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            relation: ">=".into(),
            threshold,
            pass: value.is_some_and(|v| v >= threshold),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

/// Outcome of one checker on one graph and grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: String,
    pub graph_spec: Value,
    pub grid: Grid,
    pub config: Value,
    pub cells: Vec<Cell>,
    pub summary: Summary,
    /// Measured constants and exponents by symbol.
    pub constants: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub verdict: Verdict,
}

/// Header of the CSV mirror of a report.
pub const REPORT_CSV_HEADER: [&str; 7] = ["x", "R", "n", "y", "quantity", "value", "flag"];

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants.get(name).copied()
    }

    pub fn cells_of<'a>(&'a self, quantity: &'a str) -> impl Iterator<Item = &'a Cell> + 'a {
        self.cells.iter().filter(move |c| c.quantity == quantity)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Plot-ready CSV with one row per cell.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(REPORT_CSV_HEADER).map_err(csv_error)?;
        let opt = |v: Option<String>| v.unwrap_or_default();
        for c in &self.cells {
            w.write_record([
                c.x.to_string(),
                c.r.to_string(),
                opt(c.n.map(|n| n.to_string())),
                opt(c.y.map(|y| y.to_string())),
                c.quantity.clone(),
                opt(c.value.map(|v| v.to_string())),
                opt(c.flag.clone()),
            ])
            .map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| LabError::Domain(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn csv_error(e: csv::Error) -> LabError {
    LabError::Domain(format!("csv: {e}"))
}

/// Assembles a report; the summary is taken over the primary quantity.
#[derive(Debug)]
pub(crate) struct ReportBuilder {
    condition: String,
    primary: String,
    cells: Vec<Cell>,
    constants: BTreeMap<String, f64>,
    checks: Vec<Check>,
    fit: Option<(f64, f64)>,
}

impl ReportBuilder {
    pub fn new(condition: &str, primary: &str) -> Self {
        Self {
            condition: condition.to_string(),
            primary: primary.to_string(),
            cells: Vec::new(),
            constants: BTreeMap::new(),
            checks: Vec::new(),
            fit: None,
        }
    }

    pub fn cells(&mut self, cells: impl IntoIterator<Item = Cell>) {
        self.cells.extend(cells);
    }

    pub fn constant(&mut self, name: &str, value: Option<f64>) {
        if let Some(v) = value.filter(|v| v.is_finite()) {
            self.constants.insert(name.to_string(), v);
        }
    }

    pub fn check(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn fit(&mut self, fit: Option<(f64, f64)>) {
        self.fit = fit;
    }

    /// Max of the defined values of a quantity.
    pub fn max_of(&self, quantity: &str) -> Option<f64> {
        values(&self.cells, quantity).reduce(f64::max)
    }

    pub fn min_of(&self, quantity: &str) -> Option<f64> {
        values(&self.cells, quantity).reduce(f64::min)
    }

    pub fn sum_of(&self, quantity: &str) -> f64 {
        values(&self.cells, quantity).sum()
    }

    pub fn finish(self, graph_spec: Value, grid: Grid, config: Value) -> ConditionReport {
        let max = self.max_of(&self.primary);
        let min = self.min_of(&self.primary);
        let spread = match (max, min) {
            (Some(a), Some(b)) if b > 0.0 => Some(a / b),
            _ => None,
        };
        let verdict = if !self.checks.is_empty() && self.checks.iter().all(|c| c.pass) {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        ConditionReport {
            condition: self.condition,
            graph_spec,
            grid,
            config,
            cells: self.cells,
            summary: Summary {
                max,
                min,
                spread,
                exponent: self.fit.map(|f| f.0),
                r2: self.fit.map(|f| f.1),
            },
            constants: self.constants,
            checks: self.checks,
            verdict,
        }
    }
}

fn values<'a>(cells: &'a [Cell], quantity: &'a str) -> impl Iterator<Item = f64> + 'a {
    cells
        .iter()
        .filter(move |c| c.quantity == quantity)
        .filter_map(|c| c.value)
}

/// Least-squares slope of `log value` against `log R`, with the coefficient
/// of determination.
pub fn fit_exponent(series: &[(f64, f64)]) -> Result<(f64, f64)> {
    if series.len() < 3 {
        return Err(LabError::Domain(format!(
            "exponent fit needs at least 3 points, got {}",
            series.len()
        )));
    }
    if series.iter().any(|&(r, v)| !(r > 0.0 && v > 0.0)) {
        return Err(LabError::Domain("exponent fit needs positive R and values".into()));
    }
    let pts: Vec<(f64, f64)> = series.iter().map(|&(r, v)| (r.ln(), v.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 1e-300 {
        return Err(LabError::Domain("exponent fit needs distinct radii".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy <= 1e-300 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok((slope, r2))
}
