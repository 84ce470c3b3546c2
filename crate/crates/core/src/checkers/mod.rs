//! Empirical measurement of the volume, time, Harnack and heat kernel
//! conditions over `(centre, radius)` grids.
//!
//! Every checker returns a [`ConditionReport`] whose verdict compares the
//! measured constants with the configured [`Thresholds`]. Reports are pure
//! functions of the graph, grid and configuration.

mod einstein;
mod green;
mod grid;
mod harmonic;
mod kernel;
mod report;
mod time;
mod volume;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{LabError, Result};
use crate::graph::WeightedGraph;
use crate::linalg::SolverPolicy;
use crate::walk::{scale_function_with, ExitTimes, ScaleFunction};

pub use einstein::check_einstein;
pub use green::check_green_bounds;
pub use grid::{CenterStrategy, Grid, GridSpec};
pub use harmonic::{check_harnack, check_mean_value, HarnackMode};
pub use kernel::check_kernel_bounds;
pub use report::{fit_exponent, Cell, Check, ConditionReport, Summary, Verdict, REPORT_CSV_HEADER};
pub use time::{check_time_conditions, check_uniform_exit};
pub use volume::check_volume_doubling;

const TRUNCATED: &str = "truncated";

/// Pass bands for the measured constants. The defaults are empirical: they
/// pass on the integer lattice and on the self-similar examples shipped with
/// the generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub doubling: f64,
    pub volume_comparison: f64,
    pub volume_anti_doubling: f64,
    pub annulus_volume_min: f64,
    pub time_doubling: f64,
    pub time_comparison: f64,
    pub beta_min: f64,
    pub uniform_exit: f64,
    pub einstein_spread: f64,
    pub mean_value: f64,
    pub mean_value_green: f64,
    pub harnack: f64,
    /// Killed solutions decay like `exp(-t / E(x, R))` across the profile's
    /// time gap, so this constant is finite but very large on fractals.
    pub parabolic_harnack: f64,
    pub diagonal_upper: f64,
    pub diagonal_lower: f64,
    pub green_exit: f64,
    pub green_upper: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            doubling: 8.0,
            volume_comparison: 32.0,
            volume_anti_doubling: 8.0,
            annulus_volume_min: 0.25,
            time_doubling: 32.0,
            time_comparison: 64.0,
            beta_min: 1.95,
            uniform_exit: 4.0,
            einstein_spread: 10.0,
            mean_value: 10.0,
            mean_value_green: 10.0,
            harnack: 10.0,
            parabolic_harnack: 1e40,
            diagonal_upper: 20.0,
            diagonal_lower: 0.01,
            green_exit: 10.0,
            green_upper: 10.0,
        }
    }
}

/// Parabolic Harnack profile `{c1, c2, c3, c4, eta}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub c: [f64; 4],
    pub eta: f64,
}

impl Default for Profile {
    fn default() -> Self {
        Self {
            c: [1.0, 2.0, 3.0, 4.0],
            eta: 0.5,
        }
    }
}

/// Checker settings; recorded verbatim in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    pub seed: u64,
    /// Random boundary data draws per cell (mean value, Harnack).
    pub trials: usize,
    /// Most comparison points `y in B(x, R)` used per cell.
    pub comparison_cap: usize,
    /// Most one-hot boundary data (extreme harmonic functions) per cell.
    pub extreme_cap: usize,
    /// Last time step for heat kernel checks.
    pub horizon: u64,
    /// Monte Carlo walks for the exit tail cross-check; 0 disables it.
    pub mc_walks: usize,
    pub profile: Profile,
    /// `C'` in the Green upper bound.
    pub green_spread: f64,
    /// Powers `m` of the resolvent measured with the Green bounds.
    pub resolvent_powers: Vec<usize>,
    pub solver: SolverPolicy,
    pub thresholds: Thresholds,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 20,
            comparison_cap: 256,
            extreme_cap: 256,
            horizon: 4096,
            mc_walks: 0,
            profile: Profile::default(),
            green_spread: 2.0,
            resolvent_powers: vec![2, 3, 4],
            solver: SolverPolicy::default(),
            thresholds: Thresholds::default(),
        }
    }
}

/// Names of the available checkers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    VolumeDoubling,
    TimeConditions,
    UniformExit,
    Einstein,
    MeanValue,
    HarnackElliptic,
    HarnackParabolic,
    KernelBounds,
    GreenBounds,
}

impl CheckKind {
    pub const ALL: [CheckKind; 9] = [
        CheckKind::VolumeDoubling,
        CheckKind::TimeConditions,
        CheckKind::UniformExit,
        CheckKind::Einstein,
        CheckKind::MeanValue,
        CheckKind::HarnackElliptic,
        CheckKind::HarnackParabolic,
        CheckKind::KernelBounds,
        CheckKind::GreenBounds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::VolumeDoubling => "volume_doubling",
            CheckKind::TimeConditions => "time_conditions",
            CheckKind::UniformExit => "uniform_exit",
            CheckKind::Einstein => "einstein",
            CheckKind::MeanValue => "mean_value",
            CheckKind::HarnackElliptic => "harnack_elliptic",
            CheckKind::HarnackParabolic => "harnack_parabolic",
            CheckKind::KernelBounds => "kernel_bounds",
            CheckKind::GreenBounds => "green_bounds",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// Graph, grid and configuration shared by the checkers, with a common exit
/// time cache.
#[derive(Debug)]
pub struct CheckContext<'g> {
    pub graph: &'g WeightedGraph,
    pub graph_spec: Value,
    pub grid: Grid,
    pub config: CheckConfig,
    pub times: ExitTimes<'g>,
}

impl<'g> CheckContext<'g> {
    pub fn new(graph: &'g WeightedGraph, grid: Grid) -> Self {
        Self::with_config(graph, grid, CheckConfig::default())
    }

    pub fn with_config(graph: &'g WeightedGraph, grid: Grid, config: CheckConfig) -> Self {
        let times = ExitTimes::with_policy(graph, config.solver);
        Self {
            graph,
            graph_spec: Value::Null,
            grid,
            config,
            times,
        }
    }

    pub fn with_graph_spec(mut self, spec: Value) -> Self {
        self.graph_spec = spec;
        self
    }

    pub fn run(&self, kind: CheckKind) -> Result<ConditionReport> {
        match kind {
            CheckKind::VolumeDoubling => check_volume_doubling(self),
            CheckKind::TimeConditions => check_time_conditions(self),
            CheckKind::UniformExit => check_uniform_exit(self),
            CheckKind::Einstein => check_einstein(self),
            CheckKind::MeanValue => check_mean_value(self),
            CheckKind::HarnackElliptic => check_harnack(self, HarnackMode::Elliptic),
            CheckKind::HarnackParabolic => check_harnack(self, HarnackMode::Parabolic),
            CheckKind::KernelBounds => check_kernel_bounds(self),
            CheckKind::GreenBounds => check_green_bounds(self),
        }
    }

    /// As [`run`](Self::run), but a truncation error becomes a failing
    /// report holding one flagged cell instead of an error.
    pub fn run_flagged(&self, kind: CheckKind) -> Result<ConditionReport> {
        let outcome = match self.grid.truncation() {
            Some(err) => Err(err),
            None => self.run(kind),
        };
        match outcome {
            Err(LabError::Truncation { vertex, radius, safe }) => {
                let mut b = report::ReportBuilder::new(kind.name(), TRUNCATED);
                b.cells([Cell::flagged(vertex, radius, TRUNCATED, format!("safe radius {safe}"))]);
                Ok(self.finish(b))
            }
            other => other,
        }
    }

    pub(crate) fn finish(&self, builder: report::ReportBuilder) -> ConditionReport {
        let config = serde_json::to_value(&self.config).expect("config serialises");
        builder.finish(self.graph_spec.clone(), self.grid.clone(), config)
    }

    /// Deterministic generator for one cell of one checker.
    pub(crate) fn rng(&self, tag: u64, x: usize, r: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        rng.set_stream(((x as u64) << 24) ^ r as u64);
        rng
    }

    /// Up to `cap` sorted members, chosen reproducibly; `always` is kept.
    pub(crate) fn subsample(&self, members: &[usize], cap: usize, tag: u64, x: usize, r: usize, always: usize) -> Vec<usize> {
        if members.len() <= cap {
            return members.to_vec();
        }
        let mut rng = self.rng(tag, x, r);
        let mut out: Vec<usize> = sample(&mut rng, members.len(), cap.max(1))
            .into_iter()
            .map(|i| members[i])
            .collect();
        if members.contains(&always) && !out.contains(&always) {
            out.push(always);
        }
        out.sort_unstable();
        out
    }

    /// Scale function over the grid centres, tabulated up to `r_max` or the
    /// largest radius some centre admits.
    pub(crate) fn scale_function(&self, r_max: usize) -> Result<ScaleFunction> {
        let reach = self.grid.safe_radii.iter().copied().max().unwrap_or(0);
        scale_function_with(&self.times, &self.grid.centers, r_max.min(reach).max(1))
    }
}

/// Pooled exponent fit over per-centre series; `None` if fewer than three
/// distinct radii are available.
pub(crate) fn pooled_fit(points: &[(usize, f64)]) -> Option<(f64, f64)> {
    let mut radii: Vec<usize> = points.iter().map(|p| p.0).collect();
    radii.sort_unstable();
    radii.dedup();
    if radii.len() < 3 {
        return None;
    }
    let series: Vec<(f64, f64)> = points.iter().map(|&(r, v)| (r as f64, v)).collect();
    fit_exponent(&series).ok()
}
