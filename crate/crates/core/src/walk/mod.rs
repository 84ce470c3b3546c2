//! The random walk `P(x, y) = mu_xy / mu(x)`: heat profiles, exit times, the
//! space-time scale function and the sub-Gaussian kernel functions.

mod exit;
mod monte_carlo;
mod scale;

use crate::error::{LabError, Result};
use crate::graph::{VertexSet, WeightedGraph};

pub use exit::{local_k, ExitField, ExitTimes};
pub use monte_carlo::{mc_exit_time, McConfig, McExitEstimate};
pub use scale::{scale_function, scale_function_with, subgaussian_k, ScaleFunction};

/// Relative slack used when comparing solved exit times against targets, so
/// that e.g. a solved `E = 63.999999999` still reaches `n = 64`.
pub const COMPARISON_SLACK: f64 = 1e-9;

/// `value >= target` up to [`COMPARISON_SLACK`].
pub fn reaches(value: f64, target: f64) -> bool {
    value >= target - COMPARISON_SLACK * target.abs().max(1.0)
}

/// Longest horizon [`heat_profile`] will tabulate.
pub const MAX_HORIZON: usize = 1_000_000;

/// Upper bound on `(horizon + 1) * vertex_count` for a fully stored profile.
pub const MAX_PROFILE_ENTRIES: usize = 50_000_000;

/// Free walk, or the walk killed on leaving a set.
#[derive(Debug, Clone)]
pub enum HeatMode {
    Free,
    Killed(VertexSet),
}

/// Step-by-step evolution of the distribution `P_k(x, .)`.
#[derive(Debug, Clone)]
pub struct HeatEvolution<'g> {
    graph: &'g WeightedGraph,
    /// Members of the killing set, when killed; only these are updated.
    active: Option<Vec<usize>>,
    current: Vec<f64>,
    scratch: Vec<f64>,
    step: usize,
}

impl<'g> HeatEvolution<'g> {
    pub fn new(graph: &'g WeightedGraph, source: usize, mode: &HeatMode) -> Result<Self> {
        graph.check_vertex(source)?;
        let active = match mode {
            HeatMode::Free => None,
            HeatMode::Killed(set) => {
                if !set.contains(source) {
                    return Err(LabError::Domain(format!(
                        "source {source} is outside the killing set"
                    )));
                }
                Some(set.members().to_vec())
            }
        };
        let mut current = vec![0.0; graph.vertex_count()];
        current[source] = 1.0;
        Ok(Self {
            graph,
            active,
            scratch: vec![0.0; current.len()],
            current,
            step: 0,
        })
    }

    pub fn step(&self) -> usize {
        self.step
    }

    /// `P_k(x, .)` (or `P^B_k(x, .)`) for the current `k`.
    pub fn distribution(&self) -> &[f64] {
        &self.current
    }

    pub fn advance(&mut self) {
        let g = self.graph;
        // q(z) = P_k(x, z) / mu(z); then P_{k+1}(x, y) = sum_z q(z) mu_zy.
        // In killed mode q stays zero off the set, so only members move.
        match &self.active {
            None => {
                for (z, q) in self.scratch.iter_mut().enumerate() {
                    *q = self.current[z] / g.measure(z);
                }
                for y in 0..g.vertex_count() {
                    self.current[y] = pull(g, &self.scratch, y);
                }
            }
            Some(members) => {
                for &z in members {
                    self.scratch[z] = self.current[z] / g.measure(z);
                }
                for &y in members {
                    self.current[y] = pull(g, &self.scratch, y);
                }
            }
        }
        self.step += 1;
    }
}

fn pull(g: &WeightedGraph, q: &[f64], y: usize) -> f64 {
    g.neighbor_ids(y)
        .iter()
        .zip(g.neighbor_weights(y))
        .map(|(&z, &w)| q[z] * w)
        .sum()
}

/// Tabulated rows `P_k(x, .)` for `k = 0..=horizon`.
#[derive(Debug, Clone)]
pub struct HeatProfile {
    source: usize,
    horizon: usize,
    killed: Option<VertexSet>,
    rows: Vec<Vec<f64>>,
    measures: Vec<f64>,
}

impl HeatProfile {
    pub fn source(&self) -> usize {
        self.source
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn killing_set(&self) -> Option<&VertexSet> {
        self.killed.as_ref()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k]
    }

    /// `P_k(x, y)`.
    pub fn probability(&self, k: usize, y: usize) -> f64 {
        self.rows[k][y]
    }

    /// `p_k(x, y) = P_k(x, y) / mu(y)`.
    pub fn kernel(&self, k: usize, y: usize) -> f64 {
        self.rows[k][y] / self.measures[y]
    }

    /// `sum_y P_k(x, y)`: one for the free walk, survival probability when killed.
    pub fn mass(&self, k: usize) -> f64 {
        self.rows[k].iter().sum()
    }
}

/// Iterates the walk from `x` for `horizon` steps, storing every row.
pub fn heat_profile(
    g: &WeightedGraph,
    x: usize,
    horizon: usize,
    mode: HeatMode,
) -> Result<HeatProfile> {
    if horizon > MAX_HORIZON || (horizon + 1).saturating_mul(g.vertex_count()) > MAX_PROFILE_ENTRIES {
        return Err(LabError::Domain(format!(
            "heat profile horizon {horizon} exceeds the storage cap for {} vertices",
            g.vertex_count()
        )));
    }
    let mut evolution = HeatEvolution::new(g, x, &mode)?;
    let mut rows = Vec::with_capacity(horizon + 1);
    rows.push(evolution.distribution().to_vec());
    for _ in 0..horizon {
        evolution.advance();
        rows.push(evolution.distribution().to_vec());
    }
    Ok(HeatProfile {
        source: x,
        horizon,
        killed: match mode {
            HeatMode::Free => None,
            HeatMode::Killed(set) => Some(set),
        },
        rows,
        measures: g.measures().to_vec(),
    })
}
