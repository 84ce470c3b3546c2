use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::graph::{VertexSet, WeightedGraph};

/// Simulation settings for [`mc_exit_time`].
#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub walks: usize,
    pub seed: u64,
    /// Walks still inside after this many steps are censored.
    pub step_cap: u64,
    /// Times `n` at which the empirical tail `P(T < n)` is reported.
    pub tail_grid: Vec<u64>,
}

impl McConfig {
    pub fn new(walks: usize, seed: u64) -> Self {
        Self {
            walks,
            seed,
            step_cap: 10_000_000,
            tail_grid: Vec::new(),
        }
    }

    pub fn with_tail_grid(mut self, grid: impl IntoIterator<Item = u64>) -> Self {
        self.tail_grid = grid.into_iter().collect();
        self
    }

    pub fn with_step_cap(mut self, cap: u64) -> Self {
        self.step_cap = cap;
        self
    }
}

/// Empirical exit time statistics. Censored walks enter the mean at the
/// step cap.
#[derive(Debug, Clone, PartialEq)]
pub struct McExitEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub walks: usize,
    pub censored: usize,
    /// `(n, P(T < n))` for each grid point.
    pub tail: Vec<(u64, f64)>,
}

/// Runs `walks` independent walks from `x` until they leave `B(x, R)`.
/// Walk `i` draws from a ChaCha8 stream keyed by `(seed, i)`, so the result
/// does not depend on the thread schedule.
pub fn mc_exit_time(
    g: &WeightedGraph,
    x: usize,
    radius: usize,
    config: &McConfig,
) -> Result<McExitEstimate> {
    if config.walks == 0 {
        return Err(LabError::Domain("mc_exit_time needs at least one walk".into()));
    }
    let ball = g.ball(x, radius)?;
    if ball.len() == g.vertex_count() {
        return Err(LabError::Domain(
            "ball covers the whole finite graph; the walk never exits".into(),
        ));
    }
    let samples: Vec<(u64, bool)> = (0..config.walks)
        .into_par_iter()
        .map(|i| simulate(g, x, &ball, config.seed, i as u64, config.step_cap))
        .collect();

    let n = samples.len() as f64;
    let mean = samples.iter().map(|&(t, _)| t as f64).sum::<f64>() / n;
    let variance = if samples.len() > 1 {
        samples
            .iter()
            .map(|&(t, _)| (t as f64 - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0)
    } else {
        0.0
    };
    let tail = config
        .tail_grid
        .iter()
        .map(|&m| {
            let hits = samples.iter().filter(|&&(t, c)| !c && t < m).count();
            (m, hits as f64 / n)
        })
        .collect();
    Ok(McExitEstimate {
        mean,
        standard_error: (variance / n).sqrt(),
        walks: config.walks,
        censored: samples.iter().filter(|s| s.1).count(),
        tail,
    })
}

fn simulate(
    g: &WeightedGraph,
    x: usize,
    ball: &VertexSet,
    seed: u64,
    index: u64,
    cap: u64,
) -> (u64, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut z = x;
    let mut t = 0u64;
    while ball.contains(z) {
        if t == cap {
            return (t, true);
        }
        let target = rng.random::<f64>() * g.measure(z);
        let ids = g.neighbor_ids(z);
        let weights = g.neighbor_weights(z);
        let mut acc = 0.0;
        let mut next = ids[ids.len() - 1];
        for (&y, &w) in ids.iter().zip(weights) {
            acc += w;
            if target < acc {
                next = y;
                break;
            }
        }
        z = next;
        t += 1;
    }
    (t, false)
}
