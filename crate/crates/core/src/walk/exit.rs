use std::collections::HashMap;
use std::sync::RwLock;

use rayon::prelude::*;

use crate::domain::KilledDomain;
use crate::error::{LabError, Result};
use crate::graph::WeightedGraph;
use crate::linalg::SolverPolicy;

use super::reaches;

/// Mean exit times `E_z(x, R)` from the ball `B = B(x, R)`, solved from
/// `(I - P^B) E = 1` on `B` with `E = 0` outside.
#[derive(Debug, Clone)]
pub struct ExitField {
    center: usize,
    radius: usize,
    members: Vec<usize>,
    values: Vec<f64>,
    residual: f64,
}

impl ExitField {
    pub fn solve(g: &WeightedGraph, x: usize, radius: usize, policy: SolverPolicy) -> Result<Self> {
        let ball = g.ball(x, radius)?;
        let domain = KilledDomain::new(g, ball)?;
        let measures = domain.local_measures();
        let values = domain.solver(0.0, policy).solve(&measures)?;
        let p_e = domain.apply_transition(&values);
        let residual = values
            .iter()
            .zip(&p_e)
            .map(|(e, pe)| (e - pe - 1.0).abs())
            .fold(0.0, f64::max);
        Ok(Self {
            center: x,
            radius,
            members: domain.members().to_vec(),
            values,
            residual,
        })
    }

    pub fn center(&self) -> usize {
        self.center
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Ball members (sorted) aligned with [`values`](Self::values).
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `E_z(x, R)`; zero outside the ball.
    pub fn at(&self, z: usize) -> f64 {
        self.members
            .binary_search(&z)
            .map_or(0.0, |i| self.values[i])
    }

    /// `E(x, R)`.
    pub fn mean(&self) -> f64 {
        self.at(self.center)
    }

    /// `Ebar(x, R) = max_z E_z(x, R)`.
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// `max_z |(I - P^B) E (z) - 1|`.
    pub fn residual(&self) -> f64 {
        self.residual
    }
}

/// Memoised `E(x, R)` for one graph. Safe to share between threads; every
/// entry is a pure function of `(x, R)`.
#[derive(Debug)]
pub struct ExitTimes<'g> {
    graph: &'g WeightedGraph,
    policy: SolverPolicy,
    cache: RwLock<HashMap<(usize, usize), f64>>,
}

impl<'g> ExitTimes<'g> {
    pub fn new(graph: &'g WeightedGraph) -> Self {
        Self::with_policy(graph, SolverPolicy::default())
    }

    pub fn with_policy(graph: &'g WeightedGraph, policy: SolverPolicy) -> Self {
        Self {
            graph,
            policy,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn graph(&self) -> &'g WeightedGraph {
        self.graph
    }

    pub fn policy(&self) -> SolverPolicy {
        self.policy
    }

    /// `E(x, R)`.
    pub fn get(&self, x: usize, radius: usize) -> Result<f64> {
        if let Some(&v) = self.cache.read().expect("exit cache poisoned").get(&(x, radius)) {
            return Ok(v);
        }
        let value = ExitField::solve(self.graph, x, radius, self.policy)?.mean();
        self.cache
            .write()
            .expect("exit cache poisoned")
            .insert((x, radius), value);
        Ok(value)
    }

    /// Full field `E_z(x, R)`; the centre value is cached.
    pub fn field(&self, x: usize, radius: usize) -> Result<ExitField> {
        let field = ExitField::solve(self.graph, x, radius, self.policy)?;
        self.cache
            .write()
            .expect("exit cache poisoned")
            .insert((x, radius), field.mean());
        Ok(field)
    }

    /// `[E(x, 1), ..., E(x, r_max)]`.
    pub fn table(&self, x: usize, r_max: usize) -> Result<Vec<f64>> {
        (1..=r_max)
            .into_par_iter()
            .map(|r| self.get(x, r))
            .collect()
    }

    /// `e(x, n) = min{R : E(x, R) >= n}`, by bisection on the strictly
    /// increasing map `R -> E(x, R)`.
    pub fn inverse(&self, x: usize, n: f64) -> Result<usize> {
        let safe = self.graph.safe_radius(x)?;
        if n <= 1.0 {
            return Ok(1);
        }
        if safe == 0 || !reaches(self.get(x, safe)?, n) {
            return Err(LabError::Truncation {
                vertex: x,
                radius: safe + 1,
                safe,
            });
        }
        // invariant: E(x, lo) < n <= E(x, hi)
        let (mut lo, mut hi) = (1usize, safe);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if reaches(self.get(x, mid)?, n) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// Cached entries sorted by `(x, R)`.
    pub fn snapshot(&self) -> Vec<(usize, usize, f64)> {
        let mut entries: Vec<_> = self
            .cache
            .read()
            .expect("exit cache poisoned")
            .iter()
            .map(|(&(x, r), &v)| (x, r, v))
            .collect();
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        entries
    }

    /// Seeds the cache with previously computed values.
    pub fn preload(&self, entries: impl IntoIterator<Item = (usize, usize, f64)>) {
        let mut cache = self.cache.write().expect("exit cache poisoned");
        for (x, r, v) in entries {
            cache.insert((x, r), v);
        }
    }
}

/// Local kernel function: the largest `k >= 1` with
/// `n / k <= min_{y in B(x, R)} E(y, floor(R / k))`, or 0 when none exists.
pub fn local_k(times: &ExitTimes<'_>, n: f64, x: usize, radius: usize) -> Result<usize> {
    if radius == 0 {
        return Err(LabError::Domain("local_k needs R >= 1".into()));
    }
    let ball = times.graph().ball(x, radius)?;
    let mut k = radius;
    while k >= 1 {
        let q = radius / k;
        // k is the largest value in its block {k : floor(R/k) = q}
        let min_e = ball
            .members()
            .par_iter()
            .map(|&y| times.get(y, q))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if reaches(min_e, n / k as f64) {
            return Ok(k);
        }
        k = radius / (q + 1);
    }
    Ok(0)
}
