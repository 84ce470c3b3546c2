//! Finite vertex sets viewed as domains of the killed walk.

use crate::error::{LabError, Result};
use crate::graph::{VertexSet, WeightedGraph};
use crate::linalg::{LocalSolver, SolverPolicy, SymmetricMatrix};

/// A vertex set `B` together with a local numbering, used to assemble the
/// operators `(1+s) D_B - W_BB` of the walk killed on leaving `B`.
#[derive(Debug, Clone)]
pub struct KilledDomain<'g> {
    graph: &'g WeightedGraph,
    set: VertexSet,
    index: Vec<usize>,
}

impl<'g> KilledDomain<'g> {
    /// Fails when `B` is empty or is the whole vertex set (the walk would
    /// never be killed).
    pub fn new(graph: &'g WeightedGraph, set: VertexSet) -> Result<Self> {
        if set.is_empty() {
            return Err(LabError::Domain("killed domain is empty".into()));
        }
        if set.len() == graph.vertex_count() {
            return Err(LabError::Domain(
                "killed domain covers the whole finite graph; the walk never exits".into(),
            ));
        }
        let mut index = vec![usize::MAX; graph.vertex_count()];
        for (i, &v) in set.members().iter().enumerate() {
            index[v] = i;
        }
        Ok(Self { graph, set, index })
    }

    pub fn graph(&self) -> &'g WeightedGraph {
        self.graph
    }

    pub fn set(&self) -> &VertexSet {
        &self.set
    }

    pub fn members(&self) -> &[usize] {
        self.set.members()
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    pub fn local_index(&self, v: usize) -> Option<usize> {
        self.index.get(v).copied().filter(|&i| i != usize::MAX)
    }

    /// Vertex measures in local order.
    pub fn local_measures(&self) -> Vec<f64> {
        self.members().iter().map(|&v| self.graph.measure(v)).collect()
    }

    /// `(1 + shift) D_B - W_BB`.
    pub fn matrix(&self, shift: f64) -> SymmetricMatrix {
        let members = self.members();
        let diag = members
            .iter()
            .map(|&v| (1.0 + shift) * self.graph.measure(v))
            .collect();
        let rows = members
            .iter()
            .map(|&v| {
                self.graph
                    .neighbors(v)
                    .filter_map(|(y, w)| self.local_index(y).map(|j| (j, -w)))
                    .collect()
            })
            .collect();
        SymmetricMatrix::new(diag, rows)
    }

    pub fn solver(&self, shift: f64, policy: SolverPolicy) -> LocalSolver {
        LocalSolver::new(self.matrix(shift), policy)
    }

    /// `(P^B u)(z) = sum_{y in B} P(z, y) u(y)` for `u` in local order.
    pub fn apply_transition(&self, u: &[f64]) -> Vec<f64> {
        self.members()
            .iter()
            .map(|&z| {
                let mut acc = 0.0;
                for (y, w) in self.graph.neighbors(z) {
                    if let Some(j) = self.local_index(y) {
                        acc += w * u[j];
                    }
                }
                acc / self.graph.measure(z)
            })
            .collect()
    }

    /// `sum_{y in dB} mu_zy h(y)` for every `z` in `B`, the right-hand side of
    /// a Dirichlet problem with boundary data `h` (indexed globally).
    pub fn boundary_load(&self, boundary_value: impl Fn(usize) -> f64) -> Vec<f64> {
        self.members()
            .iter()
            .map(|&z| {
                self.graph
                    .neighbors(z)
                    .filter(|&(y, _)| self.local_index(y).is_none())
                    .map(|(y, w)| w * boundary_value(y))
                    .sum()
            })
            .collect()
    }
}
