use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::graph::WeightedGraph;

/// How grid centres are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum CenterStrategy {
    /// Every vertex.
    All,
    /// Vertices carrying any of these labels.
    Labeled { labels: Vec<String> },
    Explicit { vertices: Vec<usize> },
    /// About `count` vertices spread over the dyadic shells
    /// `{2^k <= d(z0, .) < 2^(k+1)}` around the `z0` label (or vertex 0).
    Stratified { count: usize, seed: u64 },
}

impl Default for CenterStrategy {
    fn default() -> Self {
        CenterStrategy::Labeled {
            labels: vec!["z0".into()],
        }
    }
}

/// Unresolved grid description, as written in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub centers: CenterStrategy,
    /// Smallest radius `R0`; radii are `R0, 2 R0, 4 R0, ...`.
    pub base_radius: usize,
    pub max_radius: Option<usize>,
    /// Time points for kernel checks; empty means dyadic up to the horizon.
    pub times: Vec<u64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            centers: CenterStrategy::default(),
            base_radius: 1,
            max_radius: None,
            times: Vec::new(),
        }
    }
}

/// Resolved centres, radii and times. A cell `(x, R)` is admissible when
/// `2R <= safe(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub spec: GridSpec,
    pub centers: Vec<usize>,
    pub safe_radii: Vec<usize>,
    pub radii: Vec<usize>,
    pub times: Vec<u64>,
}

impl Grid {
    /// Resolves `spec` on `g`; fails with a truncation error when no radius
    /// is admissible at any centre.
    pub fn resolve(g: &WeightedGraph, spec: &GridSpec) -> Result<Self> {
        let grid = Self::resolve_partial(g, spec)?;
        match grid.truncation() {
            Some(err) => Err(err),
            None => Ok(grid),
        }
    }

    /// As [`resolve`](Self::resolve), but a grid without admissible radii is
    /// returned as is.
    pub fn resolve_partial(g: &WeightedGraph, spec: &GridSpec) -> Result<Self> {
        if spec.base_radius == 0 {
            return Err(LabError::Domain("grid base radius must be at least 1".into()));
        }
        let mut centers = match &spec.centers {
            CenterStrategy::All => (0..g.vertex_count()).collect(),
            CenterStrategy::Labeled { labels } => {
                let found: Vec<usize> = g
                    .labels()
                    .iter()
                    .filter(|(_, name)| labels.contains(name))
                    .map(|&(v, _)| v)
                    .collect();
                if let Some(missing) = labels.iter().find(|l| g.vertex_by_label(l).is_none()) {
                    return Err(LabError::Domain(format!("graph has no vertex labelled {missing}")));
                }
                found
            }
            CenterStrategy::Explicit { vertices } => {
                for &v in vertices {
                    g.check_vertex(v)?;
                }
                vertices.clone()
            }
            CenterStrategy::Stratified { count, seed } => stratified(g, *count, *seed),
        };
        centers.sort_unstable();
        centers.dedup();
        if centers.is_empty() {
            return Err(LabError::Domain("grid has no centers".into()));
        }
        let safe_radii = centers
            .iter()
            .map(|&x| g.safe_radius(x))
            .collect::<Result<Vec<_>>>()?;
        let reach = safe_radii.iter().copied().max().unwrap_or(0);
        let cap = spec.max_radius.unwrap_or(usize::MAX);
        let mut radii = Vec::new();
        let mut r = spec.base_radius;
        while 2 * r <= reach && r <= cap {
            radii.push(r);
            r *= 2;
        }
        Ok(Self {
            spec: spec.clone(),
            centers,
            safe_radii,
            radii,
            times: spec.times.clone(),
        })
    }

    /// The truncation error for a grid with no admissible radius.
    pub fn truncation(&self) -> Option<LabError> {
        if !self.radii.is_empty() {
            return None;
        }
        let (i, safe) = self
            .safe_radii
            .iter()
            .copied()
            .enumerate()
            .max_by_key(|&(i, s)| (s, std::cmp::Reverse(i)))?;
        Some(LabError::Truncation {
            vertex: self.centers[i],
            radius: 2 * self.spec.base_radius,
            safe,
        })
    }

    pub fn safe_radius_of(&self, x: usize) -> Option<usize> {
        self.centers
            .binary_search(&x)
            .ok()
            .map(|i| self.safe_radii[i])
    }

    /// Admissible `(x, R)` pairs, centre-major.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        self.centers
            .iter()
            .zip(&self.safe_radii)
            .flat_map(|(&x, &s)| {
                self.radii
                    .iter()
                    .filter(move |&&r| 2 * r <= s)
                    .map(move |&r| (x, r))
            })
            .collect()
    }

    /// Radii used for exponent fits at `x`: the admissible `R` and `2R`.
    pub fn fit_radii(&self, x: usize) -> Vec<usize> {
        let safe = self.safe_radius_of(x).unwrap_or(0);
        let mut out: Vec<usize> = self
            .radii
            .iter()
            .filter(|&&r| 2 * r <= safe)
            .flat_map(|&r| [r, 2 * r])
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Explicit times, or `1, 2, 4, ...` up to `horizon`.
    pub fn time_points(&self, horizon: u64) -> Vec<u64> {
        if self.times.is_empty() {
            std::iter::successors(Some(1u64), |n| Some(n * 2))
                .take_while(|&n| n <= horizon)
                .collect()
        } else {
            let mut t: Vec<u64> = self.times.iter().copied().filter(|&n| n >= 1).collect();
            t.sort_unstable();
            t.dedup();
            t
        }
    }
}

fn stratified(g: &WeightedGraph, count: usize, seed: u64) -> Vec<usize> {
    let origin = g.vertex_by_label("z0").unwrap_or(0);
    let field = g.distance_field(origin, None);
    let mut shells: Vec<Vec<usize>> = Vec::new();
    for &v in field.order() {
        let d = field.get(v).unwrap_or(0);
        let shell = if d == 0 { 0 } else { d.ilog2() as usize + 1 };
        if shells.len() <= shell {
            shells.resize(shell + 1, Vec::new());
        }
        shells[shell].push(v);
    }
    let per_shell = count.div_ceil(shells.len().max(1)).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for mut shell in shells {
        shell.sort_unstable();
        let k = per_shell.min(shell.len());
        out.extend(sample(&mut rng, shell.len(), k).into_iter().map(|i| shell[i]));
    }
    out
}
