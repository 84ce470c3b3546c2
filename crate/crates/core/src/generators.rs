//! Parametric constructions of the example graphs: integer lattice boxes,
//! Sierpinski gasket pre-fractals, Vicsek trees and their stretched and
//! weighted variants.
//!
//! Every generator labels a root vertex `z0` and marks the truncation frontier
//! with [`FRONTIER_LABEL`] so that downstream queries know how far the finite
//! graph can be trusted.

use std::collections::BTreeMap;
use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::graph::{WeightedGraph, FRONTIER_LABEL};

/// Default ceiling on generated vertex counts.
pub const DEFAULT_VERTEX_CAP: usize = 2_000_000;

/// Default ratio of the geometric weight rule for weighted Vicsek trees.
pub const DEFAULT_WEIGHT_RATIO: f64 = 1.25;

/// Edge weight as a function of the annulus index `i` of a Vicsek tree edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum WeightRule {
    /// `w(i) = ratio^i`.
    Geometric { ratio: f64 },
    /// `w(i) = values[i]`, the last value repeating beyond the table.
    Table { values: Vec<f64> },
}

impl Default for WeightRule {
    fn default() -> Self {
        WeightRule::Geometric {
            ratio: DEFAULT_WEIGHT_RATIO,
        }
    }
}

impl WeightRule {
    pub fn weight(&self, annulus: usize) -> f64 {
        match self {
            WeightRule::Geometric { ratio } => ratio.powi(annulus as i32),
            WeightRule::Table { values } => values[annulus.min(values.len() - 1)],
        }
    }

    fn validate(&self, level: usize) -> Result<()> {
        if let WeightRule::Table { values } = self {
            if values.is_empty() {
                return Err(LabError::Domain("weight table is empty".into()));
            }
        }
        for i in 0..=level {
            let w = self.weight(i);
            if !(w.is_finite() && w > 0.0) {
                return Err(LabError::Domain(format!(
                    "weight rule gives non-positive weight {w} on annulus {i}"
                )));
            }
        }
        Ok(())
    }
}

/// Which graph to build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GeneratorSpec {
    Lattice { dim: usize, halfwidth: usize },
    Gasket { level: usize },
    Vicsek { level: usize },
    StretchedVicsek { level: usize },
    WeightedVicsek {
        level: usize,
        #[serde(default)]
        weights: WeightRule,
    },
}

impl GeneratorSpec {
    /// Vertex count of the graph this spec would produce (saturating).
    pub fn predicted_vertices(&self) -> u128 {
        match *self {
            GeneratorSpec::Lattice { dim, halfwidth } => {
                (2 * halfwidth as u128 + 1).saturating_pow(dim as u32)
            }
            GeneratorSpec::Gasket { level } => {
                3u128.checked_pow(level as u32).map_or(u128::MAX, |p| 3 * (p + 1) / 2)
            }
            GeneratorSpec::Vicsek { level } | GeneratorSpec::WeightedVicsek { level, .. } => {
                5u128.checked_pow(level as u32).map_or(u128::MAX, |p| 4 * p + 1)
            }
            GeneratorSpec::StretchedVicsek { level } => {
                let mut edges: u128 = 4;
                for i in 1..=level {
                    let annulus = 5u128
                        .checked_pow(i as u32 - 1)
                        .map_or(u128::MAX, |p| p.saturating_mul(16));
                    edges = edges.saturating_add(annulus.saturating_mul(i as u128 + 1));
                }
                edges.saturating_add(1)
            }
        }
    }

    pub fn build(&self) -> Result<WeightedGraph> {
        self.build_with_cap(DEFAULT_VERTEX_CAP)
    }

    pub fn build_with_cap(&self, cap: usize) -> Result<WeightedGraph> {
        let requested = self.predicted_vertices();
        if requested > cap as u128 {
            return Err(LabError::CapExceeded {
                requested: usize::try_from(requested).unwrap_or(usize::MAX),
                cap,
            });
        }
        match self {
            GeneratorSpec::Lattice { dim, halfwidth } => build_lattice(*dim, *halfwidth),
            GeneratorSpec::Gasket { level } => build_gasket(*level),
            GeneratorSpec::Vicsek { level } => {
                build_vicsek(*level, &WeightRule::Geometric { ratio: 1.0 })
            }
            GeneratorSpec::StretchedVicsek { level } => build_stretched(*level),
            GeneratorSpec::WeightedVicsek { level, weights } => {
                weights.validate(*level)?;
                build_vicsek(*level, weights)
            }
        }
    }

    /// Short human-readable name, e.g. `gasket(level=3)`.
    pub fn describe(&self) -> String {
        match self {
            GeneratorSpec::Lattice { dim, halfwidth } => {
                format!("lattice(dim={dim},halfwidth={halfwidth})")
            }
            GeneratorSpec::Gasket { level } => format!("gasket(level={level})"),
            GeneratorSpec::Vicsek { level } => format!("vicsek(level={level})"),
            GeneratorSpec::StretchedVicsek { level } => format!("stretched_vicsek(level={level})"),
            GeneratorSpec::WeightedVicsek { level, weights } => match weights {
                WeightRule::Geometric { ratio } => {
                    format!("weighted_vicsek(level={level},ratio={ratio})")
                }
                WeightRule::Table { values } => {
                    format!("weighted_vicsek(level={level},table={values:?})")
                }
            },
        }
    }
}

/// Box `{-h..h}^d` of the integer lattice with unit nearest-neighbour weights.
pub fn lattice_zd(dim: usize, halfwidth: usize) -> Result<WeightedGraph> {
    GeneratorSpec::Lattice { dim, halfwidth }.build()
}

/// Level-`n` Sierpinski gasket pre-fractal.
pub fn sierpinski_gasket(level: usize) -> Result<WeightedGraph> {
    GeneratorSpec::Gasket { level }.build()
}

/// Level-`n` Vicsek tree with unit weights, rooted at its centre.
pub fn vicsek_tree(level: usize) -> Result<WeightedGraph> {
    GeneratorSpec::Vicsek { level }.build()
}

/// Vicsek tree whose annulus-`i` edges are replaced by paths of length `i+1`.
pub fn stretched_vicsek(level: usize) -> Result<WeightedGraph> {
    GeneratorSpec::StretchedVicsek { level }.build()
}

/// Vicsek tree whose annulus-`i` edges carry weight `rule.weight(i)`.
pub fn weighted_vicsek(level: usize, rule: WeightRule) -> Result<WeightedGraph> {
    GeneratorSpec::WeightedVicsek {
        level,
        weights: rule,
    }
    .build()
}

fn build_lattice(dim: usize, halfwidth: usize) -> Result<WeightedGraph> {
    if !(1..=3).contains(&dim) {
        return Err(LabError::Domain(format!("lattice dimension {dim} not in 1..=3")));
    }
    if halfwidth == 0 {
        return Err(LabError::Domain("lattice halfwidth must be positive".into()));
    }
    let side = 2 * halfwidth + 1;
    let count = side.pow(dim as u32);
    let stride = |k: usize| side.pow(k as u32);
    let mut edges = Vec::with_capacity(dim * count);
    let mut labels = Vec::new();
    for v in 0..count {
        let mut on_surface = false;
        for k in 0..dim {
            let coord = (v / stride(k)) % side;
            if coord == 0 || coord == side - 1 {
                on_surface = true;
            }
            if coord + 1 < side {
                edges.push((v, v + stride(k), 1.0));
            }
        }
        if on_surface {
            labels.push((v, FRONTIER_LABEL.to_string()));
        }
    }
    let centre = (0..dim).map(|k| halfwidth * stride(k)).sum::<usize>();
    labels.push((centre, "z0".to_string()));
    labels.push((centre, "center".to_string()));
    WeightedGraph::from_edges(count, edges)?.with_labels(labels)
}

type Point = (i64, i64);

/// Assigns dense ids to coordinates in sorted order and builds the graph.
fn from_coordinate_edges(
    edges: &[(Point, Point, f64)],
    labels: &[(Point, &str)],
) -> Result<(WeightedGraph, BTreeMap<Point, usize>)> {
    let mut ids: BTreeMap<Point, usize> = BTreeMap::new();
    for &(a, b, _) in edges {
        ids.insert(a, 0);
        ids.insert(b, 0);
    }
    for (i, id) in ids.values_mut().enumerate() {
        *id = i;
    }
    let g = WeightedGraph::from_edges(ids.len(), edges.iter().map(|&(a, b, w)| (ids[&a], ids[&b], w)))?
        .with_labels(labels.iter().map(|&(p, name)| (ids[&p], name)))?;
    Ok((g, ids))
}

fn build_gasket(level: usize) -> Result<WeightedGraph> {
    // Triangular-lattice coordinates: corners (0,0), (2^n,0), (0,2^n).
    let mut edges: Vec<(Point, Point)> = vec![((0, 0), (1, 0)), ((0, 0), (0, 1)), ((1, 0), (0, 1))];
    for k in 0..level {
        let shift = 1i64 << k;
        let base = edges.clone();
        for (dx, dy) in [(shift, 0), (0, shift)] {
            edges.extend(
                base.iter()
                    .map(|&((a, b), (c, d))| ((a + dx, b + dy), (c + dx, d + dy))),
            );
        }
    }
    let side = 1i64 << level;
    let weighted: Vec<_> = edges.into_iter().map(|(a, b)| (a, b, 1.0)).collect();
    let labels = [
        ((0, 0), "z0"),
        ((0, 0), "corner0"),
        ((side, 0), "corner1"),
        ((0, side), "corner2"),
        ((side, 0), FRONTIER_LABEL),
        ((0, side), FRONTIER_LABEL),
    ];
    Ok(from_coordinate_edges(&weighted, &labels)?.0)
}

/// Edges of the level-`n` Vicsek tree as cross-shaped planar coordinates,
/// each tagged with its annulus index (the smallest nested central copy that
/// contains it). Extremes of level `k` sit at `(+-3^k, 0)` and `(0, +-3^k)`.
fn vicsek_edges(level: usize) -> Vec<(Point, Point, usize)> {
    let mut edges: Vec<(Point, Point, usize)> = [(1, 0), (0, 1), (-1, 0), (0, -1)]
        .into_iter()
        .map(|p| ((0, 0), p, 0))
        .collect();
    for k in 0..level {
        let offset = 2 * 3i64.pow(k as u32);
        let base = edges.clone();
        for (dx, dy) in [(offset, 0), (0, offset), (-offset, 0), (0, -offset)] {
            edges.extend(
                base.iter()
                    .map(|&((a, b), (c, d), _)| ((a + dx, b + dy), (c + dx, d + dy), k + 1)),
            );
        }
    }
    edges
}

fn build_vicsek(level: usize, rule: &WeightRule) -> Result<WeightedGraph> {
    let reach = 3i64.pow(level as u32);
    let edges: Vec<_> = vicsek_edges(level)
        .into_iter()
        .map(|(a, b, annulus)| (a, b, rule.weight(annulus)))
        .collect();
    let extremes = [(reach, 0), (0, reach), (-reach, 0), (0, -reach)];
    let mut labels = vec![((0, 0), "z0"), ((0, 0), "center")];
    for (i, &p) in extremes.iter().enumerate() {
        labels.push((p, ["extreme0", "extreme1", "extreme2", "extreme3"][i]));
        labels.push((p, FRONTIER_LABEL));
    }
    Ok(from_coordinate_edges(&edges, &labels)?.0)
}

fn build_stretched(level: usize) -> Result<WeightedGraph> {
    if level == 0 {
        return Err(LabError::Domain("stretched Vicsek level must be at least 1".into()));
    }
    let reach = 3i64.pow(level as u32);
    let root: Point = (-reach, 0);
    let base: Vec<_> = vicsek_edges(level).into_iter().map(|(a, b, _)| (a, b, 1.0)).collect();
    let (tree, ids) = from_coordinate_edges(&base, &[])?;

    // Distances from the root in the unstretched tree define the blocks
    // G_i = {v : d(z0, v) <= 2 * 3^i}.
    let root_id = ids[&root];
    let mut dist = vec![usize::MAX; tree.vertex_count()];
    let mut queue = VecDeque::from([root_id]);
    dist[root_id] = 0;
    while let Some(v) = queue.pop_front() {
        for &y in tree.neighbor_ids(v) {
            if dist[y] == usize::MAX {
                dist[y] = dist[v] + 1;
                queue.push_back(y);
            }
        }
    }
    let block_of = |v: usize| -> usize {
        (0..=level)
            .find(|&i| dist[v] <= 2 * 3usize.pow(i as u32))
            .unwrap_or(level)
    };

    let mut next_id = tree.vertex_count();
    let mut edges = Vec::new();
    for &(u, v, _) in tree.edges() {
        let annulus = block_of(u).max(block_of(v));
        let mut prev = u;
        for _ in 0..annulus {
            edges.push((prev, next_id, 1.0));
            prev = next_id;
            next_id += 1;
        }
        edges.push((prev, v, 1.0));
    }

    let mut labels: Vec<(usize, String)> = Vec::new();
    labels.push((root_id, "z0".to_string()));
    for i in 1..=level {
        let cut = (-reach + 2 * 3i64.pow(i as u32), 0);
        labels.push((ids[&cut], format!("z{i}")));
    }
    labels.push((ids[&(reach, 0)], FRONTIER_LABEL.to_string()));
    labels.push((root_id, "root".to_string()));
    WeightedGraph::from_edges(next_id, edges)?.with_labels(labels)
}
