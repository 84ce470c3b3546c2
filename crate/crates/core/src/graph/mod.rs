//! Immutable weighted graphs and their metric primitives.
//!
//! A [`WeightedGraph`] stores every undirected edge once with a strictly
//! positive weight `mu_xy`. The vertex measure `mu(x) = sum_y mu_xy` and a
//! CSR adjacency are derived at construction and never change afterwards, so a
//! graph can be shared freely between threads.
//!
//! Generated graphs are finite truncations of infinite graphs. The vertices
//! whose neighbourhood differs from the infinite graph carry the reserved
//! label [`FRONTIER_LABEL`]; the safe radius of a vertex is its distance to
//! the nearest such vertex, and ball queries beyond it are rejected.

mod io;

use std::collections::VecDeque;
use std::sync::OnceLock;

use crate::error::{LabError, Result};

pub use io::{parse_hkgraph, HKGRAPH_MAGIC};

/// Label marking vertices on the truncation frontier.
pub const FRONTIER_LABEL: &str = "frontier";

#[derive(Debug)]
pub struct WeightedGraph {
    vertex_count: usize,
    /// Canonical edge list: `u < v`, sorted lexicographically.
    edges: Vec<(usize, usize, f64)>,
    offsets: Vec<usize>,
    adjacency: Vec<usize>,
    adjacency_weights: Vec<f64>,
    measure: Vec<f64>,
    /// Sorted `(vertex, name)` pairs; a vertex may carry several labels.
    labels: Vec<(usize, String)>,
    safe_radii: OnceLock<Option<Vec<usize>>>,
}

impl Clone for WeightedGraph {
    fn clone(&self) -> Self {
        Self {
            vertex_count: self.vertex_count,
            edges: self.edges.clone(),
            offsets: self.offsets.clone(),
            adjacency: self.adjacency.clone(),
            adjacency_weights: self.adjacency_weights.clone(),
            measure: self.measure.clone(),
            labels: self.labels.clone(),
            safe_radii: OnceLock::new(),
        }
    }
}

impl PartialEq for WeightedGraph {
    fn eq(&self, other: &Self) -> bool {
        self.vertex_count == other.vertex_count
            && self.edges == other.edges
            && self.labels == other.labels
    }
}

impl WeightedGraph {
    /// Builds a graph from an edge list. Edges may be given in either
    /// orientation but each unordered pair at most once.
    pub fn from_edges<I>(vertex_count: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        if vertex_count == 0 {
            return Err(LabError::InvalidGraph("graph has no vertices".into()));
        }
        let mut canonical = Vec::new();
        for (u, v, w) in edges {
            if u >= vertex_count || v >= vertex_count {
                return Err(LabError::InvalidGraph(format!(
                    "edge ({u}, {v}) references a vertex outside 0..{vertex_count}"
                )));
            }
            if u == v {
                return Err(LabError::InvalidGraph(format!("self-loop at vertex {u}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(LabError::InvalidGraph(format!(
                    "edge ({u}, {v}) has non-positive weight {w}"
                )));
            }
            canonical.push((u.min(v), u.max(v), w));
        }
        canonical.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        if let Some(pair) = canonical.windows(2).find(|p| p[0].0 == p[1].0 && p[0].1 == p[1].1) {
            return Err(LabError::InvalidGraph(format!(
                "duplicate edge ({}, {})",
                pair[0].0, pair[0].1
            )));
        }

        let mut degree = vec![0usize; vertex_count];
        for &(u, v, _) in &canonical {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = vec![0usize; vertex_count + 1];
        for x in 0..vertex_count {
            offsets[x + 1] = offsets[x] + degree[x];
        }
        let mut fill = offsets.clone();
        let mut adjacency = vec![0usize; offsets[vertex_count]];
        let mut adjacency_weights = vec![0.0; offsets[vertex_count]];
        for &(u, v, w) in &canonical {
            adjacency[fill[u]] = v;
            adjacency_weights[fill[u]] = w;
            fill[u] += 1;
            adjacency[fill[v]] = u;
            adjacency_weights[fill[v]] = w;
            fill[v] += 1;
        }
        // Neighbour lists come out sorted because the edge list is sorted.
        let measure = (0..vertex_count)
            .map(|x| adjacency_weights[offsets[x]..offsets[x + 1]].iter().sum())
            .collect();

        let graph = Self {
            vertex_count,
            edges: canonical,
            offsets,
            adjacency,
            adjacency_weights,
            measure,
            labels: Vec::new(),
            safe_radii: OnceLock::new(),
        };
        if !graph.is_connected() {
            return Err(LabError::InvalidGraph("graph is not connected".into()));
        }
        Ok(graph)
    }

    /// Returns a copy carrying the given labels (replacing existing ones).
    pub fn with_labels<I, S>(mut self, labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, S)>,
        S: Into<String>,
    {
        let mut list: Vec<(usize, String)> = Vec::new();
        for (v, name) in labels {
            let name = name.into();
            if v >= self.vertex_count {
                return Err(LabError::UnknownVertex(v));
            }
            if name.is_empty() || name.chars().any(char::is_whitespace) {
                return Err(LabError::InvalidGraph(format!(
                    "label {name:?} must be non-empty and free of whitespace"
                )));
            }
            list.push((v, name));
        }
        list.sort();
        list.dedup();
        self.labels = list;
        self.safe_radii = OnceLock::new();
        Ok(self)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Canonical edges `(u, v, mu_uv)` with `u < v`.
    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn labels(&self) -> &[(usize, String)] {
        &self.labels
    }

    /// First vertex carrying `name`, if any.
    pub fn vertex_by_label(&self, name: &str) -> Option<usize> {
        self.labels.iter().find(|(_, l)| l == name).map(|&(v, _)| v)
    }

    pub fn labels_of(&self, x: usize) -> impl Iterator<Item = &str> {
        self.labels.iter().filter(move |(v, _)| *v == x).map(|(_, l)| l.as_str())
    }

    pub fn frontier(&self) -> Vec<usize> {
        self.labels
            .iter()
            .filter(|(_, l)| l == FRONTIER_LABEL)
            .map(|&(v, _)| v)
            .collect()
    }

    pub fn contains(&self, x: usize) -> bool {
        x < self.vertex_count
    }

    pub fn check_vertex(&self, x: usize) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(LabError::UnknownVertex(x))
        }
    }

    pub fn degree(&self, x: usize) -> usize {
        self.offsets[x + 1] - self.offsets[x]
    }

    /// Neighbours of `x` with edge weights, in increasing vertex order.
    pub fn neighbors(&self, x: usize) -> impl ExactSizeIterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[x]..self.offsets[x + 1];
        self.adjacency[range.clone()]
            .iter()
            .copied()
            .zip(self.adjacency_weights[range].iter().copied())
    }

    /// Edge weights aligned with [`neighbor_ids`](Self::neighbor_ids).
    pub fn neighbor_weights(&self, x: usize) -> &[f64] {
        &self.adjacency_weights[self.offsets[x]..self.offsets[x + 1]]
    }

    pub fn neighbor_ids(&self, x: usize) -> &[usize] {
        &self.adjacency[self.offsets[x]..self.offsets[x + 1]]
    }

    pub fn weight(&self, x: usize, y: usize) -> Option<f64> {
        let ids = self.neighbor_ids(x);
        ids.binary_search(&y)
            .ok()
            .map(|i| self.adjacency_weights[self.offsets[x] + i])
    }

    /// `mu(x)`.
    pub fn measure(&self, x: usize) -> f64 {
        self.measure[x]
    }

    pub fn measures(&self) -> &[f64] {
        &self.measure
    }

    pub fn total_measure(&self) -> f64 {
        self.measure.iter().sum()
    }

    /// One-step transition probability `P(x, y) = mu_xy / mu(x)`.
    pub fn transition(&self, x: usize, y: usize) -> f64 {
        self.weight(x, y).map_or(0.0, |w| w / self.measure[x])
    }

    /// Copy with every edge weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(LabError::Domain(format!("scale factor {factor} must be positive")));
        }
        let g = Self::from_edges(
            self.vertex_count,
            self.edges.iter().map(|&(u, v, w)| (u, v, w * factor)),
        )?;
        g.with_labels(self.labels.iter().cloned())
    }

    fn is_connected(&self) -> bool {
        self.distance_field(0, None).reached() == self.vertex_count
    }

    /// Breadth-first distances from `source`, exploring every vertex at
    /// distance `<= max_radius` (everything when `None`).
    pub fn distance_field(&self, source: usize, max_radius: Option<usize>) -> DistanceField {
        let limit = max_radius.unwrap_or(usize::MAX);
        let mut dist = vec![usize::MAX; self.vertex_count];
        let mut order = Vec::new();
        let mut queue = VecDeque::new();
        dist[source] = 0;
        queue.push_back(source);
        let mut exhausted = true;
        while let Some(x) = queue.pop_front() {
            order.push(x);
            let dx = dist[x];
            if dx == limit {
                if self.neighbor_ids(x).iter().any(|&y| dist[y] == usize::MAX) {
                    exhausted = false;
                }
                continue;
            }
            for &y in self.neighbor_ids(x) {
                if dist[y] == usize::MAX {
                    dist[y] = dx + 1;
                    queue.push_back(y);
                }
            }
        }
        let eccentricity = order.last().map_or(0, |&v| dist[v]);
        let computed_radius = if exhausted { eccentricity } else { limit };
        DistanceField {
            source,
            dist,
            order,
            computed_radius,
            exhausted,
        }
    }

    /// Graph distance `d(x, y)`.
    pub fn distance(&self, x: usize, y: usize) -> Result<usize> {
        self.check_vertex(x)?;
        self.check_vertex(y)?;
        Ok(self.distance_field(x, None).dist[y])
    }

    pub fn eccentricity(&self, x: usize) -> usize {
        self.distance_field(x, None).eccentricity()
    }

    /// Largest radius `R` for which `B(x, R)` coincides with the ball of the
    /// infinite graph this graph truncates: the distance to the nearest
    /// frontier vertex, or the eccentricity when there is no frontier.
    pub fn safe_radius(&self, x: usize) -> Result<usize> {
        self.check_vertex(x)?;
        let cached = self.safe_radii.get_or_init(|| {
            let frontier = self.frontier();
            if frontier.is_empty() {
                return None;
            }
            let mut dist = vec![usize::MAX; self.vertex_count];
            let mut queue = VecDeque::new();
            for f in frontier {
                dist[f] = 0;
                queue.push_back(f);
            }
            while let Some(v) = queue.pop_front() {
                for &y in self.neighbor_ids(v) {
                    if dist[y] == usize::MAX {
                        dist[y] = dist[v] + 1;
                        queue.push_back(y);
                    }
                }
            }
            Some(dist)
        });
        Ok(match cached {
            Some(d) => d[x],
            None => self.eccentricity(x),
        })
    }

    /// Fails with a truncation error unless `radius <= safe_radius(x)`.
    pub fn check_radius(&self, x: usize, radius: usize) -> Result<()> {
        let safe = self.safe_radius(x)?;
        if radius > safe {
            return Err(LabError::Truncation {
                vertex: x,
                radius,
                safe,
            });
        }
        Ok(())
    }

    /// Open ball `B(x, R) = {y : d(x, y) < R}`.
    pub fn ball(&self, x: usize, radius: usize) -> Result<VertexSet> {
        self.check_vertex(x)?;
        if radius == 0 {
            return Err(LabError::Domain("ball radius must be at least 1".into()));
        }
        self.check_radius(x, radius)?;
        let field = self.distance_field(x, Some(radius));
        Ok(VertexSet::from_members(self, field.ball_members(radius)))
    }

    /// `V(x, R) = mu(B(x, R))`.
    pub fn volume(&self, x: usize, radius: usize) -> Result<f64> {
        Ok(self.ball(x, radius)?.measure())
    }

    /// `v(x, r, R) = V(x, R) - V(x, r)`; `V(x, 0) = 0`.
    pub fn annulus_volume(&self, x: usize, inner: usize, outer: usize) -> Result<f64> {
        if inner > outer {
            return Err(LabError::Domain(format!(
                "annulus inner radius {inner} exceeds outer radius {outer}"
            )));
        }
        if inner == outer {
            self.check_vertex(x)?;
            self.check_radius(x, outer)?;
            return Ok(0.0);
        }
        let big = self.volume(x, outer)?;
        let small = if inner == 0 { 0.0 } else { self.volume(x, inner)? };
        Ok(big - small)
    }

    /// External boundary `dA = closure(A) \ A`.
    pub fn boundary(&self, set: &VertexSet) -> Boundary {
        let mut mark = vec![false; self.vertex_count];
        let mut members = Vec::new();
        for &x in set.members() {
            for &y in self.neighbor_ids(x) {
                if !set.contains(y) && !mark[y] {
                    mark[y] = true;
                    members.push(y);
                }
            }
        }
        members.sort_unstable();
        Boundary {
            boundary: VertexSet::from_members(self, members),
            covers_graph: set.len() == self.vertex_count,
        }
    }

    /// `A` together with its external boundary.
    pub fn closure(&self, set: &VertexSet) -> VertexSet {
        let boundary = self.boundary(set);
        VertexSet::from_members(
            self,
            set.members()
                .iter()
                .chain(boundary.boundary.members())
                .copied(),
        )
    }

    /// Largest `p0` with `mu_xy / mu(x) >= p0` for every oriented edge.
    pub fn p0_constant(&self) -> f64 {
        self.edges
            .iter()
            .map(|&(u, v, w)| (w / self.measure[u]).min(w / self.measure[v]))
            .fold(1.0, f64::min)
    }

    pub fn max_degree(&self) -> usize {
        (0..self.vertex_count).map(|x| self.degree(x)).max().unwrap_or(0)
    }

    /// Serialises to the `hkgraph v1` text format.
    pub fn to_hkgraph(&self) -> String {
        io::write_hkgraph(self)
    }
}

/// Breadth-first distances from a single source.
#[derive(Debug, Clone)]
pub struct DistanceField {
    source: usize,
    dist: Vec<usize>,
    order: Vec<usize>,
    computed_radius: usize,
    exhausted: bool,
}

impl DistanceField {
    pub fn source(&self) -> usize {
        self.source
    }

    /// `d(source, y)`, or `None` when `y` lies beyond the explored region.
    pub fn get(&self, y: usize) -> Option<usize> {
        self.dist.get(y).copied().filter(|&d| d != usize::MAX)
    }

    pub fn distances(&self) -> &[usize] {
        &self.dist
    }

    /// Explored vertices in non-decreasing distance order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn reached(&self) -> usize {
        self.order.len()
    }

    /// Largest `R` such that every vertex with `d <= R` has been explored.
    pub fn computed_radius(&self) -> usize {
        self.computed_radius
    }

    pub fn is_exhaustive(&self) -> bool {
        self.exhausted
    }

    pub fn eccentricity(&self) -> usize {
        self.order.last().map_or(0, |&v| self.dist[v])
    }

    /// Members of the open ball of the given radius, sorted by vertex id.
    pub fn ball_members(&self, radius: usize) -> Vec<usize> {
        let mut members: Vec<usize> = self
            .order
            .iter()
            .copied()
            .take_while(|&v| self.dist[v] < radius)
            .collect();
        members.sort_unstable();
        members
    }

    /// Vertices at distance exactly `radius`.
    pub fn sphere(&self, radius: usize) -> Vec<usize> {
        let mut members: Vec<usize> = self
            .order
            .iter()
            .copied()
            .filter(|&v| self.dist[v] == radius)
            .collect();
        members.sort_unstable();
        members
    }
}

/// Set of vertices with cached measure `mu(A)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexSet {
    members: Vec<usize>,
    mask: Vec<bool>,
    measure: f64,
}

impl VertexSet {
    pub fn from_members<I: IntoIterator<Item = usize>>(g: &WeightedGraph, members: I) -> Self {
        let mut mask = vec![false; g.vertex_count()];
        let mut list: Vec<usize> = members
            .into_iter()
            .filter(|&v| v < mask.len() && !std::mem::replace(&mut mask[v], true))
            .collect();
        list.sort_unstable();
        let measure = list.iter().map(|&v| g.measure(v)).sum();
        Self {
            members: list,
            mask,
            measure,
        }
    }

    pub fn empty(g: &WeightedGraph) -> Self {
        Self::from_members(g, std::iter::empty())
    }

    pub fn singleton(g: &WeightedGraph, x: usize) -> Self {
        Self::from_members(g, [x])
    }

    /// Sorted members.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn contains(&self, x: usize) -> bool {
        self.mask.get(x).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// `mu(A)`.
    pub fn measure(&self) -> f64 {
        self.measure
    }
}

/// Result of [`WeightedGraph::boundary`].
#[derive(Debug, Clone)]
pub struct Boundary {
    pub boundary: VertexSet,
    /// Set when `A` is the whole (finite) vertex set, so the boundary is
    /// necessarily empty.
    pub covers_graph: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> WeightedGraph {
        WeightedGraph::from_edges(n, (0..n - 1).map(|i| (i, i + 1, 1.0))).unwrap()
    }

    /// Path graph standing in for Z^1 with frontier labels at both ends.
    fn line(half: usize) -> WeightedGraph {
        let n = 2 * half + 1;
        path(n)
            .with_labels([(0, FRONTIER_LABEL), (n - 1, FRONTIER_LABEL)])
            .unwrap()
    }

    #[test]
    fn rejects_invalid_edges() {
        assert!(WeightedGraph::from_edges(2, [(0, 0, 1.0)]).is_err());
        assert!(WeightedGraph::from_edges(2, [(0, 1, 0.0)]).is_err());
        assert!(WeightedGraph::from_edges(2, [(0, 1, -1.0)]).is_err());
        assert!(WeightedGraph::from_edges(2, [(0, 1, 1.0), (1, 0, 2.0)]).is_err());
        assert!(WeightedGraph::from_edges(3, [(0, 1, 1.0)]).is_err());
        assert!(WeightedGraph::from_edges(2, [(0, 2, 1.0)]).is_err());
    }

    #[test]
    fn measure_is_sum_of_incident_weights() {
        let g = WeightedGraph::from_edges(3, [(0, 1, 2.0), (1, 2, 0.5)]).unwrap();
        assert_eq!(g.measure(0), 2.0);
        assert_eq!(g.measure(1), 2.5);
        assert_eq!(g.measure(2), 0.5);
        assert_eq!(g.transition(1, 0), 0.8);
    }

    #[test]
    fn open_balls_on_the_line() {
        let g = line(10);
        let x = 10;
        let b1 = g.ball(x, 1).unwrap();
        assert_eq!(b1.members(), &[x]);
        assert_eq!(b1.measure(), 2.0);
        let b2 = g.ball(x, 2).unwrap();
        assert_eq!(b2.members(), &[x - 1, x, x + 1]);
        assert_eq!(b2.measure(), 6.0);
        for r in 1..=10 {
            assert_eq!(g.volume(x, r).unwrap(), (4 * r - 2) as f64);
        }
        assert!(matches!(g.ball(x, 11), Err(LabError::Truncation { .. })));
        assert!(matches!(g.ball(99, 1), Err(LabError::UnknownVertex(99))));
        assert!(g.ball(x, 0).is_err());
    }

    #[test]
    fn annulus_volumes() {
        let g = line(20);
        let x = 20;
        assert_eq!(g.annulus_volume(x, 4, 4).unwrap(), 0.0);
        for r0 in 1..=5 {
            assert_eq!(g.annulus_volume(x, r0, 2 * r0).unwrap(), (4 * r0) as f64);
        }
        assert!(g.annulus_volume(x, 5, 4).is_err());
    }

    #[test]
    fn boundary_of_points_and_balls() {
        let g = line(10);
        let x = 10;
        let single = VertexSet::singleton(&g, x);
        assert_eq!(g.boundary(&single).boundary.members(), &[x - 1, x + 1]);
        let ball = g.ball(x, 4).unwrap();
        assert_eq!(g.boundary(&ball).boundary.members(), &[x - 4, x + 4]);
        let all = VertexSet::from_members(&g, 0..g.vertex_count());
        let b = g.boundary(&all);
        assert!(b.covers_graph && b.boundary.is_empty());
        assert_eq!(g.closure(&single).members(), &[x - 1, x, x + 1]);
    }

    #[test]
    fn p0_values() {
        assert_eq!(line(5).p0_constant(), 0.5);
        let edge = WeightedGraph::from_edges(2, [(0, 1, 1.0)]).unwrap();
        assert_eq!(edge.p0_constant(), 1.0);
    }

    #[test]
    fn safe_radius_without_frontier_is_eccentricity() {
        let g = path(7);
        assert_eq!(g.safe_radius(0).unwrap(), 6);
        assert_eq!(g.safe_radius(3).unwrap(), 3);
        // the largest admissible ball still leaves a vertex outside
        assert_eq!(g.ball(3, 3).unwrap().len(), 5);
    }

    #[test]
    fn distance_field_radius_bookkeeping() {
        let g = path(10);
        let f = g.distance_field(0, Some(3));
        assert_eq!(f.computed_radius(), 3);
        assert!(!f.is_exhaustive());
        assert_eq!(f.get(3), Some(3));
        assert_eq!(f.get(4), None);
        let full = g.distance_field(0, None);
        assert!(full.is_exhaustive());
        assert_eq!(full.computed_radius(), 9);
        assert_eq!(full.sphere(2), vec![2]);
    }

    #[test]
    fn scaling_multiplies_measure() {
        let g = line(3).scaled(7.0).unwrap();
        assert_eq!(g.measure(3), 14.0);
        assert_eq!(g.transition(3, 2), 0.5);
        assert_eq!(g.frontier(), vec![0, 6]);
    }
}
