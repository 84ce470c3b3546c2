//! Electric-network quantities: energy, resistance, Green functions of the
//! killed walk, the smallest Dirichlet eigenvalue, harmonic extensions and
//! resolvents.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use crate::domain::KilledDomain;
use crate::error::{LabError, Result};
use crate::graph::{VertexSet, WeightedGraph};
use crate::linalg::{LocalSolver, SolverPolicy};

/// `E(f, f) = 1/2 sum_{x,y} mu_xy (f(x) - f(y))^2`, i.e. the sum over edges.
pub fn dirichlet_energy(g: &WeightedGraph, f: &[f64]) -> Result<f64> {
    if f.len() != g.vertex_count() {
        return Err(LabError::Domain(format!(
            "function has {} values for {} vertices",
            f.len(),
            g.vertex_count()
        )));
    }
    Ok(g.edges()
        .iter()
        .map(|&(u, v, w)| w * (f[u] - f[v]).powi(2))
        .sum())
}

/// Minimiser of the energy over `{f = 1 on A, f = 0 on B}`.
#[derive(Debug, Clone)]
pub struct Resistance {
    /// `rho(A, B)`; infinite when no edge path joins `A` to `B`.
    pub value: f64,
    /// `E(f*, f*)`.
    pub energy: f64,
    /// `f*` on every vertex.
    pub potential: Vec<f64>,
}

impl Resistance {
    pub fn is_infinite(&self) -> bool {
        self.value.is_infinite()
    }
}

/// `rho(A, B)` for disjoint nonempty `A` and `B`.
pub fn effective_resistance(
    g: &WeightedGraph,
    a: &VertexSet,
    b: &VertexSet,
) -> Result<Resistance> {
    effective_resistance_with(g, a, b, SolverPolicy::default())
}

pub fn effective_resistance_with(
    g: &WeightedGraph,
    a: &VertexSet,
    b: &VertexSet,
    policy: SolverPolicy,
) -> Result<Resistance> {
    if a.is_empty() || b.is_empty() {
        return Err(LabError::Domain("resistance needs nonempty sets".into()));
    }
    if a.members().iter().any(|&v| b.contains(v)) {
        return Err(LabError::Domain("resistance sets overlap".into()));
    }
    let mut potential: Vec<f64> = (0..g.vertex_count())
        .map(|v| if a.contains(v) { 1.0 } else { 0.0 })
        .collect();
    let free = VertexSet::from_members(
        g,
        (0..g.vertex_count()).filter(|&v| !a.contains(v) && !b.contains(v)),
    );
    if !free.is_empty() {
        // g is connected, so every free component touches A or B and the
        // Dirichlet system is nonsingular
        let domain = KilledDomain::new(g, free)?;
        let load = domain.boundary_load(|y| if a.contains(y) { 1.0 } else { 0.0 });
        let solution = domain.solver(0.0, policy).solve(&load)?;
        for (&v, u) in domain.members().iter().zip(solution) {
            potential[v] = u;
        }
    }
    let energy = dirichlet_energy(g, &potential)?;
    let value = if energy > 0.0 { 1.0 / energy } else { f64::INFINITY };
    Ok(Resistance {
        value,
        energy,
        potential,
    })
}

/// `rho(x, S, R)`: resistance between `{d(x, .) <= S}` and `{d(x, .) >= R}`.
pub fn annulus_resistance(g: &WeightedGraph, x: usize, inner: usize, outer: usize) -> Result<f64> {
    if inner >= outer {
        return Err(LabError::Domain(format!(
            "annulus needs S < R, got S = {inner}, R = {outer}"
        )));
    }
    g.check_radius(x, outer)?;
    let field = g.distance_field(x, None);
    let a = VertexSet::from_members(g, field.ball_members(inner + 1));
    let b = VertexSet::from_members(
        g,
        (0..g.vertex_count()).filter(|&v| field.get(v).is_none_or(|d| d >= outer)),
    );
    Ok(effective_resistance(g, &a, &b)?.value)
}

/// Green function of the walk killed on leaving `B`. Rows are solved on
/// first use and then shared.
#[derive(Debug)]
pub struct GreenOperator<'g> {
    graph: &'g WeightedGraph,
    domain: KilledDomain<'g>,
    solver: LocalSolver,
    rows: Vec<OnceLock<Vec<f64>>>,
}

pub fn green_operator<'g>(g: &'g WeightedGraph, set: VertexSet) -> Result<GreenOperator<'g>> {
    GreenOperator::new(g, set, SolverPolicy::default())
}

impl<'g> GreenOperator<'g> {
    pub fn new(g: &'g WeightedGraph, set: VertexSet, policy: SolverPolicy) -> Result<Self> {
        let domain = KilledDomain::new(g, set)?;
        let solver = domain.solver(0.0, policy);
        let rows = (0..domain.len()).map(|_| OnceLock::new()).collect();
        Ok(Self {
            graph: g,
            domain,
            solver,
            rows,
        })
    }

    pub fn domain(&self) -> &VertexSet {
        self.domain.set()
    }

    fn local(&self, v: usize) -> Result<usize> {
        self.domain
            .local_index(v)
            .ok_or_else(|| LabError::Domain(format!("vertex {v} is outside the Green domain")))
    }

    /// `g^B(y, .)` in the domain's member order.
    pub fn kernel_row(&self, y: usize) -> Result<&[f64]> {
        let i = self.local(y)?;
        if let Some(row) = self.rows[i].get() {
            return Ok(row);
        }
        let mut rhs = vec![0.0; self.domain.len()];
        rhs[i] = 1.0;
        let row = self.solver.solve(&rhs)?;
        Ok(self.rows[i].get_or_init(|| row))
    }

    /// `g^B(y, z) = G^B(y, z) / mu(z)`; zero when `z` is outside `B`.
    pub fn kernel(&self, y: usize, z: usize) -> Result<f64> {
        let row = self.kernel_row(y)?;
        Ok(self.domain.local_index(z).map_or(0.0, |j| row[j]))
    }

    /// `G^B(y, z)`, the expected number of visits to `z` before exit.
    pub fn green(&self, y: usize, z: usize) -> Result<f64> {
        Ok(self.kernel(y, z)? * self.graph.measure(z))
    }

    /// `sum_z G^B(y, z) = E_y(T_B)`.
    pub fn row_sum(&self, y: usize) -> Result<f64> {
        let row = self.kernel_row(y)?;
        Ok(row
            .iter()
            .zip(self.domain.members())
            .map(|(g, &z)| g * self.graph.measure(z))
            .sum())
    }
}

/// Smallest eigenvalue of `I - P^B` on `c_0(B)`, by inverse iteration in the
/// `mu`-weighted inner product.
pub fn smallest_eigenvalue(g: &WeightedGraph, set: VertexSet) -> Result<f64> {
    smallest_eigenvalue_with(g, set, SolverPolicy::default())
}

pub const EIGEN_TOLERANCE: f64 = 1e-9;
pub const EIGEN_MAX_ITERATIONS: usize = 20_000;

pub fn smallest_eigenvalue_with(
    g: &WeightedGraph,
    set: VertexSet,
    policy: SolverPolicy,
) -> Result<f64> {
    let domain = KilledDomain::new(g, set)?;
    let d = domain.local_measures();
    let solver = domain.solver(0.0, policy);
    let k = solver.matrix();
    let rayleigh = |phi: &[f64]| {
        let mut kphi = vec![0.0; phi.len()];
        k.mul(phi, &mut kphi);
        let num: f64 = phi.iter().zip(&kphi).map(|(a, b)| a * b).sum();
        let den: f64 = phi.iter().zip(&d).map(|(a, m)| a * a * m).sum();
        (num / den, kphi)
    };
    let mut phi = vec![1.0; d.len()];
    let (mut lambda, _) = rayleigh(&phi);
    for _ in 0..EIGEN_MAX_ITERATIONS {
        let rhs: Vec<f64> = phi.iter().zip(&d).map(|(p, m)| p * m).collect();
        phi = solver.solve(&rhs)?;
        let norm = phi.iter().zip(&d).map(|(p, m)| p * p * m).sum::<f64>().sqrt();
        phi.iter_mut().for_each(|p| *p /= norm);
        let (next, kphi) = rayleigh(&phi);
        // generalised residual |K phi - lambda D phi|_{D^-1} for unit phi
        let residual = kphi
            .iter()
            .zip(&phi)
            .zip(&d)
            .map(|((kp, p), m)| (kp - next * m * p).powi(2) / m)
            .sum::<f64>()
            .sqrt();
        let settled = (next - lambda).abs() <= 1e-3 * EIGEN_TOLERANCE * next;
        lambda = next;
        if settled || residual <= 1e-3 * EIGEN_TOLERANCE * next {
            return Ok(lambda);
        }
    }
    Err(LabError::Numerical {
        message: format!("inverse iteration did not settle in {EIGEN_MAX_ITERATIONS} steps"),
        residual: f64::NAN,
    })
}

/// Solution of `Pu = u` on `A` with prescribed values on the boundary.
#[derive(Debug, Clone)]
pub struct DirichletProblem {
    domain: VertexSet,
    boundary: BTreeMap<usize, f64>,
    solution: Vec<f64>,
    residual: f64,
}

impl DirichletProblem {
    pub fn domain(&self) -> &VertexSet {
        &self.domain
    }

    pub fn boundary_data(&self) -> &BTreeMap<usize, f64> {
        &self.boundary
    }

    /// Solution values in the domain's member order.
    pub fn solution(&self) -> &[f64] {
        &self.solution
    }

    /// `u(z)` for `z` in the closure of `A`.
    pub fn value(&self, z: usize) -> Option<f64> {
        match self.domain.members().binary_search(&z) {
            Ok(i) => Some(self.solution[i]),
            Err(_) => self.boundary.get(&z).copied(),
        }
    }

    /// `max_{x in A} |Pu(x) - u(x)|`.
    pub fn residual(&self) -> f64 {
        self.residual
    }
}

/// Harmonic extension of `data` (given on the whole of `dA`) into `A`.
pub fn harmonic_extension(
    g: &WeightedGraph,
    set: VertexSet,
    data: &BTreeMap<usize, f64>,
) -> Result<DirichletProblem> {
    let boundary = g.boundary(&set).boundary;
    let mut h = BTreeMap::new();
    for &y in boundary.members() {
        let value = *data
            .get(&y)
            .ok_or_else(|| LabError::Domain(format!("missing boundary value at vertex {y}")))?;
        if !(value >= 0.0 && value.is_finite()) {
            return Err(LabError::Domain(format!(
                "boundary value {value} at vertex {y} is not a nonnegative real"
            )));
        }
        h.insert(y, value);
    }
    let domain = KilledDomain::new(g, set)?;
    let load = domain.boundary_load(|y| h[&y]);
    let solution = domain.solver(0.0, SolverPolicy::default()).solve(&load)?;
    let residual = domain
        .members()
        .iter()
        .zip(&solution)
        .map(|(&z, &u)| {
            let pu: f64 = g
                .neighbors(z)
                .map(|(y, w)| {
                    w * domain
                        .local_index(y)
                        .map_or_else(|| h[&y], |j| solution[j])
                })
                .sum::<f64>()
                / g.measure(z);
            (pu - u).abs()
        })
        .fold(0.0, f64::max);
    Ok(DirichletProblem {
        domain: domain.set().clone(),
        boundary: h,
        solution,
        residual,
    })
}

/// `g_{lambda, m}(x, x)` for `m = 1..=m_max`, where
/// `G_{lambda, m} = ((lambda + 1) I - P^B)^{-m}`.
pub fn resolvent_kernels(
    g: &WeightedGraph,
    set: VertexSet,
    lambda: f64,
    m_max: usize,
    x: usize,
) -> Result<Vec<f64>> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(LabError::Domain(format!(
            "resolvent parameter must lie in (0, 1), got {lambda}"
        )));
    }
    if m_max == 0 {
        return Err(LabError::Domain("resolvent power must be positive".into()));
    }
    let domain = KilledDomain::new(g, set)?;
    let i = domain
        .local_index(x)
        .ok_or_else(|| LabError::Domain(format!("vertex {x} is outside the resolvent domain")))?;
    let d = domain.local_measures();
    let solver = domain.solver(lambda, SolverPolicy::default());
    let mut v = vec![0.0; d.len()];
    v[i] = 1.0;
    let mut out = Vec::with_capacity(m_max);
    for _ in 0..m_max {
        let rhs: Vec<f64> = v.iter().zip(&d).map(|(a, m)| a * m).collect();
        v = solver.solve(&rhs)?;
        out.push(v[i] / g.measure(x));
    }
    Ok(out)
}

/// `g_{lambda, m}(x, x)`.
pub fn resolvent_kernel(
    g: &WeightedGraph,
    set: VertexSet,
    lambda: f64,
    m: usize,
    x: usize,
) -> Result<f64> {
    Ok(*resolvent_kernels(g, set, lambda, m, x)?
        .last()
        .expect("m >= 1 yields one value"))
}
