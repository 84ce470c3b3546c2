use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{reaches, ExitTimes};
use crate::error::{LabError, Result};
use crate::graph::WeightedGraph;

/// Tabulated `F(R) = min_x E(x, R)` for `R = 1..=r_max`, the minimum taken
/// over the sample centres whose safe radius admits `R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleFunction {
    values: Vec<f64>,
    centers: Vec<usize>,
}

impl ScaleFunction {
    /// Builds a table directly; `values[i]` is `F(i + 1)`.
    pub fn from_table(values: Vec<f64>, centers: Vec<usize>) -> Result<Self> {
        if values.is_empty() {
            return Err(LabError::Domain("scale function table is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(LabError::Domain(
                "scale function values must be positive and finite".into(),
            ));
        }
        Ok(Self { values, centers })
    }

    pub fn r_max(&self) -> usize {
        self.values.len()
    }

    pub fn centers(&self) -> &[usize] {
        &self.centers
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `F(R)` for `1 <= R <= r_max`.
    pub fn value(&self, radius: usize) -> Result<f64> {
        if radius == 0 || radius > self.r_max() {
            return Err(LabError::Domain(format!(
                "F({radius}) is outside the tabulated range 1..={}",
                self.r_max()
            )));
        }
        Ok(self.values[radius - 1])
    }

    /// `f(n) = min{R : F(R) >= n}`, or `None` when `n > F(r_max)`.
    pub fn inverse(&self, n: f64) -> Option<usize> {
        let i = self.values.partition_point(|&v| !reaches(v, n));
        (i < self.values.len()).then_some(i + 1)
    }

    /// CSV table with header `R,F(R)`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("R,F(R)\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, v));
        }
        out
    }
}

/// Computes `F` on `1..=r_max` from a centre sample.
pub fn scale_function(g: &WeightedGraph, centers: &[usize], r_max: usize) -> Result<ScaleFunction> {
    scale_function_with(&ExitTimes::new(g), centers, r_max)
}

/// As [`scale_function`], reusing the exit times cached in `times`.
pub fn scale_function_with(
    times: &ExitTimes<'_>,
    centers: &[usize],
    r_max: usize,
) -> Result<ScaleFunction> {
    if centers.is_empty() {
        return Err(LabError::Domain("scale function needs at least one center".into()));
    }
    if r_max == 0 {
        return Err(LabError::Domain("scale function needs R_max >= 1".into()));
    }
    let g = times.graph();
    let mut sorted = centers.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let safe = sorted
        .iter()
        .map(|&x| g.safe_radius(x))
        .collect::<Result<Vec<_>>>()?;
    let best = safe.iter().copied().max().unwrap_or(0);
    if best < r_max {
        let x = sorted[safe.iter().position(|&s| s == best).unwrap_or(0)];
        return Err(LabError::Truncation {
            vertex: x,
            radius: r_max,
            safe: best,
        });
    }
    let pairs: Vec<(usize, usize)> = (1..=r_max)
        .flat_map(|r| {
            sorted
                .iter()
                .zip(&safe)
                .filter(move |&(_, &s)| s >= r)
                .map(move |(&x, _)| (x, r))
        })
        .collect();
    let solved = pairs
        .par_iter()
        .map(|&(x, r)| times.get(x, r).map(|e| (r, e)))
        .collect::<Result<Vec<_>>>()?;
    let mut values = vec![f64::INFINITY; r_max];
    for (r, e) in solved {
        values[r - 1] = values[r - 1].min(e);
    }
    ScaleFunction::from_table(values, sorted)
}

/// The kernel function `k(n, R)`: the largest `k >= 1` with
/// `n / k <= F(floor(R / k))`, or 0 when there is none.
pub fn subgaussian_k(f: &ScaleFunction, n: f64, radius: usize) -> Result<usize> {
    if radius == 0 {
        return Err(LabError::Domain("subgaussian_k needs R >= 1".into()));
    }
    if radius > f.r_max() {
        return Err(LabError::Domain(format!(
            "subgaussian_k needs F up to R = {radius}, table ends at {}",
            f.r_max()
        )));
    }
    let mut k = radius;
    while k >= 1 {
        let q = radius / k;
        if reaches(f.values[q - 1], n / k as f64) {
            return Ok(k);
        }
        k = radius / (q + 1);
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{lattice_zd, stretched_vicsek};

    fn squares(r_max: usize) -> ScaleFunction {
        ScaleFunction::from_table((1..=r_max).map(|r| (r * r) as f64).collect(), vec![0]).unwrap()
    }

    fn brute_force_k(f: &ScaleFunction, n: f64, r: usize) -> usize {
        (1..=r)
            .rev()
            .find(|&k| n / k as f64 <= f.value(r / k).unwrap() * (1.0 + 1e-12))
            .unwrap_or(0)
    }

    #[test]
    fn line_scale_function_is_r_squared() {
        let g = lattice_zd(1, 25).unwrap();
        let f = scale_function(&g, &(0..g.vertex_count()).collect::<Vec<_>>(), 12).unwrap();
        for r in 1..=12 {
            assert!((f.value(r).unwrap() - (r * r) as f64).abs() < 1e-8);
        }
        for n in 1..=144u32 {
            assert_eq!(f.inverse(n as f64), Some((n as f64).sqrt().ceil() as usize));
        }
        assert_eq!(f.inverse(1e6), None);
        assert!(f.to_csv().starts_with("R,F(R)\n1,1\n2,4\n"));
    }

    #[test]
    fn kernel_function_examples() {
        let f = squares(200);
        // k = 2 and k = 4 both satisfy 16/k <= floor(8/k)^2; the maximum is 4
        assert_eq!(subgaussian_k(&f, 16.0, 8).unwrap(), 4);
        assert!(16.0 / 3.0 > f.value(8 / 3).unwrap());
        assert_eq!(subgaussian_k(&f, 1e9, 8).unwrap(), 0);
        for r in 1..=50 {
            assert!(subgaussian_k(&f, (r * r) as f64, r).unwrap() >= 1);
        }
        assert!(subgaussian_k(&f, 1.0, 201).is_err());
    }

    #[test]
    fn block_scan_matches_brute_force() {
        let f = squares(120);
        for r in 1..=120 {
            for n in 1..=400 {
                let n = n as f64 * 3.7;
                assert_eq!(subgaussian_k(&f, n, r).unwrap(), brute_force_k(&f, n, r));
            }
        }
    }

    #[test]
    fn stretched_minimum_is_below_root_exit_time() {
        let g = stretched_vicsek(2).unwrap();
        let z0 = g.vertex_by_label("z0").unwrap();
        let centers: Vec<usize> = (0..g.vertex_count()).step_by(7).chain([z0]).collect();
        let f = scale_function(&g, &centers, 8).unwrap();
        let times = ExitTimes::new(&g);
        for r in 1..=8 {
            assert!(f.value(r).unwrap() <= times.get(z0, r).unwrap() + 1e-9);
        }
        let single = scale_function(&g, &[z0], 8).unwrap();
        for r in 1..=8 {
            assert_eq!(single.value(r).unwrap(), times.get(z0, r).unwrap());
        }
    }
}
