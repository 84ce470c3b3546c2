use rand::Rng;
use rayon::prelude::*;

use super::report::{Cell, Check, ReportBuilder};
use super::time::exit_series;
use super::{pooled_fit, CheckContext, ConditionReport};
use crate::error::Result;
use crate::walk::{local_k, mc_exit_time, subgaussian_k, HeatEvolution, HeatMode, McConfig};

const DIAGONAL: &str = "p_n(x,x)V(x,e(x,n))";
const OFF_DIAGONAL: &str = "log(p~_n(x,y)V(x,e(x,n))/(2C))";
const TAIL: &str = "P(T_{x,R}<n)";
const LOCAL_K: &str = "k_(n,x,R)";

/// Probabilities below this carry no information for the exponential fits.
const FIT_FLOOR: f64 = 1e-12;
const UNDERFLOW: f64 = 1e-300;

struct OffDiagonal {
    x: usize,
    d: usize,
    n: u64,
    log_ratio: f64,
}

/// Diagonal upper and lower bounds, the off-diagonal sub-Gaussian upper
/// bound in its `E` and `F` forms, and exit time tails against the local
/// kernel function.
pub fn check_kernel_bounds(ctx: &CheckContext<'_>) -> Result<ConditionReport> {
    let g = ctx.graph;
    let cfg = &ctx.config;
    let times = &ctx.times;

    // Heat kernels along the free walk from each centre.
    let per_center = ctx
        .grid
        .centers
        .par_iter()
        .map(|&x| {
            let safe = g.safe_radius(x)?;
            let reach = times.get(x, safe)?;
            let last = cfg.horizon.min(reach.floor() as u64);
            let points: Vec<u64> = ctx.grid.time_points(last);
            let mut diag_times: Vec<u64> = points.iter().map(|&n| n.div_ceil(2) * 2).filter(|&n| n <= last).collect();
            diag_times.dedup();
            let mut rng = ctx.rng(7, x, 0);
            let field = g.distance_field(x, Some(safe));
            let targets: Vec<(usize, usize)> = std::iter::successors(Some(1usize), |d| Some(d * 2))
                .take_while(|&d| d <= safe)
                .filter_map(|d| {
                    let sphere = field.sphere(d);
                    (!sphere.is_empty()).then(|| (sphere[rng.random_range(0..sphere.len())], d))
                })
                .collect();
            let mut heat = HeatEvolution::new(g, x, &HeatMode::Free)?;
            let mut diag = Vec::new();
            let mut off = Vec::new();
            let end = points.last().copied().unwrap_or(0).max(diag_times.last().copied().unwrap_or(0)) + 1;
            let mut previous: Vec<f64> = Vec::new();
            while heat.step() as u64 <= end {
                let n = heat.step() as u64;
                let dist = heat.distribution();
                if diag_times.contains(&n) {
                    diag.push((n, dist[x] / g.measure(x)));
                }
                if n >= 1 && points.contains(&(n - 1)) {
                    for (i, &(y, d)) in targets.iter().enumerate() {
                        let p_tilde = previous[i] + dist[y] / g.measure(y);
                        off.push((y, d, n - 1, p_tilde));
                    }
                }
                previous = targets.iter().map(|&(y, _)| dist[y] / g.measure(y)).collect();
                heat.advance();
            }
            let diag = diag
                .into_iter()
                .map(|(n, p)| {
                    let e = times.inverse(x, n as f64)?;
                    let v = g.volume(x, e)?;
                    Ok(if p < UNDERFLOW {
                        Cell::flagged(x, e, DIAGONAL, "underflow").at_time(n)
                    } else {
                        Cell::new(x, e, DIAGONAL, p * v).at_time(n)
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let off = off
                .into_iter()
                .map(|(y, d, n, p)| {
                    let e = times.inverse(x, n as f64)?;
                    Ok((y, d, n, p, g.volume(x, e)?))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((x, diag, off))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut b = ReportBuilder::new("kernel_bounds", DIAGONAL);
    for (_, diag, _) in &per_center {
        b.cells(diag.iter().cloned());
    }
    let c_due = b.max_of(DIAGONAL);
    let c_dle = b.min_of(DIAGONAL);

    // Off-diagonal decay against (E(x,d)/n)^(1/(beta-1)) and k(n,d).
    let beta = pooled_fit(&exit_series(ctx)?).map(|f| f.0);
    let r_top = ctx.grid.safe_radii.iter().copied().max().unwrap_or(1);
    let f = ctx.scale_function(r_top)?;
    let mut samples = Vec::new();
    if let Some(c) = c_due {
        for (x, _, off) in &per_center {
            for &(y, d, n, p, v) in off {
                if p / 2.0 > FIT_FLOOR {
                    let log_ratio = (p / 2.0 * v / c).ln();
                    samples.push(OffDiagonal { x: *x, d, n, log_ratio });
                    b.cells([Cell::new(*x, d, OFF_DIAGONAL, log_ratio).at_time(n).with_target(y)]);
                }
            }
        }
    }
    let mut ue = (Vec::new(), Vec::new());
    let mut uef = (Vec::new(), Vec::new());
    for s in &samples {
        if let Some(beta) = beta.filter(|&b| b > 1.0) {
            let e = times.get(s.x, s.d)?;
            ue.0.push((e / s.n as f64).powf(1.0 / (beta - 1.0)));
            ue.1.push(s.log_ratio);
        }
        if s.d <= f.r_max() {
            uef.0.push(subgaussian_k(&f, s.n as f64, s.d)? as f64);
            uef.1.push(s.log_ratio);
        }
    }
    let c_ue = decay_rate_through_origin(&ue.0, &ue.1);
    let c_uef = decay_rate_through_origin(&uef.0, &uef.1);

    // Exit tails from the killed walk, P(T < n) = sum_{k <= n-2} P(T = k+1).
    let tails = ctx
        .grid
        .cells()
        .into_par_iter()
        .map(|(x, r)| {
            let ball = g.ball(x, r)?;
            let last = cfg.horizon;
            let points: Vec<u64> = ctx.grid.time_points(last);
            let leak: Vec<f64> = ball
                .members()
                .iter()
                .map(|&y| {
                    g.neighbors(y)
                        .filter(|&(z, _)| !ball.contains(z))
                        .map(|(_, w)| w)
                        .sum::<f64>()
                        / g.measure(y)
                })
                .collect();
            let mut heat = HeatEvolution::new(g, x, &HeatMode::Killed(ball.clone()))?;
            let mut exited = 0.0;
            let mut out = Vec::new();
            let end = points.last().copied().unwrap_or(0);
            loop {
                let n = heat.step() as u64 + 1;
                // `exited` is P(T <= n - 1) = P(T < n) here
                if points.contains(&n) {
                    out.push((n, exited));
                }
                if n > end {
                    break;
                }
                let dist = heat.distribution();
                exited += ball
                    .members()
                    .iter()
                    .zip(&leak)
                    .map(|(&y, l)| dist[y] * l)
                    .sum::<f64>();
                heat.advance();
            }
            let mc = if cfg.mc_walks > 0 {
                let config = McConfig::new(cfg.mc_walks, cfg.seed).with_tail_grid(points.clone());
                Some(mc_exit_time(g, x, r, &config)?)
            } else {
                None
            };
            let mut cells = Vec::new();
            let mut mc_error = 0.0f64;
            for (i, &(n, p)) in out.iter().enumerate() {
                cells.push(Cell::new(x, r, TAIL, p).at_time(n));
                if let Some(est) = &mc {
                    mc_error = mc_error.max((est.tail[i].1 - p).abs());
                }
                if p > FIT_FLOOR {
                    let k = local_k(times, n as f64, x, r)?;
                    cells.push(Cell::new(x, r, LOCAL_K, k as f64).at_time(n));
                }
            }
            Ok((cells, mc.map(|_| mc_error)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut mc_error: Option<f64> = None;
    let mut lt = (Vec::new(), Vec::new());
    for (cells, err) in tails {
        if let Some(e) = err {
            mc_error = Some(mc_error.map_or(e, |m: f64| m.max(e)));
        }
        for c in &cells {
            if c.quantity == LOCAL_K {
                let p = cells
                    .iter()
                    .find(|t| t.quantity == TAIL && t.n == c.n)
                    .and_then(|t| t.value)
                    .unwrap_or(0.0);
                if c.value.unwrap_or(0.0) >= 1.0 {
                    lt.0.push(c.value.unwrap_or(0.0));
                    lt.1.push(p.ln());
                }
            }
        }
        b.cells(cells);
    }
    let c_lt = decay_rate_with_intercept(&lt.0, &lt.1);

    let t = &cfg.thresholds;
    b.constant("C_DUE", c_due);
    b.constant("c_DLE", c_dle);
    b.constant("beta", beta);
    b.constant("c_UE", c_ue);
    b.constant("c_UEF", c_uef);
    b.constant("c_LT", c_lt);
    b.constant("LT_mc_max_abs_error", mc_error);
    b.check(Check::at_most("C_DUE", c_due, t.diagonal_upper));
    b.check(Check::at_least("c_DLE", c_dle, t.diagonal_lower));
    for (name, c) in [("c_UE", c_ue), ("c_UEF", c_uef), ("c_LT", c_lt)] {
        if c.is_some() {
            b.check(Check::at_least(name, c, 0.0));
        }
    }
    Ok(ctx.finish(b))
}

/// `c` minimising `sum (y + c t)^2`.
fn decay_rate_through_origin(t: &[f64], y: &[f64]) -> Option<f64> {
    let tt: f64 = t.iter().map(|v| v * v).sum();
    (t.len() >= 2 && tt > 0.0).then(|| -t.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / tt)
}

/// `c` from the least-squares line `y = a - c t`.
fn decay_rate_with_intercept(t: &[f64], y: &[f64]) -> Option<f64> {
    if t.len() < 3 {
        return None;
    }
    let n = t.len() as f64;
    let mt = t.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let stt: f64 = t.iter().map(|v| (v - mt).powi(2)).sum();
    let sty: f64 = t.iter().zip(y).map(|(a, b)| (a - mt) * (b - my)).sum();
    (stt > 0.0).then(|| -sty / stt)
}
