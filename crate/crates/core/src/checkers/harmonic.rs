use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{Cell, Check, ReportBuilder};
use super::{CheckContext, ConditionReport};
use crate::domain::KilledDomain;
use crate::error::Result;
use crate::graph::VertexSet;
use crate::potential::GreenOperator;
use crate::walk::{HeatEvolution, HeatMode};

const MEAN_VALUE: &str = "u(x)V(x,R)/sum_B u mu";
const MEAN_VALUE_GREEN: &str = "g(x,w)V(x,R)/sum_B g(.,w) mu";
const HARNACK: &str = "max_B u/min_B u";
const PARABOLIC: &str = "max_U- u/min_U+ u~";
const MAX_PRINCIPLE: &str = "max_principle_violations";
const MAX_PRINCIPLE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HarnackMode {
    Elliptic,
    Parabolic,
}

/// Nonnegative harmonic functions on `B` with boundary data drawn as one-hot
/// vectors on `dB` (the extreme rays of the cone, capped) and `trials`
/// uniform random vectors. Each is returned in the domain's member order,
/// with the number of solutions that leave the range of their data.
fn harmonic_family<'g>(
    ctx: &CheckContext<'g>,
    set: VertexSet,
    tag: u64,
    x: usize,
    r: usize,
) -> Result<(KilledDomain<'g>, Vec<Vec<f64>>, usize)> {
    let g = ctx.graph;
    let boundary = g.boundary(&set).boundary;
    let domain = KilledDomain::new(g, set)?;
    let solver = domain.solver(0.0, ctx.config.solver);
    let extremes = ctx.subsample(boundary.members(), ctx.config.extreme_cap, tag, x, r, usize::MAX);
    let mut data: Vec<Vec<(usize, f64)>> = extremes.iter().map(|&b| vec![(b, 1.0)]).collect();
    let mut rng = ctx.rng(tag + 100, x, r);
    for _ in 0..ctx.config.trials {
        data.push(
            boundary
                .members()
                .iter()
                .map(|&b| (b, rng.random::<f64>()))
                .collect(),
        );
    }
    let family = data
        .iter()
        .map(|h| {
            let load = domain.boundary_load(|y| {
                h.binary_search_by_key(&y, |p| p.0).map_or(0.0, |i| h[i].1)
            });
            solver.solve(&load)
        })
        .collect::<Result<Vec<_>>>()?;
    let violations = data
        .iter()
        .zip(&family)
        .filter(|(h, u)| {
            // one-hot data are zero on the rest of the boundary
            let floor = if h.len() < boundary.len() { 0.0 } else { f64::INFINITY };
            let lo = h.iter().map(|p| p.1).fold(floor, f64::min);
            let hi = h.iter().map(|p| p.1).fold(0.0, f64::max);
            let slack = MAX_PRINCIPLE_SLACK * hi;
            u.iter().any(|&v| v < lo - slack || v > hi + slack)
        })
        .count();
    Ok((domain, family, violations))
}

/// Mean value inequality for harmonic functions on `B(x,R)` and for Green
/// kernels `g^{B(x,2R)}(., w)` with `w` outside `B(x,R)`.
pub fn check_mean_value(ctx: &CheckContext<'_>) -> Result<ConditionReport> {
    let g = ctx.graph;
    let cells = ctx
        .grid
        .cells()
        .into_par_iter()
        .map(|(x, r)| {
            let ball = g.ball(x, r)?;
            let volume = ball.measure();
            let (domain, family, violations) = harmonic_family(ctx, ball.clone(), 3, x, r)?;
            let measures = domain.local_measures();
            let ix = domain.local_index(x).expect("centre lies in its ball");
            let mv = family
                .iter()
                .map(|u| {
                    let mass: f64 = u.iter().zip(&measures).map(|(a, m)| a * m).sum();
                    u[ix] * volume / mass
                })
                .fold(0.0, f64::max);

            let big = g.ball(x, 2 * r)?;
            let green = GreenOperator::new(g, big.clone(), ctx.config.solver)?;
            let outer: Vec<usize> = big
                .members()
                .iter()
                .copied()
                .filter(|&w| !ball.contains(w))
                .collect();
            let ws = ctx.subsample(&outer, ctx.config.trials.max(1), 4, x, r, usize::MAX);
            let mut mvg = 0.0f64;
            for &w in &ws {
                let gx = green.kernel(w, x)?;
                let mass: f64 = ball
                    .members()
                    .iter()
                    .map(|&y| green.kernel(w, y).map(|v| v * g.measure(y)))
                    .sum::<Result<f64>>()?;
                mvg = mvg.max(gx * volume / mass);
            }
            let mut out = vec![Cell::new(x, r, MEAN_VALUE, mv)];
            out.push(if ws.is_empty() {
                Cell::flagged(x, r, MEAN_VALUE_GREEN, "no pole outside B(x,R)")
            } else {
                Cell::new(x, r, MEAN_VALUE_GREEN, mvg)
            });
            out.push(Cell::new(x, r, MAX_PRINCIPLE, violations as f64));
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let t = &ctx.config.thresholds;
    let mut b = ReportBuilder::new("mean_value", MEAN_VALUE);
    b.cells(cells.into_iter().flatten());
    let (mv, mvg) = (b.max_of(MEAN_VALUE), b.max_of(MEAN_VALUE_GREEN));
    b.constant("C_MV", mv);
    b.constant("C_MVG", mvg);
    b.check(Check::at_most("C_MV", mv, t.mean_value));
    b.check(Check::at_most("C_MVG", mvg, t.mean_value_green));
    max_principle(&mut b);
    Ok(ctx.finish(b))
}

/// Total count of harmonic solves that left the range of their boundary data.
fn max_principle(b: &mut ReportBuilder) {
    let total = b.sum_of(MAX_PRINCIPLE);
    b.constant(MAX_PRINCIPLE, Some(total));
    b.check(Check::at_most(MAX_PRINCIPLE, Some(total), 0.0));
}

/// Elliptic or parabolic Harnack inequality.
pub fn check_harnack(ctx: &CheckContext<'_>, mode: HarnackMode) -> Result<ConditionReport> {
    match mode {
        HarnackMode::Elliptic => elliptic(ctx),
        HarnackMode::Parabolic => parabolic(ctx),
    }
}

/// `max_{B(x,R)} u / min_{B(x,R)} u` over nonnegative harmonic `u` on
/// `B(x,2R)`. The ratio of two linear functionals is maximal on an extreme
/// ray, so the one-hot data give the worst case when none are dropped.
fn elliptic(ctx: &CheckContext<'_>) -> Result<ConditionReport> {
    let g = ctx.graph;
    let cells = ctx
        .grid
        .cells()
        .into_par_iter()
        .map(|(x, r)| {
            let inner = g.ball(x, r)?;
            let (domain, family, violations) = harmonic_family(ctx, g.ball(x, 2 * r)?, 5, x, r)?;
            let idx: Vec<usize> = inner
                .members()
                .iter()
                .map(|&y| domain.local_index(y).expect("inner ball is inside"))
                .collect();
            let worst = family
                .iter()
                .map(|u| {
                    let hi = idx.iter().map(|&i| u[i]).fold(0.0, f64::max);
                    let lo = idx.iter().map(|&i| u[i]).fold(f64::INFINITY, f64::min);
                    hi / lo
                })
                .fold(1.0, f64::max);
            Ok([
                Cell::new(x, r, HARNACK, worst),
                Cell::new(x, r, MAX_PRINCIPLE, violations as f64),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut b = ReportBuilder::new("harnack_elliptic", HARNACK);
    b.cells(cells.into_iter().flatten());
    let c = b.max_of(HARNACK);
    b.constant("C_H", c);
    b.check(Check::at_most("C_H", c, ctx.config.thresholds.harnack));
    max_principle(&mut b);
    Ok(ctx.finish(b))
}

/// Killed solutions `u_n(y) = p^B_n(y, w)` on `B = B(x,R)`, compared over
/// the cylinders of the profile; `u~_n = u_n + u_{n+1}` on the later one.
fn parabolic(ctx: &CheckContext<'_>) -> Result<ConditionReport> {
    let g = ctx.graph;
    let profile = ctx.config.profile;
    let scaled = |c: f64, r: usize| ((c * r as f64).round() as usize).max(1);
    let r_top = ctx.grid.radii.iter().copied().max().unwrap_or(1);
    let f = ctx.scale_function(scaled(profile.c[3], r_top))?;
    let cells = ctx
        .grid
        .cells()
        .into_par_iter()
        .map(|(x, r)| {
            let t: Vec<Option<u64>> = profile
                .c
                .iter()
                .map(|&c| f.value(scaled(c, r)).ok().map(|v| v.ceil() as u64))
                .collect();
            let [Some(t1), Some(t2), Some(t3), Some(t4)] = t[..] else {
                return Ok(Cell::flagged(x, r, PARABOLIC, "scale function not tabulated at c4 R"));
            };
            if t4 > ctx.config.horizon {
                return Ok(Cell::flagged(x, r, PARABOLIC, "beyond horizon"));
            }
            let ball = g.ball(x, r)?;
            let field = g.distance_field(x, Some(r));
            let core: Vec<usize> = ball
                .members()
                .iter()
                .copied()
                .filter(|&y| (field.get(y).unwrap_or(usize::MAX) as f64) < profile.eta * r as f64)
                .collect();
            let sources = ctx.subsample(ball.members(), ctx.config.extreme_cap, 6, x, r, x);
            let mut worst = 0.0f64;
            for &w in &sources {
                let mut heat = HeatEvolution::new(g, w, &HeatMode::Killed(ball.clone()))?;
                let mut early = 0.0f64;
                let mut late = f64::INFINITY;
                let mut previous: Option<Vec<f64>> = None;
                while heat.step() as u64 <= t4 + 1 {
                    let n = heat.step() as u64;
                    let row: Vec<f64> = core
                        .iter()
                        .map(|&y| heat.distribution()[y] / g.measure(y))
                        .collect();
                    if (t1..=t2).contains(&n) {
                        early = early.max(row.iter().copied().fold(0.0, f64::max));
                    }
                    if let Some(prev) = &previous {
                        if (t3..=t4).contains(&(n - 1)) {
                            let m = prev
                                .iter()
                                .zip(&row)
                                .map(|(a, b)| a + b)
                                .fold(f64::INFINITY, f64::min);
                            late = late.min(m);
                        }
                    }
                    previous = Some(row);
                    heat.advance();
                }
                if early > 0.0 {
                    worst = worst.max(early / late);
                }
            }
            if worst > 0.0 {
                Ok(Cell::new(x, r, PARABOLIC, worst))
            } else {
                // u vanishes on the early cylinder: the inequality is trivial
                Ok(Cell::flagged(x, r, PARABOLIC, "solutions vanish on U-"))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut b = ReportBuilder::new("harnack_parabolic", PARABOLIC);
    b.cells(cells);
    let c = b.max_of(PARABOLIC);
    b.constant("C_H", c);
    b.check(Check::at_most("C_H", c, ctx.config.thresholds.parabolic_harnack));
    Ok(ctx.finish(b))
}
