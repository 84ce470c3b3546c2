use std::collections::BTreeMap;

use rayon::prelude::*;

use super::report::{Cell, Check, ReportBuilder};
use super::{pooled_fit, CheckContext, ConditionReport};
use crate::error::Result;

const DOUBLING: &str = "E(x,2R)/E(x,R)";
const COMPARISON: &str = "E(x,2R)/E(y,R)";
const ANTI_DOUBLING: &str = "A_E";
const UNIFORM: &str = "E(x,R)/min_y E(y,R)";

/// Time doubling `D_T`, time comparison `C_T`, anti-doubling `A_E`, the
/// exit time exponent `beta` and the lower doubling exponent `beta'`.
pub fn check_time_conditions(ctx: &CheckContext<'_>) -> Result<ConditionReport> {
    let g = ctx.graph;
    let cfg = &ctx.config;
    let times = &ctx.times;
    let cells = ctx
        .grid
        .cells()
        .into_par_iter()
        .map(|(x, r)| {
            let e = times.get(x, r)?;
            let e2 = times.get(x, 2 * r)?;
            let ball = g.ball(x, r)?;
            let ys = ctx.subsample(ball.members(), cfg.comparison_cap, 2, x, r, x);
            let min_ey = ys
                .iter()
                .map(|&y| times.get(y, r))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            let safe = g.safe_radius(x)?;
            let mut anti = Cell::flagged(x, r, ANTI_DOUBLING, "not reached within safe radius");
            let mut a = 2;
            while a * r <= safe {
                if times.get(x, a * r)? >= 2.0 * e {
                    anti = Cell::new(x, r, ANTI_DOUBLING, a as f64);
                    break;
                }
                a *= 2;
            }
            Ok(vec![
                Cell::new(x, r, DOUBLING, e2 / e),
                Cell::new(x, r, COMPARISON, e2 / min_ey),
                anti,
            ])
        })
        .collect::<Result<Vec<_>>>()?;

    let series = exit_series(ctx)?;
    let t = &cfg.thresholds;
    let mut b = ReportBuilder::new("time_conditions", DOUBLING);
    b.cells(cells.into_iter().flatten());
    let fit = pooled_fit(&series);
    b.fit(fit);
    let d_t = b.max_of(DOUBLING);
    let c_t = b.max_of(COMPARISON);
    // local dyadic slopes log2(E(x,2R)/E(x,R)) bound beta' from below
    let beta_lower = b.min_of(DOUBLING).map(f64::log2);
    let beta_upper = d_t.map(f64::log2);
    b.constant("D_T", d_t);
    b.constant("C_T", c_t);
    b.constant("A_E", b.max_of(ANTI_DOUBLING));
    b.constant("beta", fit.map(|f| f.0));
    b.constant("beta_prime", beta_lower);
    b.constant("beta_upper", beta_upper);
    b.check(Check::at_most("D_T", d_t, t.time_doubling));
    b.check(Check::at_most("C_T", c_t, t.time_comparison));
    b.check(Check::at_least("beta", fit.map(|f| f.0), t.beta_min));
    Ok(ctx.finish(b))
}

/// `(R, E(x, R))` over the fit radii of every centre.
pub(crate) fn exit_series(ctx: &CheckContext<'_>) -> Result<Vec<(usize, f64)>> {
    Ok(ctx
        .grid
        .centers
        .par_iter()
        .map(|&x| {
            ctx.grid
                .fit_radii(x)
                .into_iter()
                .map(|r| ctx.times.get(x, r).map(|e| (r, e)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .concat())
}

/// Uniformity of exit times across centres: `C_0 = max_R max_x E(x,R) /
/// min_x E(x,R)`, over centres admitting each radius.
pub fn check_uniform_exit(ctx: &CheckContext<'_>) -> Result<ConditionReport> {
    let solved = ctx
        .grid
        .cells()
        .into_par_iter()
        .map(|(x, r)| ctx.times.get(x, r).map(|e| (x, r, e)))
        .collect::<Result<Vec<_>>>()?;
    let mut floor: BTreeMap<usize, f64> = BTreeMap::new();
    let mut ceiling: BTreeMap<usize, f64> = BTreeMap::new();
    for &(_, r, e) in &solved {
        let lo = floor.entry(r).or_insert(f64::INFINITY);
        *lo = lo.min(e);
        let hi = ceiling.entry(r).or_insert(0.0);
        *hi = hi.max(e);
    }
    let mut b = ReportBuilder::new("uniform_exit", UNIFORM);
    b.cells(
        solved
            .iter()
            .map(|&(x, r, e)| Cell::new(x, r, UNIFORM, e / floor[&r])),
    );
    let c0 = b.max_of(UNIFORM);
    for (r, lo) in &floor {
        b.constant(&format!("C_0(R={r})"), Some(ceiling[r] / lo));
    }
    b.constant("C_0", c0);
    b.check(Check::at_most("C_0", c0, ctx.config.thresholds.uniform_exit));
    Ok(ctx.finish(b))
}
