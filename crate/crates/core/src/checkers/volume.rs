use rayon::prelude::*;

use super::report::{Cell, Check, ReportBuilder};
use super::{pooled_fit, CheckContext, ConditionReport};
use crate::error::Result;

const DOUBLING: &str = "V(x,2R)/V(x,R)";
const COMPARISON: &str = "V(x,2R)/V(y,R)";
const ANTI_DOUBLING: &str = "A_V";
const ANNULUS: &str = "(V(x,2R)-V(x,R))/V(x,R)";

/// Volume doubling `D_V`, comparison `C_V`, anti-doubling `A_V`, annulus
/// comparability and the volume exponent `alpha`.
pub fn check_volume_doubling(ctx: &CheckContext<'_>) -> Result<ConditionReport> {
    let g = ctx.graph;
    let cfg = &ctx.config;
    let cells = ctx
        .grid
        .cells()
        .into_par_iter()
        .map(|(x, r)| {
            let v = g.volume(x, r)?;
            let v2 = g.volume(x, 2 * r)?;
            let ball = g.ball(x, r)?;
            let ys = ctx.subsample(ball.members(), cfg.comparison_cap, 1, x, r, x);
            let min_vy = ys
                .iter()
                .map(|&y| g.volume(y, r))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            let safe = g.safe_radius(x)?;
            let anti = std::iter::successors(Some(2usize), |a| Some(a * 2))
                .take_while(|a| a * r <= safe)
                .map(|a| g.volume(x, a * r).map(|va| (a, va)))
                .find(|res| res.as_ref().map_or(true, |&(_, va)| va >= 2.0 * v))
                .transpose()?;
            let anti = match anti {
                Some((a, _)) => Cell::new(x, r, ANTI_DOUBLING, a as f64),
                None => Cell::flagged(x, r, ANTI_DOUBLING, "not reached within safe radius"),
            };
            Ok(vec![
                Cell::new(x, r, DOUBLING, v2 / v),
                Cell::new(x, r, COMPARISON, v2 / min_vy),
                anti,
                Cell::new(x, r, ANNULUS, (v2 - v) / v),
            ])
        })
        .collect::<Result<Vec<_>>>()?;

    let series = ctx
        .grid
        .centers
        .par_iter()
        .map(|&x| {
            ctx.grid
                .fit_radii(x)
                .into_iter()
                .map(|r| g.volume(x, r).map(|v| (r, v)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .concat();

    let t = &cfg.thresholds;
    let mut b = ReportBuilder::new("volume_doubling", DOUBLING);
    b.cells(cells.into_iter().flatten());
    let fit = pooled_fit(&series);
    b.fit(fit);
    let (d_v, c_v, a_v) = (b.max_of(DOUBLING), b.max_of(COMPARISON), b.max_of(ANTI_DOUBLING));
    let annulus = (b.min_of(ANNULUS), b.max_of(ANNULUS));
    b.constant("D_V", d_v);
    b.constant("C_V", c_v);
    b.constant("A_V", a_v);
    b.constant("annulus_min", annulus.0);
    b.constant("annulus_max", annulus.1);
    b.constant("alpha", fit.map(|f| f.0));
    b.check(Check::at_most("D_V", d_v, t.doubling));
    b.check(Check::at_most("C_V", c_v, t.volume_comparison));
    b.check(Check::at_most("A_V", a_v, t.volume_anti_doubling));
    b.check(Check::at_least("annulus_min", annulus.0, t.annulus_volume_min));
    Ok(ctx.finish(b))
}
