use rayon::prelude::*;

use super::report::{Cell, Check, ReportBuilder};
use super::{CheckContext, ConditionReport};
use crate::error::Result;
use crate::potential::{resolvent_kernels, GreenOperator};
use crate::walk::ScaleFunction;

const GREEN_EXIT: &str = "g(y,x)V(x,d)/E(x,R)";
const GREEN_UPPER: &str = "g(y,x)/sum_i 1/V(x,f(i))";

fn resolvent_quantity(m: usize) -> String {
    format!("g_(lambda,{m})(x,x)lambda^{m}V(x,e(x,1/lambda))")
}

/// `sum_{i = ceil F(d)}^{floor C' F(R)} 1 / V(x, f(i))`, grouping the `i`
/// that share `f(i) = s`, i.e. `F(s-1) < i <= F(s)`.
fn level_sum(
    ctx: &CheckContext<'_>,
    f: &ScaleFunction,
    x: usize,
    d: usize,
    r: usize,
) -> Result<Option<f64>> {
    let lo = f.value(d)?.ceil();
    let hi = (ctx.config.green_spread * f.value(r)?).floor();
    let mut total = 0.0;
    let mut s = d;
    while s <= f.r_max() {
        let below = if s == 1 { 0.0 } else { f.value(s - 1)?.floor() };
        let first = (below + 1.0).max(lo);
        let last = f.value(s)?.floor().min(hi);
        if last >= first {
            let v = match ctx.graph.volume(x, s) {
                Ok(v) => v,
                Err(_) => return Ok(None),
            };
            total += (last - first + 1.0) / v;
        }
        if f.value(s)? >= hi {
            return Ok(Some(total));
        }
        s += 1;
    }
    Ok(None)
}

/// Green kernel bounds by exit time over volume and by the scale function
/// sum, plus the measured resolvent constants.
pub fn check_green_bounds(ctx: &CheckContext<'_>) -> Result<ConditionReport> {
    let g = ctx.graph;
    let cfg = &ctx.config;
    let r_top = ctx.grid.safe_radii.iter().copied().max().unwrap_or(1);
    let f = ctx.scale_function(r_top)?;
    let cells = ctx
        .grid
        .cells()
        .into_par_iter()
        .map(|(x, r)| {
            let ball = g.ball(x, r)?;
            let green = GreenOperator::new(g, ball.clone(), cfg.solver)?;
            let e = ctx.times.get(x, r)?;
            let field = g.distance_field(x, Some(r));
            let others: Vec<usize> = ball.members().iter().copied().filter(|&y| y != x).collect();
            let ys = ctx.subsample(&others, cfg.comparison_cap, 8, x, r, usize::MAX);
            let mut exit_bound: Option<f64> = None;
            let mut upper: Option<f64> = None;
            let mut upper_flag = None;
            for &y in &ys {
                let d = field.get(y).expect("ball member is within reach");
                let gyx = green.kernel(x, y)?;
                let c = gyx * g.volume(x, d)? / e;
                exit_bound = Some(exit_bound.map_or(c, |m| m.max(c)));
                match level_sum(ctx, &f, x, d, r)? {
                    Some(sum) if sum > 0.0 => {
                        let c = gyx / sum;
                        upper = Some(upper.map_or(c, |m| m.max(c)));
                    }
                    _ => upper_flag = Some("scale function range exceeded"),
                }
            }
            let mut out = Vec::new();
            out.push(match exit_bound {
                Some(c) => Cell::new(x, r, GREEN_EXIT, c),
                None => Cell::flagged(x, r, GREEN_EXIT, "d = 0 only"),
            });
            out.push(match (upper, upper_flag) {
                (Some(c), None) => Cell::new(x, r, GREEN_UPPER, c),
                (_, Some(flag)) => Cell::flagged(x, r, GREEN_UPPER, flag),
                (None, None) => Cell::flagged(x, r, GREEN_UPPER, "d = 0 only"),
            });
            // resolvent on the largest admissible ball, lambda = 1 / E(x,R)
            if e > 1.0 && !cfg.resolvent_powers.is_empty() {
                let lambda = 1.0 / e;
                let m_max = cfg.resolvent_powers.iter().copied().max().unwrap_or(1);
                let domain = g.ball(x, g.safe_radius(x)?)?;
                let values = resolvent_kernels(g, domain, lambda, m_max, x)?;
                let v = g.volume(x, r)?;
                for &m in &cfg.resolvent_powers {
                    if m >= 1 {
                        let c = values[m - 1] * lambda.powi(m as i32) * v;
                        out.push(Cell::new(x, r, &resolvent_quantity(m), c));
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let t = &cfg.thresholds;
    let mut b = ReportBuilder::new("green_bounds", GREEN_EXIT);
    b.cells(cells.into_iter().flatten());
    let (c_exit, c_upper) = (b.max_of(GREEN_EXIT), b.max_of(GREEN_UPPER));
    b.constant("C_g01", c_exit);
    b.constant("C_UBG", c_upper);
    for &m in &cfg.resolvent_powers {
        b.constant(&format!("C_resolvent(m={m})"), b.max_of(&resolvent_quantity(m)));
    }
    b.check(Check::at_most("C_g01", c_exit, t.green_exit));
    b.check(Check::at_most("C_UBG", c_upper, t.green_upper));
    Ok(ctx.finish(b))
}
