use std::collections::BTreeMap;

use rayon::prelude::*;

use super::report::{Cell, Check, ReportBuilder};
use super::{CheckContext, ConditionReport};
use crate::error::Result;
use crate::potential::annulus_resistance;

const RATIO: &str = "E(x,2R)/(rho(x,R,2R)v(x,R,2R))";
const PRODUCT: &str = "rho(x,R,2R)v(x,R,2R)";

/// The Einstein relation `E(x,2R) ~ rho(x,R,2R) v(x,R,2R)`, the cross-centre
/// spread of `rho v`, and violations of `rho v >= R^2`.
pub fn check_einstein(ctx: &CheckContext<'_>) -> Result<ConditionReport> {
    let g = ctx.graph;
    let solved = ctx
        .grid
        .cells()
        .into_par_iter()
        .map(|(x, r)| {
            let rho = annulus_resistance(g, x, r, 2 * r)?;
            let v = g.annulus_volume(x, r, 2 * r)?;
            let e2 = ctx.times.get(x, 2 * r)?;
            Ok((x, r, rho * v, e2))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut per_radius: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    let mut violations = 0usize;
    let mut b = ReportBuilder::new("einstein", RATIO);
    for &(x, r, rv, e2) in &solved {
        let band = per_radius.entry(r).or_insert((f64::INFINITY, 0.0));
        band.0 = band.0.min(rv);
        band.1 = band.1.max(rv);
        if rv < (r * r) as f64 * (1.0 - 1e-9) {
            violations += 1;
        }
        b.cells([Cell::new(x, r, RATIO, e2 / rv), Cell::new(x, r, PRODUCT, rv)]);
    }
    let spread = match (b.max_of(RATIO), b.min_of(RATIO)) {
        (Some(hi), Some(lo)) => Some(hi / lo),
        _ => None,
    };
    let cross = per_radius
        .values()
        .map(|&(lo, hi)| hi / lo)
        .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |a| a.max(s))));
    b.constant("ratio_max", b.max_of(RATIO));
    b.constant("ratio_min", b.min_of(RATIO));
    b.constant("ratio_spread", spread);
    b.constant("rho_v_cross_center_spread", cross);
    b.constant("rho_v_violations", Some(violations as f64));
    b.check(Check::at_most("ratio_spread", spread, ctx.config.thresholds.einstein_spread));
    b.check(Check::at_most("rho_v_violations", Some(violations as f64), 0.0));
    Ok(ctx.finish(b))
}
