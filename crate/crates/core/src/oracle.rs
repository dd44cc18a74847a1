//! Brute-force social optimum and price of anarchy.
//!
//! Welfare is `sum_i S_i`. At a fixed window the optimum over rates is
//! found by golden-section search over a common rate for symmetric users
//! and by multi-start coordinate ascent otherwise; the window is scanned
//! coarsely and then refined around the best coarse point.

use serde::{Deserialize, Serialize};

use crate::mac_game::EquilibriumReport;
use crate::numeric::grid_golden_max;
use crate::rate_game::{rate_equilibrium, GameContext};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    pub w_min: u32,
    /// Largest window probed; the scan also stops once no larger window
    /// can beat the best welfare found.
    pub w_max: u32,
    /// Coarse window step; the best coarse point is refined with step 1.
    pub w_step: u32,
    /// Grid nodes per one-dimensional rate search.
    pub rate_points: usize,
    pub starts: usize,
    /// Relative welfare improvement below which coordinate ascent stops.
    pub ascent_tol: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { w_min: 4, w_max: 2000, w_step: 1, rate_points: 40, starts: 5, ascent_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimumReport {
    pub w_opt: u32,
    pub rates_opt: Vec<f64>,
    pub welfare_opt: f64,
    /// `(W, best welfare at W)` for every probed window.
    pub probes: Vec<(u32, f64)>,
    pub starts: usize,
    /// Coordinate-ascent sweeps summed over windows and starts.
    pub iterations: usize,
}

/// Best welfare over rates at the context's own windows, with the sweeps used.
pub fn optimal_rates(ctx: &GameContext, opts: &OracleOptions) -> Result<(Vec<f64>, f64, usize)> {
    if ctx.is_symmetric() {
        let (r, w) = symmetric_optimum(ctx, opts)?;
        return Ok((vec![r; ctx.len()], w, 1));
    }
    coordinate_ascent(ctx, opts)
}

fn symmetric_optimum(ctx: &GameContext, opts: &OracleOptions) -> Result<(f64, f64)> {
    let n = ctx.len();
    let w = *ctx.users[0].window();
    let welfare = |r: f64| ctx.welfare(&vec![r; n]).unwrap_or(f64::NEG_INFINITY);
    let (r, v) = grid_golden_max(welfare, w.r_min, w.r_max, opts.rate_points, true, 1e-9 * w.r_max);
    if !v.is_finite() {
        return Err(Error::Degenerate("welfare undefined across the rate window".into()));
    }
    Ok((r, v))
}

fn coordinate_ascent(ctx: &GameContext, opts: &OracleOptions) -> Result<(Vec<f64>, f64, usize)> {
    let peaks: Vec<f64> = ctx.users.iter().map(|u| u.channel.max_goodput().0).collect();
    let mut starts: Vec<Vec<f64>> = vec![peaks.clone()];
    if let Ok(ne) = rate_equilibrium(ctx, 1e-6 * ctx.largest_r_max()) {
        starts.push(ne.rates);
    }
    for f in [0.5, 0.75, 1.25, 0.3, 1.5] {
        let s: Vec<f64> =
            ctx.users.iter().zip(&peaks).map(|(u, &p)| (p * f).clamp(u.window().r_min, u.window().r_max)).collect();
        starts.push(s);
    }
    starts.truncate(opts.starts.max(1));

    // One global sweep per start; only the best start is polished further.
    let mut sweeps = 0;
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in starts {
        let mut rates = start;
        let mut value = ctx.welfare(&rates)?;
        sweep(ctx, &mut rates, &mut value, opts, true);
        sweeps += 1;
        if best.as_ref().is_none_or(|b| value > b.1) {
            best = Some((rates, value));
        }
    }
    let (mut rates, mut value) = best.expect("at least one start");
    for _ in 0..MAX_POLISH_SWEEPS {
        let before = value;
        sweep(ctx, &mut rates, &mut value, opts, false);
        sweeps += 1;
        if value - before <= opts.ascent_tol * value {
            break;
        }
    }
    Ok((rates, value, sweeps))
}

const MAX_POLISH_SWEEPS: usize = 200;

/// One pass of per-user line searches, over the whole window when `global`
/// and within a factor of two of the current rate otherwise.
fn sweep(ctx: &GameContext, rates: &mut [f64], value: &mut f64, opts: &OracleOptions, global: bool) {
    for i in 0..rates.len() {
        let w = *ctx.users[i].window();
        let f = |r: f64| {
            let mut t = rates.to_vec();
            t[i] = r;
            ctx.welfare(&t).unwrap_or(f64::NEG_INFINITY)
        };
        let (r, v) = if global {
            grid_golden_max(f, w.r_min, w.r_max, opts.rate_points, true, 1e-7 * w.r_max)
        } else {
            let lo = (rates[i] / 2.0).max(w.r_min);
            let hi = (rates[i] * 2.0).min(w.r_max);
            grid_golden_max(f, lo, hi, 5, true, 1e-7 * rates[i])
        };
        if v > *value {
            rates[i] = r;
            *value = v;
        }
    }
}

/// Upper bound on welfare at window `w` for any users: at most
/// `G_max b / (b + kappa (1 - b))` with `b = 1 - (1 - 2/(w+1))^n`.
pub fn welfare_ceiling(ctx: &GameContext, w: u32) -> f64 {
    let g_max = ctx.users.iter().map(|u| u.channel.max_goodput().1).fold(0.0, f64::max);
    let x = 2.0 / (w as f64 + 1.0);
    let idle = (ctx.len() as f64 * (-x).ln_1p()).exp();
    let busy = 1.0 - idle;
    g_max * busy / (busy + ctx.timing.kappa() * idle)
}

/// Social optimum over windows in `[w_min, w_max]` and rates.
pub fn social_optimum(ctx: &GameContext, opts: &OracleOptions) -> Result<OptimumReport> {
    if opts.w_min < 4 || opts.w_max < opts.w_min {
        return Err(Error::Precondition(format!("window range [{}, {}] invalid", opts.w_min, opts.w_max)));
    }
    let mut probes: Vec<(u32, f64)> = Vec::new();
    let mut best: Option<(u32, Vec<f64>, f64)> = None;
    let mut iterations = 0;
    let mut probe = |w: u32, best: &mut Option<(u32, Vec<f64>, f64)>, probes: &mut Vec<(u32, f64)>| -> Result<()> {
        if probes.iter().any(|p| p.0 == w) {
            return Ok(());
        }
        let (rates, value, sweeps) = optimal_rates(&ctx.with_common_cw(w)?, opts)?;
        iterations += sweeps;
        probes.push((w, value));
        // ties go to the smaller window
        let better = match best {
            None => true,
            Some((bw, _, bv)) => value > *bv || (value == *bv && w < *bw),
        };
        if better {
            *best = Some((w, rates, value));
        }
        Ok(())
    };

    let step = opts.w_step.max(1);
    let mut w = opts.w_min;
    while w <= opts.w_max {
        if let Some((_, _, v)) = &best {
            if welfare_ceiling(ctx, w) < *v {
                break;
            }
        }
        probe(w, &mut best, &mut probes)?;
        w += step;
    }
    if step > 1 {
        let center = best.as_ref().map(|b| b.0).unwrap_or(opts.w_min);
        let lo = center.saturating_sub(step - 1).max(opts.w_min);
        let hi = (center + step - 1).min(opts.w_max);
        for w in lo..=hi {
            probe(w, &mut best, &mut probes)?;
        }
    }
    probes.sort_by_key(|p| p.0);
    let (w_opt, rates_opt, welfare_opt) = best.ok_or_else(|| Error::Degenerate("no window probed".into()))?;
    Ok(OptimumReport { w_opt, rates_opt, welfare_opt, probes, starts: opts.starts, iterations })
}

/// Optimal welfare over equilibrium welfare at the refined equilibrium.
/// The optimum is re-probed at the equilibrium window so the ratio never
/// drops below one through a coarse scan.
pub fn price_of_anarchy(
    ctx: &GameContext,
    eq: &EquilibriumReport,
    opt: &OptimumReport,
    opts: &OracleOptions,
) -> Result<f64> {
    if !(eq.welfare > 0.0) {
        return Err(Error::Degenerate(format!("equilibrium welfare is {}", eq.welfare)));
    }
    let mut best = opt.welfare_opt;
    if eq.w_star >= 4 {
        best = best.max(optimal_rates(&ctx.with_common_cw(eq.w_star)?, opts)?.1);
    }
    Ok(best / eq.welfare)
}

/// Rate-game price of anarchy at the context's own windows: optimal
/// welfare over rates divided by welfare at the rate equilibrium.
pub fn rate_game_poa(ctx: &GameContext, opts: &OracleOptions) -> Result<f64> {
    let ne = rate_equilibrium(ctx, 1e-6 * ctx.largest_r_max())?;
    let at_ne = ctx.welfare(&ne.rates)?;
    if !(at_ne > 0.0) {
        return Err(Error::Degenerate(format!("equilibrium welfare is {at_ne}")));
    }
    let (_, opt, _) = optimal_rates(ctx, opts)?;
    Ok(opt.max(at_ne) / at_ne)
}
