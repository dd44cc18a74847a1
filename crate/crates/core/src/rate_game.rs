//! The rate-adaptation game played at a fixed contention-window profile.
//!
//! User `i` picks `R_i` in its window to maximize its throughput `S_i`. The
//! sign of `dS_i/dR_i` is carried by the score `A_i`; the best response is
//! `r_min` when `A_i(r_min) <= 0`, `r_max` when `A_i(r_max) >= 0`, and the
//! root of `A_i` otherwise.

use serde::{Deserialize, Serialize};

use crate::channel::{Channel, LinkParams, Modulation, RateWindow};
use crate::markov::{own_response, solve_stationary, MacProfile, StationaryState, DEFAULT_MAX_STAGE};
use crate::numeric::{bracketed_root, central_difference, FD_REL_STEP};
use crate::throughput::{user_throughputs, SlotMode, TimingParams};
use crate::{Error, Result};

/// Relative accuracy of a best-response root.
pub const BR_REL_TOL: f64 = 1e-9;
const MAX_CONSISTENCY_ITER: usize = 60;
/// Default stopping step of best-response dynamics, relative to the largest `r_max`.
pub const DYNAMICS_REL_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ROUNDS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub mac: MacProfile,
    pub channel: Channel,
}

impl UserProfile {
    /// 64-QAM with `alpha = 1`, 20 MHz, rates in `[1, 100]` Mbit/s, 1 ms packets, `m = 5`.
    pub fn standard(snr_db: f64, cw: u32) -> Result<Self> {
        Ok(UserProfile {
            mac: MacProfile::new(cw, DEFAULT_MAX_STAGE)?,
            channel: Channel::new(
                LinkParams::new(snr_db, 20e6, Modulation::qam64())?,
                RateWindow::new(1e6, 100e6, 1e-3)?,
            )?,
        })
    }

    pub fn window(&self) -> &RateWindow {
        &self.channel.window
    }
}

/// How `A_i` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AMode {
    /// Exact `d ln S_i / dR_i` with the other users' attempt probabilities
    /// held fixed, idle-slot length included.
    #[default]
    NonAtomic,
    /// `G'/G + prod_{j != i} rho_j / tau_i * Gamma_i'(q_i) e_i'`: the same
    /// derivative with the slot-length feedback dropped.
    Simplified,
    /// `d ln S_i / dR_i` with the whole stationary state re-solved, by
    /// central difference.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameContext {
    pub users: Vec<UserProfile>,
    pub timing: TimingParams,
    pub a_mode: AMode,
}

impl GameContext {
    pub fn new(users: Vec<UserProfile>, timing: TimingParams) -> Result<Self> {
        let ctx = GameContext { users, timing, a_mode: AMode::default() };
        ctx.validate()?;
        Ok(ctx)
    }

    /// `n` copies of one user.
    pub fn symmetric(n: usize, user: UserProfile, timing: TimingParams) -> Result<Self> {
        Self::new(vec![user; n], timing)
    }

    pub fn validate(&self) -> Result<()> {
        if self.users.is_empty() {
            return Err(Error::Precondition("a game needs at least one user".into()));
        }
        self.timing.validate()?;
        for (i, u) in self.users.iter().enumerate() {
            u.mac.validate()?;
            u.channel.link.validate()?;
            u.channel.window.validate()?;
            if u.channel.window.airtime != self.timing.airtime {
                return Err(Error::Precondition(format!(
                    "user {i}: packet airtime {} differs from the shared airtime {}",
                    u.channel.window.airtime, self.timing.airtime
                )));
            }
        }
        Ok(())
    }

    pub fn with_a_mode(mut self, mode: AMode) -> Self {
        self.a_mode = mode;
        self
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    /// Same users with every contention window set to `cw`.
    pub fn with_common_cw(&self, cw: u32) -> Result<Self> {
        let mut ctx = self.clone();
        for u in &mut ctx.users {
            u.mac = MacProfile::new(cw, u.mac.max_stage)?;
        }
        Ok(ctx)
    }

    pub fn with_cws(&self, cws: &[u32]) -> Result<Self> {
        if cws.len() != self.len() {
            return Err(Error::Precondition(format!("{} windows for {} users", cws.len(), self.len())));
        }
        let mut ctx = self.clone();
        for (u, &cw) in ctx.users.iter_mut().zip(cws) {
            u.mac = MacProfile::new(cw, u.mac.max_stage)?;
        }
        Ok(ctx)
    }

    /// True when every user has the same MAC, link and window.
    pub fn is_symmetric(&self) -> bool {
        self.users.windows(2).all(|w| w[0] == w[1])
    }

    pub fn r_min(&self) -> Vec<f64> {
        self.users.iter().map(|u| u.window().r_min).collect()
    }

    pub fn r_max(&self) -> Vec<f64> {
        self.users.iter().map(|u| u.window().r_max).collect()
    }

    pub fn largest_r_max(&self) -> f64 {
        self.users.iter().map(|u| u.window().r_max).fold(0.0, f64::max)
    }

    pub fn pers(&self, rates: &[f64]) -> Vec<f64> {
        self.users.iter().zip(rates).map(|(u, &r)| u.channel.per(r)).collect()
    }

    pub fn goodputs(&self, rates: &[f64]) -> Vec<f64> {
        self.users.iter().zip(rates).map(|(u, &r)| u.channel.goodput(r)).collect()
    }

    pub fn macs(&self) -> Vec<MacProfile> {
        self.users.iter().map(|u| u.mac).collect()
    }

    pub fn state(&self, rates: &[f64]) -> Result<StationaryState> {
        self.check_rates(rates)?;
        solve_stationary(&self.macs(), &self.pers(rates))
    }

    /// Per-user throughput at a rate profile.
    pub fn throughputs(&self, rates: &[f64]) -> Result<Vec<f64>> {
        let state = self.state(rates)?;
        Ok(user_throughputs(&state, &self.goodputs(rates), &self.timing, &self.pers(rates), SlotMode::Approx))
    }

    pub fn welfare(&self, rates: &[f64]) -> Result<f64> {
        Ok(self.throughputs(rates)?.iter().sum())
    }

    fn check_rates(&self, rates: &[f64]) -> Result<()> {
        if rates.len() != self.len() {
            return Err(Error::Precondition(format!("{} rates for {} users", rates.len(), self.len())));
        }
        Ok(())
    }

    /// `S_i` when user `i` moves to `rate` and the others' attempt
    /// probabilities stay at the values giving `idle_others`.
    pub fn own_throughput(&self, i: usize, rate: f64, idle_others: f64) -> f64 {
        let u = &self.users[i];
        let (_, tau) = own_response(&u.mac, idle_others, u.channel.per(rate));
        let t = &self.timing;
        let idle = (1.0 - tau) * idle_others;
        let slot = (1.0 - idle) * t.airtime + idle * t.sigma;
        tau * idle_others * u.channel.goodput(rate) * t.airtime / slot
    }
}

/// A rate profile, with convergence metadata when produced by dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateProfile {
    pub rates: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Sup-norm gap between the limits reached from below and from above.
    pub gap: Option<f64>,
}

impl RateProfile {
    pub fn new(rates: Vec<f64>) -> Self {
        RateProfile { rates, converged: false, iterations: 0, gap: None }
    }
}

/// Score at `rate` for user `i` against an idle-others probability, in
/// the non-atomic modes.
fn a_non_atomic(ctx: &GameContext, i: usize, rate: f64, idle_others: f64, simplified: bool) -> f64 {
    let u = &ctx.users[i];
    let pt = u.channel.eval(rate);
    let (q, tau) = own_response(&u.mac, idle_others, pt.per);
    let dtau = u.mac.gamma_derivative(q) * idle_others * pt.per_derivative;
    if simplified {
        return pt.goodput_log_derivative + dtau / tau;
    }
    let t = ctx.timing.airtime;
    let sigma = ctx.timing.sigma;
    let idle = (1.0 - tau) * idle_others;
    let slot = sigma * idle + (1.0 - idle) * t;
    pt.goodput_log_derivative + dtau * (1.0 / tau - idle_others * (t - sigma) / slot)
}

fn a_full(ctx: &GameContext, i: usize, rate: f64, rates: &[f64]) -> Result<f64> {
    let u = &ctx.users[i];
    // ln S_i = ln G_i + ln(tau_i P_i T / slot); the G factor is differentiated
    // in log space so the score stays finite where G underflows
    let ln_rest = |r: f64| -> Result<f64> {
        let mut trial = rates.to_vec();
        trial[i] = r;
        let state = ctx.state(&trial)?;
        let t = &ctx.timing;
        let slot = (1.0 - state.c) * t.airtime + state.c * t.sigma;
        Ok((state.tau[i] * state.idle_others(i) * t.airtime / slot).ln())
    };
    let h = FD_REL_STEP * rate;
    let rest = (ln_rest(rate + h)? - ln_rest(rate - h)?) / (2.0 * h);
    Ok(u.channel.goodput_log_derivative(rate) + rest)
}

/// `A_i(rate)` with the other users at `rates`; `rates[i]` is ignored in the
/// non-atomic modes.
pub fn a_value(ctx: &GameContext, i: usize, rate: f64, rates: &[f64]) -> Result<f64> {
    match ctx.a_mode {
        AMode::Full => a_full(ctx, i, rate, rates),
        mode => {
            let state = ctx.state(rates)?;
            Ok(a_non_atomic(ctx, i, rate, state.idle_others(i), mode == AMode::Simplified))
        }
    }
}

/// Best response of user `i` against a fixed probability that no other
/// user transmits.
pub fn best_response_to_idle(ctx: &GameContext, i: usize, idle_others: f64) -> f64 {
    let simplified = ctx.a_mode == AMode::Simplified;
    let a = |r: f64| a_non_atomic(ctx, i, r, idle_others, simplified);
    solve_three_cases(a, ctx.users[i].window())
}

fn solve_three_cases(a: impl Fn(f64) -> f64, w: &RateWindow) -> f64 {
    let (lo, hi) = (w.r_min, w.r_max);
    if a(lo) <= 0.0 {
        return lo;
    }
    if a(hi) >= 0.0 {
        return hi;
    }
    bracketed_root(&a, lo, hi, BR_REL_TOL * lo, 300).expect("A changes sign on the window")
}

/// Best response of user `i` when the others play `rates`.
pub fn best_response(ctx: &GameContext, i: usize, rates: &[f64]) -> Result<f64> {
    match ctx.a_mode {
        AMode::Full => {
            let failure = std::cell::RefCell::new(None);
            let a = |r: f64| {
                a_full(ctx, i, r, rates).unwrap_or_else(|e| {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                })
            };
            let r = solve_three_cases(a, ctx.users[i].window());
            match failure.into_inner() {
                Some(e) => Err(e),
                None => Ok(r),
            }
        }
        _ => {
            // the others' attempt probabilities are taken at the state where
            // user i already plays its answer, so the result depends on the
            // others' rates only; the feedback is weak and this settles fast
            let mut trial = rates.to_vec();
            for _ in 0..MAX_CONSISTENCY_ITER {
                let idle_others = ctx.state(&trial)?.idle_others(i);
                let r = best_response_to_idle(ctx, i, idle_others);
                let settled = (r - trial[i]).abs() <= BR_REL_TOL * r;
                trial[i] = r;
                if settled {
                    return Ok(r);
                }
            }
            Err(Error::NoConvergence(format!("best response of user {i} did not settle")))
        }
    }
}

/// Order in which users revise their rates.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    #[default]
    RoundRobin,
    /// A finite sequence of user indices, repeated; it must name every user.
    Sequence(Vec<usize>),
}

impl Schedule {
    fn order(&self, n: usize) -> Result<Vec<usize>> {
        match self {
            Schedule::RoundRobin => Ok((0..n).collect()),
            Schedule::Sequence(seq) => {
                if let Some(&bad) = seq.iter().find(|&&i| i >= n) {
                    return Err(Error::Precondition(format!("schedule names user {bad} of {n}")));
                }
                if let Some(missing) = (0..n).find(|i| !seq.contains(i)) {
                    return Err(Error::Precondition(format!("schedule never visits user {missing}")));
                }
                Ok(seq.clone())
            }
        }
    }
}

/// Asynchronous best-response dynamics. One round is one pass over the
/// schedule; stops when a round moves no rate by `tol` or more.
pub fn br_dynamics(
    ctx: &GameContext,
    initial: &RateProfile,
    schedule: &Schedule,
    tol: f64,
    max_rounds: usize,
) -> Result<RateProfile> {
    br_dynamics_observed(ctx, initial, schedule, tol, max_rounds, |_| {})
}

/// `br_dynamics`, calling `observe` with the profile after every single update.
pub fn br_dynamics_observed(
    ctx: &GameContext,
    initial: &RateProfile,
    schedule: &Schedule,
    tol: f64,
    max_rounds: usize,
    mut observe: impl FnMut(&[f64]),
) -> Result<RateProfile> {
    ctx.check_rates(&initial.rates)?;
    let order = schedule.order(ctx.len())?;
    let mut rates = initial.rates.clone();
    for (u, r) in ctx.users.iter().zip(&mut rates) {
        *r = r.clamp(u.window().r_min, u.window().r_max);
    }
    let mut last_step = f64::INFINITY;
    for round in 1..=max_rounds {
        let mut step: f64 = 0.0;
        for &i in &order {
            let next = best_response(ctx, i, &rates)?;
            step = step.max((next - rates[i]).abs());
            rates[i] = next;
            observe(&rates);
        }
        last_step = step;
        if step < tol {
            return Ok(RateProfile { rates, converged: true, iterations: round, gap: None });
        }
    }
    Err(Error::BrDivergence { rounds: max_rounds, last_step })
}

/// Outcome of the two-sided uniqueness check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub from_below: RateProfile,
    pub from_above: RateProfile,
    pub gap: f64,
}

impl Certificate {
    /// The certified equilibrium, taken as the limit from below with the gap attached.
    pub fn profile(&self) -> RateProfile {
        RateProfile { gap: Some(self.gap), ..self.from_below.clone() }
    }
}

/// Runs best-response dynamics from the all-`r_min` and all-`r_max`
/// profiles and certifies a unique equilibrium when the limits agree to `tol`.
pub fn certify_unique_ne(ctx: &GameContext, tol: f64) -> Result<Certificate> {
    let inner_tol = 1e-2 * tol;
    let below = br_dynamics(ctx, &RateProfile::new(ctx.r_min()), &Schedule::RoundRobin, inner_tol, DEFAULT_MAX_ROUNDS)?;
    let above = br_dynamics(ctx, &RateProfile::new(ctx.r_max()), &Schedule::RoundRobin, inner_tol, DEFAULT_MAX_ROUNDS)?;
    let gap = below.rates.iter().zip(&above.rates).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if gap > tol {
        return Err(Error::Certification { gap, tol });
    }
    Ok(Certificate { from_below: below, from_above: above, gap })
}

/// Equilibrium of a symmetric game by the synchronous iteration
/// `R <- B(R, ..., R)`, which is monotone because best responses are
/// non-decreasing in the others' rates. Started from both ends of the
/// window; the returned gap is the distance between the two limits.
pub fn symmetric_ne(ctx: &GameContext, tol: f64) -> Result<RateProfile> {
    if !ctx.is_symmetric() {
        return Err(Error::Precondition("symmetric_ne needs identical users".into()));
    }
    let n = ctx.len();
    let w = *ctx.users[0].window();
    let run = |start: f64| -> Result<(f64, usize)> {
        let mut r = start;
        for round in 1..=DEFAULT_MAX_ROUNDS {
            let next = best_response(ctx, 0, &vec![r; n])?;
            let step = (next - r).abs();
            r = next;
            if step < 1e-2 * tol {
                return Ok((r, round));
            }
        }
        Err(Error::BrDivergence { rounds: DEFAULT_MAX_ROUNDS, last_step: f64::NAN })
    };
    let (lo, it_lo) = run(w.r_min)?;
    let (hi, it_hi) = run(w.r_max)?;
    let gap = (hi - lo).abs();
    if gap > tol {
        return Err(Error::Certification { gap, tol });
    }
    Ok(RateProfile { rates: vec![lo; n], converged: true, iterations: it_lo.max(it_hi), gap: Some(gap) })
}

/// The unique rate equilibrium, via the symmetric shortcut when it applies.
pub fn rate_equilibrium(ctx: &GameContext, tol: f64) -> Result<RateProfile> {
    if ctx.is_symmetric() && ctx.a_mode != AMode::Full {
        symmetric_ne(ctx, tol)
    } else {
        certify_unique_ne(ctx, tol).map(|c| c.profile())
    }
}

/// Central-difference `dS_i/dR_i` with others' attempt probabilities fixed.
pub fn own_throughput_slope(ctx: &GameContext, i: usize, rate: f64, idle_others: f64) -> f64 {
    central_difference(|r| ctx.own_throughput(i, r, idle_others), rate, FD_REL_STEP)
}
