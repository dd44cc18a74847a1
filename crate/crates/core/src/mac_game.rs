//! The contention-window game under tit-for-tat.
//!
//! Under tit-for-tat every user ends up on the smallest window anyone
//! announces, so a user's utility is a function of one common window `W`:
//! `S_hat_i(W)`, its throughput at the rate equilibrium for that `W`. User
//! `i` accepts `W` only if no smaller window pays more (`W_hat_i`), and the
//! system equilibria are the windows every user accepts. The refined
//! equilibrium is the largest of them.
//!
//! Windows 2 and 3 are outside the analytic model; scans run over
//! `{0, 1, 4, 4 + step, ...}` with `S_hat(0) = S_hat(1) = 0` and 0, 1 kept
//! as members of every `W_hat_i`.

use serde::{Deserialize, Serialize};

use crate::dcf_sim::{simulate, NodeSpec, SimConfig};
use crate::numeric::{bisect, grid_golden_max};
use crate::rate_game::{certify_unique_ne, rate_equilibrium, GameContext, RateProfile};
use crate::{Error, Result};

/// Smallest window the analytic model accepts.
pub const MIN_ANALYTIC_CW: u32 = 4;
/// Scan cap when no finite bound is available.
pub const DEFAULT_SCAN_CAP: u32 = 4096;
/// Rate equilibria behind utility curves are resolved to this fraction of `r_max`.
pub const UTILITY_RATE_TOL: f64 = 1e-9;

/// Per-user utilities at common window `w`; zero below the analytic range.
pub fn utility_hat(ctx: &GameContext, w: u32) -> Result<Vec<f64>> {
    Ok(rate_point(ctx, w)?.map(|(_, s)| s).unwrap_or_else(|| vec![0.0; ctx.len()]))
}

/// Rate equilibrium and utilities at common window `w`, `None` below the
/// analytic range.
fn rate_point(ctx: &GameContext, w: u32) -> Result<Option<(RateProfile, Vec<f64>)>> {
    if w < MIN_ANALYTIC_CW {
        return Ok(None);
    }
    let at_w = ctx.with_common_cw(w)?;
    let ne = rate_equilibrium(&at_w, UTILITY_RATE_TOL * ctx.largest_r_max())?;
    let s = at_w.throughputs(&ne.rates)?;
    Ok(Some((ne, s)))
}

/// Utility of user `i` when it alone runs window `own` and everyone else
/// runs `others`, rates at the equilibrium of that profile.
pub fn deviation_utility(ctx: &GameContext, i: usize, others: u32, own: u32) -> Result<f64> {
    let mut cws = vec![others; ctx.len()];
    cws[i] = own;
    let dev = ctx.with_cws(&cws)?;
    let ne = certify_unique_ne(&dev, UTILITY_RATE_TOL * ctx.largest_r_max())?.profile();
    Ok(dev.throughputs(&ne.rates)?[i])
}

/// One user's acceptable windows: `W` is a member iff its utility is at
/// least that of every scanned window below it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WHatSet {
    pub members: Vec<u32>,
    /// `(W, S_hat(W))` in increasing `W`.
    pub curve: Vec<(u32, f64)>,
    pub w_star: u32,
}

impl WHatSet {
    /// Running-maximum test over a curve sorted by window.
    pub fn from_curve(curve: &[(u32, f64)]) -> Self {
        let mut members = Vec::new();
        let mut best = f64::NEG_INFINITY;
        for &(w, s) in curve {
            if s >= best {
                members.push(w);
                best = s;
            }
        }
        let w_star = members.last().copied().unwrap_or(0);
        WHatSet { members, curve: curve.to_vec(), w_star }
    }

    /// Like `from_curve`, with 0 and 1 forced in as members.
    fn with_formal_members(curve: &[(u32, f64)]) -> Self {
        let mut set = Self::from_curve(curve);
        for w in [0, 1] {
            if curve.iter().any(|p| p.0 == w) && !set.members.contains(&w) {
                set.members.push(w);
            }
        }
        set.members.sort_unstable();
        set
    }

    pub fn contains(&self, w: u32) -> bool {
        self.members.binary_search(&w).is_ok()
    }
}

/// Windows scanned up to and including `limit`: 0, 1, then 4 onwards by `step`.
pub fn scan_grid(limit: u32, step: u32) -> Vec<u32> {
    let step = step.max(1);
    let mut grid = vec![0, 1];
    let mut w = MIN_ANALYTIC_CW;
    while w <= limit {
        grid.push(w);
        w += step;
    }
    grid
}

/// `W_hat_i` for user `i` over the scan grid up to `scan_limit`.
pub fn build_w_hat(ctx: &GameContext, i: usize, scan_limit: u32, step: u32) -> Result<WHatSet> {
    let mut curve = Vec::new();
    for w in scan_grid(scan_limit, step) {
        curve.push((w, utility_hat(ctx, w)?[i]));
    }
    Ok(WHatSet::with_formal_members(&curve))
}

/// A window beyond which no utility can beat the current one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CwBound {
    Finite(u32),
    Unbounded,
}

impl CwBound {
    pub fn min(self, other: CwBound) -> CwBound {
        match (self, other) {
            (CwBound::Finite(a), CwBound::Finite(b)) => CwBound::Finite(a.min(b)),
            (CwBound::Finite(a), CwBound::Unbounded) | (CwBound::Unbounded, CwBound::Finite(a)) => CwBound::Finite(a),
            _ => CwBound::Unbounded,
        }
    }

    /// `true` when `w` is at or past the bound.
    pub fn reached(self, w: u32) -> bool {
        matches!(self, CwBound::Finite(b) if w >= b)
    }

    pub fn or_cap(self, cap: u32) -> u32 {
        match self {
            CwBound::Finite(b) => b.min(cap),
            CwBound::Unbounded => cap,
        }
    }
}

/// `(1-x)^(n-1) x / (1 - (1-x)^n)`, with its limit `1/n` at 0.
fn idle_free_share(x: f64, n: u32) -> f64 {
    if x <= 0.0 {
        return 1.0 / n as f64;
    }
    let nf = n as f64;
    let others = ((nf - 1.0) * (-x).ln_1p()).exp();
    let busy = -(nf * (-x).ln_1p()).exp_m1();
    others * x / busy
}

/// Window bound from the idle-slot-free throughput ratio: `ceil(2/x*)` with
/// `x*` the root of `(1-x)^(n-1) x / (1 - (1-x)^n) = s_current / g_max`.
///
/// That ratio falls from `1/n` to 0 on `(0, 1]`, so a large `x*` pairs with
/// a small utility and the bound does not hold in general; the scans use
/// [`scan_bound`]. Kept for reference and comparison.
pub fn search_bound(s_current: f64, g_max: f64, n: u32) -> Result<CwBound> {
    if n < 2 {
        return Err(Error::Precondition(format!("search_bound needs n >= 2 (got {n})")));
    }
    if !(s_current > 0.0 && s_current <= g_max) {
        return Err(Error::Precondition(format!("need 0 < S ({s_current}) <= G_max ({g_max})")));
    }
    let ratio = s_current / g_max;
    if ratio >= 1.0 / n as f64 {
        return Ok(CwBound::Unbounded);
    }
    let x = bisect(|x| idle_free_share(x, n) - ratio, 0.0, 1.0, 1e-15, 200);
    // the root is only known to ~1e-15; do not let 2/x = 3 become 3.0000001
    Ok(CwBound::Finite(((2.0 / x) * (1.0 - 1e-12)).ceil() as u32))
}

/// `x (1-x)^(n-1) / (kappa (1-x)^n + 1 - (1-x)^n)`: a user's share of
/// `G_max` when all `n` users attempt with probability `x` and an idle slot
/// lasts `kappa` packet times.
pub fn share_bound(x: f64, n: u32, kappa: f64) -> f64 {
    let nf = n as f64;
    let idle = (nf * (-x).ln_1p()).exp();
    let busy = -(nf * (-x).ln_1p()).exp_m1();
    let others = if n == 1 { 1.0 } else { ((nf - 1.0) * (-x).ln_1p()).exp() };
    x * others / (kappa * idle + busy)
}

/// Window past which `S_hat_i(W) <= s_current`.
///
/// Every attempt probability satisfies `tau <= 2/(W+1)`, and the share
/// `share_bound(x)` increases on `(0, x_peak]`; so once `2/(W+1)` drops
/// below the root `x*` of `share_bound(x) = s_current / g_max` on that
/// branch, the utility cannot exceed `s_current`. Returns
/// `ceil(2/x* - 1)`, `Finite(0)` when the ratio is already above the peak,
/// and `Unbounded` when `kappa = 0` leaves no increasing branch.
pub fn scan_bound(s_current: f64, g_max: f64, n: u32, kappa: f64) -> CwBound {
    if n == 0 || !(g_max > 0.0) {
        return CwBound::Unbounded;
    }
    let ratio = (s_current / g_max).max(0.0);
    if ratio == 0.0 {
        return CwBound::Unbounded;
    }
    let f = |x: f64| share_bound(x, n, kappa);
    let (x_peak, peak) = if n == 1 { (1.0, f(1.0)) } else { grid_golden_max(f, 1e-12, 1.0, 400, true, 1e-15) };
    if ratio >= peak {
        return CwBound::Finite(0);
    }
    if kappa <= 0.0 {
        return CwBound::Unbounded;
    }
    // f(0) = 0 < ratio < f(x_peak)
    let x = bisect(|x| f(x) - ratio, 0.0, x_peak, 1e-15, 200);
    let w = (2.0 / x - 1.0) * (1.0 + 1e-12);
    if w >= u32::MAX as f64 {
        CwBound::Unbounded
    } else {
        CwBound::Finite(w.ceil().max(0.0) as u32)
    }
}

/// Largest `G_i` over user `i`'s window.
pub fn max_goodputs(ctx: &GameContext) -> Vec<f64> {
    ctx.users.iter().map(|u| u.channel.max_goodput().1).collect()
}

/// Bound shared by every user: the smallest individual bound.
fn joint_bound(ctx: &GameContext, best: &[f64], g_max: &[f64]) -> CwBound {
    let n = ctx.len() as u32;
    let kappa = ctx.timing.kappa();
    best.iter().zip(g_max).map(|(&s, &g)| scan_bound(s, g, n, kappa)).fold(CwBound::Unbounded, CwBound::min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    /// Refined equilibrium, the largest window every user accepts.
    pub w_star: u32,
    /// Every scanned window every user accepts.
    pub equilibria: Vec<u32>,
    /// Rate equilibrium at `w_star`; empty when `w_star < 4`.
    pub rates: Vec<f64>,
    pub throughputs: Vec<f64>,
    pub welfare: f64,
    /// Windows scanned, with `utilities[k][i]` user `i`'s utility at `scanned[k]`.
    pub scanned: Vec<u32>,
    pub utilities: Vec<Vec<f64>>,
    pub sets: Vec<WHatSet>,
    /// Bound in force when the scan stopped.
    pub scan_limit: CwBound,
    /// Optimal welfare over equilibrium welfare, once computed.
    pub poa: Option<f64>,
}

/// Sets, equilibria and refined window from per-user curves sharing one grid.
pub fn refine_curves(grid: &[u32], utilities: &[Vec<f64>]) -> (Vec<WHatSet>, Vec<u32>, u32) {
    let n = utilities.first().map_or(0, |u| u.len());
    let sets: Vec<WHatSet> = (0..n)
        .map(|i| {
            let curve: Vec<(u32, f64)> = grid.iter().zip(utilities).map(|(&w, u)| (w, u[i])).collect();
            WHatSet::with_formal_members(&curve)
        })
        .collect();
    let equilibria: Vec<u32> = grid.iter().copied().filter(|&w| sets.iter().all(|s| s.contains(w))).collect();
    let w_star = equilibria.last().copied().unwrap_or(0);
    (sets, equilibria, w_star)
}

/// Scans common windows upward, tightening the joint bound as utilities
/// improve, and returns the refined equilibrium with the full curves.
pub fn refined_equilibrium(ctx: &GameContext, step: u32, cap: u32) -> Result<EquilibriumReport> {
    let g_max = max_goodputs(ctx);
    let mut best: Vec<f64> = vec![0.0; ctx.len()];
    let mut grid = vec![0, 1];
    let mut utilities = vec![vec![0.0; ctx.len()]; 2];
    let mut limit = CwBound::Unbounded;
    let mut w = MIN_ANALYTIC_CW;
    while w <= cap && !limit.reached(w) {
        let s = utility_hat(ctx, w)?;
        for (b, &v) in best.iter_mut().zip(&s) {
            *b = b.max(v);
        }
        limit = joint_bound(ctx, &best, &g_max);
        grid.push(w);
        utilities.push(s);
        w += step.max(1);
    }
    report_from_scan(ctx, grid, utilities, limit)
}

/// Like [`refined_equilibrium`] over a fixed grid, ignoring bounds.
pub fn exhaustive_equilibrium(ctx: &GameContext, limit: u32, step: u32) -> Result<EquilibriumReport> {
    let grid = scan_grid(limit, step);
    let utilities = grid.iter().map(|&w| utility_hat(ctx, w)).collect::<Result<Vec<_>>>()?;
    report_from_scan(ctx, grid, utilities, CwBound::Finite(limit))
}

fn report_from_scan(
    ctx: &GameContext,
    grid: Vec<u32>,
    utilities: Vec<Vec<f64>>,
    limit: CwBound,
) -> Result<EquilibriumReport> {
    let (sets, equilibria, w_star) = refine_curves(&grid, &utilities);
    let (rates, throughputs) = match rate_point(ctx, w_star)? {
        Some((ne, s)) => (ne.rates, s),
        None => (Vec::new(), vec![0.0; ctx.len()]),
    };
    Ok(EquilibriumReport {
        w_star,
        equilibria,
        rates,
        welfare: throughputs.iter().sum(),
        throughputs,
        scanned: grid,
        utilities,
        sets,
        scan_limit: limit,
        poa: None,
    })
}

/// Tit-for-tat reaction: adopt the smallest window seen, own included.
pub fn tft_mac_reaction(observed: &[u32], own: u32) -> u32 {
    observed.iter().copied().fold(own, u32::min)
}

/// Whether common window `w` is accepted by every user on the scan grid.
pub fn is_system_equilibrium(ctx: &GameContext, w: u32, step: u32, cap: u32) -> Result<bool> {
    if w <= 1 {
        return Ok(true);
    }
    if w < MIN_ANALYTIC_CW {
        return Ok(false);
    }
    let report = refined_equilibrium(ctx, step, cap)?;
    Ok(report.equilibria.contains(&w))
}

// ---------------------------------------------------------------------------
// Distributed search
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MessageKind {
    StartSearch,
    IncreaseW,
    SearchStop,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub round: u64,
    pub sender: usize,
    pub kind: MessageKind,
    /// The sender's best window, on `SearchStop` only.
    pub payload: Option<u32>,
}

impl Message {
    /// `round,sender,kind,payload` with an empty payload field when absent.
    pub fn to_line(&self) -> String {
        let payload = self.payload.map(|w| w.to_string()).unwrap_or_default();
        format!("{},{},{:?},{}", self.round, self.sender, self.kind, payload)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Coordinator,
    Follower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub w: u32,
    pub s_max: f64,
    pub w_max: CwBound,
    pub w_best: u32,
    pub w_hat: Vec<u32>,
    pub role: Role,
    pub epsilon: f64,
    searching: bool,
}

impl AgentState {
    fn new(role: Role, epsilon: f64) -> Self {
        AgentState {
            w: 0,
            s_max: 0.0,
            w_max: CwBound::Unbounded,
            w_best: 0,
            w_hat: vec![0],
            role,
            epsilon,
            searching: true,
        }
    }

    /// Largest accepted window strictly below the current one.
    fn step_down(&mut self) {
        if let Some(&w) = self.w_hat.iter().rev().find(|&&w| w < self.w) {
            self.w = w;
        }
    }
}

/// Where agents' utilities come from during the search.
pub trait Measurement {
    fn users(&self) -> usize;
    /// The window that follows `w` in the search.
    fn next_cw(&self, w: u32) -> u32;
    /// Every agent's utility with all agents on window `w`.
    fn measure(&mut self, w: u32) -> Result<Vec<f64>>;
    /// Bound for agent `i` after its best utility reached `s_max`.
    fn bound(&self, i: usize, s_max: f64) -> CwBound;
}

fn next_on_grid(w: u32, step: u32) -> u32 {
    match w {
        0 => 1,
        1..=3 => MIN_ANALYTIC_CW,
        _ => w + step.max(1),
    }
}

/// Utilities from the analytic model.
pub struct AnalyticMeasurement<'a> {
    ctx: &'a GameContext,
    step: u32,
    cap: u32,
    g_max: Vec<f64>,
}

impl<'a> AnalyticMeasurement<'a> {
    pub fn new(ctx: &'a GameContext, step: u32, cap: u32) -> Self {
        AnalyticMeasurement { ctx, step, cap, g_max: max_goodputs(ctx) }
    }
}

impl Measurement for AnalyticMeasurement<'_> {
    fn users(&self) -> usize {
        self.ctx.len()
    }

    fn next_cw(&self, w: u32) -> u32 {
        next_on_grid(w, self.step)
    }

    fn measure(&mut self, w: u32) -> Result<Vec<f64>> {
        utility_hat(self.ctx, w)
    }

    fn bound(&self, i: usize, s_max: f64) -> CwBound {
        let b = scan_bound(s_max, self.g_max[i], self.ctx.len() as u32, self.ctx.timing.kappa());
        b.min(CwBound::Finite(self.cap))
    }
}

/// Utilities counted from the slot simulator at the rate equilibrium: the
/// delivered payload over a measurement period.
pub struct SimulatedMeasurement<'a> {
    ctx: &'a GameContext,
    step: u32,
    cap: u32,
    slots: u64,
    seed: u64,
    g_max: Vec<f64>,
}

impl<'a> SimulatedMeasurement<'a> {
    pub fn new(ctx: &'a GameContext, step: u32, cap: u32, slots: u64, seed: u64) -> Self {
        SimulatedMeasurement { ctx, step, cap, slots, seed, g_max: max_goodputs(ctx) }
    }
}

impl Measurement for SimulatedMeasurement<'_> {
    fn users(&self) -> usize {
        self.ctx.len()
    }

    fn next_cw(&self, w: u32) -> u32 {
        next_on_grid(w, self.step)
    }

    fn measure(&mut self, w: u32) -> Result<Vec<f64>> {
        if w == 0 {
            return Ok(vec![0.0; self.ctx.len()]);
        }
        // below the analytic range the rates of the smallest analytic window are used
        let at = self.ctx.with_common_cw(w.max(MIN_ANALYTIC_CW))?;
        let ne = rate_equilibrium(&at, UTILITY_RATE_TOL * self.ctx.largest_r_max())?;
        let nodes = self
            .ctx
            .users
            .iter()
            .zip(&ne.rates)
            .map(|(u, &r)| NodeSpec {
                cw: w,
                max_stage: u.mac.max_stage,
                rate: r,
                per: u.channel.per(r),
                airtime: u.channel.window.airtime,
                link: Some(u.channel.link),
            })
            .collect();
        let config = SimConfig::new(nodes, self.slots, self.seed ^ w as u64, self.ctx.timing);
        Ok(simulate(&config)?.nodes.iter().map(|n| n.throughput).collect())
    }

    fn bound(&self, i: usize, s_max: f64) -> CwBound {
        let b = scan_bound(s_max, self.g_max[i], self.ctx.len() as u32, self.ctx.timing.kappa());
        b.min(CwBound::Finite(self.cap))
    }
}

/// Utilities read from fixed curves, `curves[i][w]`; every window past a
/// curve's end is taken to pay less than the curve's best.
pub struct InjectedMeasurement {
    pub curves: Vec<Vec<f64>>,
}

impl Measurement for InjectedMeasurement {
    fn users(&self) -> usize {
        self.curves.len()
    }

    fn next_cw(&self, w: u32) -> u32 {
        w + 1
    }

    fn measure(&mut self, w: u32) -> Result<Vec<f64>> {
        Ok(self.curves.iter().map(|c| c.get(w as usize).copied().unwrap_or(f64::NEG_INFINITY)).collect())
    }

    fn bound(&self, i: usize, _s_max: f64) -> CwBound {
        CwBound::Finite(self.curves[i].len() as u32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    /// Every agent's window at the end.
    pub final_w: Vec<u32>,
    pub agents: Vec<AgentState>,
    pub trace: Vec<Message>,
    /// Windows measured during the search phase, in order.
    pub scanned: Vec<u32>,
    pub settle_rounds: u64,
}

impl SearchOutcome {
    /// The common final window when all agents agree.
    pub fn common_w(&self) -> Option<u32> {
        let first = *self.final_w.first()?;
        self.final_w.iter().all(|&w| w == first).then_some(first)
    }

    /// Trace as line-delimited `round,sender,kind,payload` records.
    pub fn trace_lines(&self) -> String {
        let mut out = String::from("round,sender,kind,payload\n");
        for m in &self.trace {
            out.push_str(&m.to_line());
            out.push('\n');
        }
        out
    }
}

/// Runs the two phases of the distributed search over a round-based
/// message bus. Messages sent in round `r` are read in round `r + 1`.
///
/// Search: on `StartSearch`/`IncreaseW` every agent moves to the next
/// window, measures, and records the window when its utility strictly
/// improves (window 1 is always recorded). An agent at or past its bound
/// returns to its best window and broadcasts `SearchStop`; everyone stops
/// on reading one. Settle: while some agent sees a window more than
/// `epsilon` below its own, it steps down to its largest recorded window
/// below the current one.
pub fn algorithm1_run(measurement: &mut dyn Measurement, coordinator: usize, epsilon: f64) -> Result<SearchOutcome> {
    let n = measurement.users();
    if coordinator >= n {
        return Err(Error::Precondition(format!("coordinator {coordinator} out of {n} agents")));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::Precondition(format!("epsilon must be >= 0 (got {epsilon})")));
    }
    let mut agents: Vec<AgentState> = (0..n)
        .map(|i| AgentState::new(if i == coordinator { Role::Coordinator } else { Role::Follower }, epsilon))
        .collect();
    let mut trace = vec![Message { round: 0, sender: coordinator, kind: MessageKind::StartSearch, payload: None }];
    let mut inbox: Vec<Message> = trace.clone();
    let mut scanned = Vec::new();
    let mut round = 0u64;

    while agents.iter().any(|a| a.searching) {
        round += 1;
        let stop_seen = inbox.iter().any(|m| m.kind == MessageKind::SearchStop);
        let go = inbox.iter().any(|m| matches!(m.kind, MessageKind::StartSearch | MessageKind::IncreaseW));
        let mut outbox = Vec::new();
        if stop_seen {
            for a in &mut agents {
                a.searching = false;
            }
            break;
        }
        if !go {
            return Err(Error::Precondition("search stalled without a stop message".into()));
        }
        let w = measurement.next_cw(agents[coordinator].w);
        let s = measurement.measure(w)?;
        scanned.push(w);
        let mut coordinator_stopped = false;
        for (i, a) in agents.iter_mut().enumerate() {
            a.w = w;
            if s[i] > a.s_max || w == 1 {
                if s[i] > a.s_max {
                    a.s_max = s[i];
                    a.w_max = measurement.bound(i, s[i]);
                }
                a.w_best = w;
                if !a.w_hat.contains(&w) {
                    a.w_hat.push(w);
                }
            }
            if a.w_max.reached(a.w) {
                a.w = a.w_best;
                a.searching = false;
                outbox.push(Message { round, sender: i, kind: MessageKind::SearchStop, payload: Some(a.w_best) });
                coordinator_stopped |= i == coordinator;
            }
        }
        if !coordinator_stopped {
            outbox.push(Message { round, sender: coordinator, kind: MessageKind::IncreaseW, payload: None });
        }
        if outbox.iter().any(|m| m.kind == MessageKind::SearchStop) {
            for a in &mut agents {
                a.searching = false;
            }
        }
        trace.extend(outbox.iter().cloned());
        inbox = outbox;
    }

    // each step moves some agent strictly down its finite set
    let max_settle: u64 = agents.iter().map(|a| a.w_hat.len() as u64).sum::<u64>() + 2;
    let mut settle_rounds = 0;
    loop {
        let observed: Vec<u32> = agents.iter().map(|a| a.w).collect();
        let lowest = tft_mac_reaction(&observed, u32::MAX);
        let mut moved = false;
        for a in &mut agents {
            if (lowest as f64) < a.w as f64 - a.epsilon {
                a.step_down();
                moved = true;
            }
        }
        if !moved {
            break;
        }
        settle_rounds += 1;
        if settle_rounds > max_settle {
            return Err(Error::AgentDisagreement(agents.iter().map(|a| a.w).collect()));
        }
    }
    let final_w: Vec<u32> = agents.iter().map(|a| a.w).collect();
    let spread = final_w.iter().max().unwrap() - final_w.iter().min().unwrap();
    if spread as f64 > epsilon {
        return Err(Error::AgentDisagreement(final_w));
    }
    Ok(SearchOutcome { final_w, agents, trace, scanned, settle_rounds })
}
