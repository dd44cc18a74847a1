//! Stationary state of the heterogeneous backoff chain.
//!
//! Each user `i` satisfies
//!
//! ```text
//! q_i = 1 - (1 - p_i)(1 - e_i)
//! tau_i = Gamma_i(q_i) = 2 / (W_i + 1 + q_i W_i sum_{l<m} (2 q_i)^l)
//! p_i = 1 - prod_{j != i} (1 - tau_j)
//! ```
//!
//! Writing `c = prod_j (1 - tau_j)`, user `i`'s equations collapse to
//! `(1 - q_i)(1 - Gamma_i(q_i)) = c (1 - e_i)`, whose left side is strictly
//! decreasing in `q_i`. So `q_i(c)` is a well defined decreasing function and
//! the whole system reduces to the scalar equation
//! `F(c) = prod_j (1 - Gamma_j(q_j(c))) - c = 0`, with `F` strictly
//! decreasing, `F(0) > 0` and `F(1) < 0`.

use serde::{Deserialize, Serialize};

use crate::numeric::bracketed_root;
use crate::{Error, Result};

pub const DEFAULT_MAX_STAGE: u32 = 5;

/// Tolerance on each inner `q_i(c)` root.
pub const INNER_TOL: f64 = 1e-14;
/// Residual every returned state must meet.
pub const RESIDUAL_TOL: f64 = 1e-10;
pub const MAX_OUTER_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MacProfile {
    pub cw: u32,
    pub max_stage: u32,
}

impl MacProfile {
    pub fn new(cw: u32, max_stage: u32) -> Result<Self> {
        let mac = MacProfile { cw, max_stage };
        mac.validate()?;
        Ok(mac)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cw <= 3 {
            return Err(Error::Precondition(format!("contention window must exceed 3 (got {})", self.cw)));
        }
        if self.max_stage < 1 {
            return Err(Error::Precondition("max_stage must be at least 1".into()));
        }
        if self.max_stage > 30 {
            return Err(Error::Precondition(format!("max_stage {} is unreasonably large", self.max_stage)));
        }
        Ok(())
    }

    pub fn gamma(&self, q: f64) -> f64 {
        gamma(q, self.cw, self.max_stage)
    }

    pub fn gamma_derivative(&self, q: f64) -> f64 {
        gamma_derivative(q, self.cw, self.max_stage)
    }

    /// Upper bound `2/(W+1)`, reached at `q = 0`.
    pub fn tau_upper(&self) -> f64 {
        2.0 / (self.cw as f64 + 1.0)
    }

    /// Lower bound `Gamma(1)`, reached when every attempt fails.
    pub fn tau_lower(&self) -> f64 {
        let w = self.cw as f64;
        2.0 / (w + 1.0 + w * ((1u64 << self.max_stage) as f64 - 1.0))
    }
}

/// `(q sum_{l<m} (2q)^l, d/dq of the same)`, by Horner on the polynomial
/// `sum_{l<m} 2^l q^(l+1)`.
fn backoff_poly(q: f64, m: u32) -> (f64, f64) {
    let mut value = 0.0;
    let mut slope = 0.0;
    for l in (0..m).rev() {
        let coeff = (1u64 << l) as f64;
        slope = slope * q + coeff * (l + 1) as f64;
        value = value * q + coeff;
    }
    (value * q, slope)
}

/// Attempt probability as a function of the per-attempt failure probability.
pub fn gamma(q: f64, cw: u32, m: u32) -> f64 {
    let w = cw as f64;
    2.0 / (w + 1.0 + w * backoff_poly(q, m).0)
}

/// Analytic `dGamma/dq`; never positive.
pub fn gamma_derivative(q: f64, cw: u32, m: u32) -> f64 {
    let w = cw as f64;
    let (poly, slope) = backoff_poly(q, m);
    let denom = w + 1.0 + w * poly;
    -2.0 * w * slope / (denom * denom)
}

/// `(1 - q)(1 - Gamma(q))`; strictly decreasing on `[0, 1]` when `W > 3`.
pub fn success_balance(mac: &MacProfile, q: f64) -> f64 {
    (1.0 - q) * (1.0 - mac.gamma(q))
}

/// User `i`'s own `(q_i, tau_i)` when the probability that nobody else
/// transmits is `idle_others`.
pub fn own_response(mac: &MacProfile, idle_others: f64, per: f64) -> (f64, f64) {
    let q = 1.0 - idle_others * (1.0 - per);
    (q, mac.gamma(q))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryState {
    pub tau: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub rho: Vec<f64>,
    /// `prod_j rho_j`, the probability of an idle slot.
    pub c: f64,
    pub residual: f64,
}

impl StationaryState {
    /// Build a state from attempt probabilities alone, deriving `p`, `q`,
    /// `rho` and `c`. The residual is left at zero.
    pub fn from_tau(tau: Vec<f64>, pers: &[f64]) -> Self {
        let rho: Vec<f64> = tau.iter().map(|t| 1.0 - t).collect();
        let idle_others = products_excluding(&rho);
        let p: Vec<f64> = idle_others.iter().map(|x| 1.0 - x).collect();
        let q = p.iter().zip(pers).map(|(p, e)| 1.0 - (1.0 - p) * (1.0 - e)).collect();
        let c = rho.iter().product();
        StationaryState { tau, p, q, rho, c, residual: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    /// `prod_{j != i} rho_j`.
    pub fn idle_others(&self, i: usize) -> f64 {
        1.0 - self.p[i]
    }
}

/// `out[i] = prod_{j != i} xs[j]`, without division.
pub fn products_excluding(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut out = vec![1.0; n];
    let mut acc = 1.0;
    for i in 0..n {
        out[i] = acc;
        acc *= xs[i];
    }
    acc = 1.0;
    for i in (0..n).rev() {
        out[i] *= acc;
        acc *= xs[i];
    }
    out
}

/// Users with identical `(cw, m, e)` share one inner solve.
struct Class {
    mac: MacProfile,
    per: f64,
    count: i32,
}

fn group(macs: &[MacProfile], pers: &[f64]) -> (Vec<Class>, Vec<usize>) {
    let mut classes: Vec<Class> = Vec::new();
    let mut index = Vec::with_capacity(macs.len());
    for (mac, &per) in macs.iter().zip(pers) {
        let k = match classes.iter().position(|c| c.mac == *mac && c.per.to_bits() == per.to_bits()) {
            Some(k) => k,
            None => {
                classes.push(Class { mac: *mac, per, count: 0 });
                classes.len() - 1
            }
        };
        classes[k].count += 1;
        index.push(k);
    }
    (classes, index)
}

/// `q` solving `(1 - q)(1 - Gamma(q)) = target`, or 0 when the target is
/// above the curve's maximum.
fn inner_q(mac: &MacProfile, target: f64) -> f64 {
    let top = success_balance(mac, 0.0);
    if target >= top {
        return 0.0;
    }
    if target <= 0.0 {
        return 1.0;
    }
    bracketed_root(|q| success_balance(mac, q) - target, 0.0, 1.0, INNER_TOL, 400)
        .expect("success balance brackets every target in (0, h(0))")
}

fn validate_inputs(macs: &[MacProfile], pers: &[f64]) -> Result<()> {
    if macs.is_empty() {
        return Err(Error::Precondition("at least one user is required".into()));
    }
    if macs.len() != pers.len() {
        return Err(Error::Precondition(format!("{} MAC profiles but {} error rates", macs.len(), pers.len())));
    }
    for (i, (mac, &e)) in macs.iter().zip(pers).enumerate() {
        mac.validate().map_err(|err| match err {
            Error::Precondition(msg) => Error::Precondition(format!("user {i}: {msg}")),
            other => other,
        })?;
        if !(0.0..1.0).contains(&e) {
            return Err(Error::Precondition(format!("user {i}: packet error rate {e} not in [0, 1)")));
        }
    }
    Ok(())
}

/// Unique stationary state for the given CW profiles and packet error rates.
pub fn solve_stationary(macs: &[MacProfile], pers: &[f64]) -> Result<StationaryState> {
    validate_inputs(macs, pers)?;
    let (classes, index) = group(macs, pers);

    let class_q = |c: f64| -> Vec<f64> { classes.iter().map(|k| inner_q(&k.mac, c * (1.0 - k.per))).collect() };
    let outer = |c: f64| -> f64 {
        let idle: f64 = classes.iter().zip(class_q(c)).map(|(k, q)| (1.0 - k.mac.gamma(q)).powi(k.count)).product();
        idle - c
    };
    let c = bracketed_root(outer, 0.0, 1.0, 1e-16, MAX_OUTER_ITER).map_err(|err| match err {
        Error::NoConvergence(msg) => Error::NoConvergence(format!("stationary solve: {msg}")),
        other => other,
    })?;

    let qs = class_q(c);
    let tau: Vec<f64> = index.iter().map(|&k| classes[k].mac.gamma(qs[k])).collect();
    let mut state = StationaryState::from_tau(tau, pers);
    state.residual = residual(&state, macs, pers);
    if !(state.residual <= RESIDUAL_TOL) {
        return Err(Error::NoConvergence(format!("stationary residual {} exceeds {RESIDUAL_TOL}", state.residual)));
    }
    Ok(state)
}

/// Largest violation of the three defining equations.
pub fn residual(state: &StationaryState, macs: &[MacProfile], pers: &[f64]) -> f64 {
    let n = macs.len();
    assert!(state.tau.len() == n && state.p.len() == n && state.q.len() == n && pers.len() == n);
    let rho: Vec<f64> = state.tau.iter().map(|t| 1.0 - t).collect();
    let idle_others = products_excluding(&rho);
    (0..n)
        .flat_map(|i| {
            [
                (state.q[i] - (1.0 - (1.0 - state.p[i]) * (1.0 - pers[i]))).abs(),
                (state.tau[i] - macs[i].gamma(state.q[i])).abs(),
                (state.p[i] - (1.0 - idle_others[i])).abs(),
            ]
        })
        .fold(0.0, f64::max)
}
