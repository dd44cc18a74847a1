//! Per-user effective throughput from a stationary state.
//!
//! `S_i = P_succ,i * R_i T / E[slot]` with `P_succ,i = tau_i prod_{j != i} rho_j (1 - e_i)`,
//! i.e. `S_i = tau_i prod_{j != i} rho_j G_i T / E[slot]`. The expected
//! virtual slot length is either the busy/idle approximation
//! `(1 - prod rho) T + prod rho sigma` or the exact scenario sum.

use serde::{Deserialize, Serialize};

use crate::markov::StationaryState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingParams {
    /// Packet transmission time `T`, seconds.
    pub airtime: f64,
    /// Empty slot duration.
    pub sigma: f64,
    pub sifs: f64,
    pub difs: f64,
    pub ack: f64,
}

impl TimingParams {
    pub const DEFAULT_SIGMA: f64 = 20e-6;

    /// 20 us slots, 10 us SIFS, 50 us DIFS, ACK folded into the airtime.
    pub fn standard(airtime: f64) -> Self {
        TimingParams { airtime, sigma: Self::DEFAULT_SIGMA, sifs: 10e-6, difs: 50e-6, ack: 0.0 }
    }

    /// Busy slots last exactly `T`; only the idle slot has its own length.
    pub fn idealized(airtime: f64) -> Self {
        TimingParams { airtime, sigma: Self::DEFAULT_SIGMA, sifs: 0.0, difs: 0.0, ack: 0.0 }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if !(self.airtime > 0.0 && self.airtime.is_finite()) {
            return Err(crate::Error::Domain(format!("airtime must be > 0 (got {})", self.airtime)));
        }
        for (name, v) in [("sigma", self.sigma), ("sifs", self.sifs), ("difs", self.difs), ("ack", self.ack)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(crate::Error::Domain(format!("{name} must be >= 0 (got {v})")));
            }
        }
        Ok(())
    }

    /// Duration of a successful exchange.
    pub fn success_time(&self) -> f64 {
        self.airtime + self.sifs + self.ack + self.difs
    }

    /// Duration of a failed exchange (collision or corrupted packet).
    pub fn failure_time(&self) -> f64 {
        self.airtime + self.sifs
    }

    /// `sigma / T`, the only timing ratio the approximate model depends on.
    pub fn kappa(&self) -> f64 {
        self.sigma / self.airtime
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotMode {
    /// `(1 - prod rho) T + prod rho sigma`.
    #[default]
    Approx,
    /// Idle, success, channel error and collision slots, each with its own duration.
    Exact,
}

/// Expected duration of one virtual slot.
pub fn slot_duration(state: &StationaryState, timing: &TimingParams, pers: &[f64], mode: SlotMode) -> f64 {
    let idle = state.c;
    match mode {
        SlotMode::Approx => (1.0 - idle) * timing.airtime + idle * timing.sigma,
        SlotMode::Exact => {
            let mut success = 0.0;
            let mut corrupted = 0.0;
            for (i, &e) in pers.iter().enumerate().take(state.len()) {
                let alone = state.tau[i] * state.idle_others(i);
                success += alone * (1.0 - e);
                corrupted += alone * e;
            }
            let collision = (1.0 - idle - success - corrupted).max(0.0);
            idle * timing.sigma + success * timing.success_time() + (corrupted + collision) * timing.failure_time()
        }
    }
}

fn throughput_with_slot(state: &StationaryState, i: usize, goodput: f64, airtime: f64, slot: f64) -> f64 {
    let numer = state.tau[i] * state.idle_others(i) * goodput * airtime;
    if numer == 0.0 || slot <= 0.0 {
        0.0
    } else {
        numer / slot
    }
}

/// Throughput of user `i` given its goodput `G_i(R_i)`. All-idle states
/// yield zero.
pub fn user_throughput(
    state: &StationaryState,
    i: usize,
    goodput: f64,
    timing: &TimingParams,
    pers: &[f64],
    mode: SlotMode,
) -> f64 {
    let slot = slot_duration(state, timing, pers, mode);
    throughput_with_slot(state, i, goodput, timing.airtime, slot)
}

/// Every user's throughput, sharing one slot-duration evaluation.
pub fn user_throughputs(
    state: &StationaryState,
    goodputs: &[f64],
    timing: &TimingParams,
    pers: &[f64],
    mode: SlotMode,
) -> Vec<f64> {
    let slot = slot_duration(state, timing, pers, mode);
    goodputs.iter().enumerate().map(|(i, &g)| throughput_with_slot(state, i, g, timing.airtime, slot)).collect()
}

/// Social welfare `sum_i S_i`.
pub fn aggregate_throughput(
    state: &StationaryState,
    goodputs: &[f64],
    timing: &TimingParams,
    pers: &[f64],
    mode: SlotMode,
) -> f64 {
    user_throughputs(state, goodputs, timing, pers, mode).iter().sum()
}
