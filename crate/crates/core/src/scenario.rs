//! JSON-facing scenario description and its conversion into a game.

use serde::{Deserialize, Serialize};

use crate::channel::{Channel, LinkParams, Modulation, RateWindow};
use crate::dcf_sim::{NodeSpec, SimConfig, TftMode};
use crate::mac_game::{DEFAULT_SCAN_CAP, MIN_ANALYTIC_CW};
use crate::markov::{MacProfile, DEFAULT_MAX_STAGE};
use crate::rate_game::{AMode, GameContext, UserProfile};
use crate::throughput::TimingParams;

/// A validation failure located by a JSON-style path such as `users[2].snr_db`.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

fn field(path: impl Into<String>, message: impl Into<String>) -> FieldError {
    FieldError { path: path.into(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserGroup {
    #[serde(default = "one")]
    pub count: usize,
    pub snr_db: f64,
    #[serde(default = "Modulation::qam64")]
    pub modulation: Modulation,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_hz: f64,
    #[serde(default = "default_r_min")]
    pub r_min: f64,
    #[serde(default = "default_r_max")]
    pub r_max: f64,
    /// Initial contention window; the games override it.
    #[serde(default = "default_cw")]
    pub cw: u32,
    #[serde(default)]
    pub class: Option<String>,
}

fn one() -> usize {
    1
}
fn default_bandwidth() -> f64 {
    20e6
}
fn default_r_min() -> f64 {
    1e6
}
fn default_r_max() -> f64 {
    100e6
}
fn default_cw() -> u32 {
    32
}
fn default_max_stage() -> u32 {
    DEFAULT_MAX_STAGE
}
fn default_airtime() -> f64 {
    1e-3
}

impl UserGroup {
    pub fn new(count: usize, snr_db: f64) -> Self {
        UserGroup {
            count,
            snr_db,
            modulation: Modulation::qam64(),
            bandwidth_hz: default_bandwidth(),
            r_min: default_r_min(),
            r_max: default_r_max(),
            cw: default_cw(),
            class: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingConfig {
    #[serde(default = "default_airtime")]
    pub airtime: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_sifs")]
    pub sifs: f64,
    #[serde(default = "default_difs")]
    pub difs: f64,
    #[serde(default)]
    pub ack: f64,
}

fn default_sigma() -> f64 {
    TimingParams::DEFAULT_SIGMA
}
fn default_sifs() -> f64 {
    10e-6
}
fn default_difs() -> f64 {
    50e-6
}

impl Default for TimingConfig {
    fn default() -> Self {
        let t = TimingParams::standard(default_airtime());
        TimingConfig { airtime: t.airtime, sigma: t.sigma, sifs: t.sifs, difs: t.difs, ack: t.ack }
    }
}

impl From<TimingConfig> for TimingParams {
    fn from(t: TimingConfig) -> Self {
        TimingParams { airtime: t.airtime, sigma: t.sigma, sifs: t.sifs, difs: t.difs, ack: t.ack }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementMode {
    #[default]
    Analytic,
    Simulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameOptions {
    /// Window scan step.
    #[serde(default = "default_step")]
    pub step: u32,
    /// Utility tolerance of the distributed search.
    #[serde(default)]
    pub epsilon: f64,
    /// Largest window scanned when no finite bound exists.
    #[serde(default = "default_scan_cap")]
    pub scan_cap: u32,
    #[serde(default)]
    pub a_mode: AMode,
    /// Rate equilibrium tolerance relative to the largest `r_max`.
    #[serde(default = "default_rate_tol")]
    pub rate_tol: f64,
    #[serde(default)]
    pub measurement: MeasurementMode,
}

fn default_step() -> u32 {
    1
}
fn default_scan_cap() -> u32 {
    DEFAULT_SCAN_CAP
}
fn default_rate_tol() -> f64 {
    1e-6
}

impl Default for GameOptions {
    fn default() -> Self {
        GameOptions {
            step: default_step(),
            epsilon: 0.0,
            scan_cap: default_scan_cap(),
            a_mode: AMode::default(),
            rate_tol: default_rate_tol(),
            measurement: MeasurementMode::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimOptions {
    #[serde(default = "default_slots")]
    pub slots: u64,
    #[serde(default = "default_observation_window")]
    pub observation_window: u64,
    #[serde(default)]
    pub tft: TftMode,
    /// Busy slots last exactly the airtime when set.
    #[serde(default = "yes")]
    pub idealized_timing: bool,
}

fn default_slots() -> u64 {
    1_000_000
}
fn default_observation_window() -> u64 {
    10_000
}
fn yes() -> bool {
    true
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            slots: default_slots(),
            observation_window: default_observation_window(),
            tft: TftMode::Off,
            idealized_timing: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// Every user takes the first group's parameters.
    #[default]
    Symmetric,
    /// Users alternate between the first two groups.
    TwoClass,
    /// SNR drawn uniformly from `snr_range` per user and draw.
    Asymmetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepOptions {
    #[serde(default)]
    pub kind: SweepKind,
    pub n: Vec<usize>,
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default = "default_snr_range")]
    pub snr_range: [f64; 2],
}

fn default_draws() -> usize {
    100
}
fn default_snr_range() -> [f64; 2] {
    [5.0, 25.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub users: Vec<UserGroup>,
    #[serde(default)]
    pub timing: TimingConfig,
    #[serde(default = "default_max_stage")]
    pub max_stage: u32,
    #[serde(default)]
    pub game: GameOptions,
    #[serde(default)]
    pub simulation: SimOptions,
    #[serde(default)]
    pub sweep: Option<SweepOptions>,
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    /// `n` users at `snr_db` with every other setting at its default.
    pub fn symmetric(n: usize, snr_db: f64) -> Self {
        Scenario {
            users: vec![UserGroup::new(n, snr_db)],
            timing: TimingConfig::default(),
            max_stage: DEFAULT_MAX_STAGE,
            game: GameOptions::default(),
            simulation: SimOptions::default(),
            sweep: None,
            seed: 0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, FieldError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            field(if path == "." { String::from("$") } else { path }, e.into_inner().to_string())
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn user_count(&self) -> usize {
        self.users.iter().map(|g| g.count).sum()
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        if self.users.is_empty() {
            return Err(field("users", "at least one user group is required"));
        }
        for (k, g) in self.users.iter().enumerate() {
            let p = |f: &str| format!("users[{k}].{f}");
            if g.count == 0 {
                return Err(field(p("count"), "must be at least 1"));
            }
            if !g.snr_db.is_finite() {
                return Err(field(p("snr_db"), "must be finite"));
            }
            g.modulation.validate().map_err(|e| field(p("modulation"), e.to_string()))?;
            if !(g.bandwidth_hz > 0.0 && g.bandwidth_hz.is_finite()) {
                return Err(field(p("bandwidth_hz"), "must be > 0"));
            }
            if !(g.r_min > 0.0 && g.r_min.is_finite()) {
                return Err(field(p("r_min"), "must be > 0"));
            }
            if !(g.r_max > g.r_min && g.r_max.is_finite()) {
                return Err(field(p("r_max"), "must exceed r_min"));
            }
            if g.cw < MIN_ANALYTIC_CW {
                return Err(field(p("cw"), format!("must be at least {MIN_ANALYTIC_CW}")));
            }
        }
        TimingParams::from(self.timing).validate().map_err(|e| field("timing", e.to_string()))?;
        if !(1..=30).contains(&self.max_stage) {
            return Err(field("max_stage", "must be in 1..=30"));
        }
        let g = &self.game;
        if g.step == 0 {
            return Err(field("game.step", "must be at least 1"));
        }
        if !(g.epsilon >= 0.0 && g.epsilon.is_finite()) {
            return Err(field("game.epsilon", "must be >= 0"));
        }
        if g.scan_cap < MIN_ANALYTIC_CW {
            return Err(field("game.scan_cap", format!("must be at least {MIN_ANALYTIC_CW}")));
        }
        if !(g.rate_tol > 0.0 && g.rate_tol < 1.0) {
            return Err(field("game.rate_tol", "must be in (0, 1)"));
        }
        if self.simulation.slots == 0 {
            return Err(field("simulation.slots", "must be at least 1"));
        }
        if self.simulation.observation_window == 0 {
            return Err(field("simulation.observation_window", "must be at least 1"));
        }
        if let Some(s) = &self.sweep {
            if s.n.is_empty() || s.n.contains(&0) {
                return Err(field("sweep.n", "must list positive user counts"));
            }
            if s.draws == 0 {
                return Err(field("sweep.draws", "must be at least 1"));
            }
            let [lo, hi] = s.snr_range;
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(field("sweep.snr_range", "must be an ordered finite pair"));
            }
            if s.kind == SweepKind::TwoClass && self.users.len() < 2 {
                return Err(field("sweep.kind", "two_class needs two user groups"));
            }
        }
        Ok(())
    }

    pub fn timing(&self) -> TimingParams {
        self.timing.into()
    }

    fn profile(&self, g: &UserGroup, snr_db: f64) -> crate::Result<UserProfile> {
        Ok(UserProfile {
            mac: MacProfile::new(g.cw, self.max_stage)?,
            channel: Channel::new(
                LinkParams::new(snr_db, g.bandwidth_hz, g.modulation)?,
                RateWindow::new(g.r_min, g.r_max, self.timing.airtime)?,
            )?,
        })
    }

    /// Users in group order, each group expanded `count` times.
    pub fn users(&self) -> crate::Result<Vec<UserProfile>> {
        let mut out = Vec::with_capacity(self.user_count());
        for g in &self.users {
            let p = self.profile(g, g.snr_db)?;
            out.extend(std::iter::repeat_n(p, g.count));
        }
        Ok(out)
    }

    /// Class label of every expanded user.
    pub fn classes(&self) -> Vec<Option<String>> {
        self.users.iter().flat_map(|g| std::iter::repeat_n(g.class.clone(), g.count)).collect()
    }

    pub fn context(&self) -> crate::Result<GameContext> {
        Ok(GameContext::new(self.users()?, self.timing())?.with_a_mode(self.game.a_mode))
    }

    /// `n` copies of the first group.
    pub fn symmetric_context(&self, n: usize) -> crate::Result<GameContext> {
        let p = self.profile(&self.users[0], self.users[0].snr_db)?;
        Ok(GameContext::symmetric(n, p, self.timing())?.with_a_mode(self.game.a_mode))
    }

    /// `n` users alternating between the first two groups, first group first.
    pub fn two_class_context(&self, n: usize) -> crate::Result<GameContext> {
        if self.users.len() < 2 {
            return Err(crate::Error::Precondition("two-class scenarios need two user groups".into()));
        }
        let a = self.profile(&self.users[0], self.users[0].snr_db)?;
        let b = self.profile(&self.users[1], self.users[1].snr_db)?;
        let users = (0..n).map(|i| if i % 2 == 0 { a } else { b }).collect();
        Ok(GameContext::new(users, self.timing())?.with_a_mode(self.game.a_mode))
    }

    /// First group's parameters with per-user SNRs.
    pub fn context_with_snrs(&self, snrs: &[f64]) -> crate::Result<GameContext> {
        let users = snrs.iter().map(|&s| self.profile(&self.users[0], s)).collect::<crate::Result<_>>()?;
        Ok(GameContext::new(users, self.timing())?.with_a_mode(self.game.a_mode))
    }

    /// Slot timing seen by the simulator.
    pub fn sim_timing(&self) -> TimingParams {
        if self.simulation.idealized_timing {
            TimingParams { sigma: self.timing.sigma, ..TimingParams::idealized(self.timing.airtime) }
        } else {
            self.timing()
        }
    }

    /// Simulation of `ctx` at the given windows and rates.
    pub fn sim_config(&self, ctx: &GameContext, cws: &[u32], rates: &[f64]) -> SimConfig {
        let timing = self.sim_timing();
        let nodes = ctx
            .users
            .iter()
            .zip(cws.iter().zip(rates))
            .map(|(u, (&cw, &rate))| NodeSpec {
                cw,
                max_stage: u.mac.max_stage,
                rate,
                per: u.channel.per(rate),
                airtime: self.timing.airtime,
                link: Some(u.channel.link),
            })
            .collect();
        SimConfig {
            nodes,
            virtual_slots: self.simulation.slots,
            seed: self.seed,
            timing,
            tft: self.simulation.tft,
            observation_window: self.simulation.observation_window,
        }
    }
}
