//! Virtual-slot simulator of saturated DCF backoff with selfish nodes.
//!
//! The clock ticks once per virtual slot: an idle slot, a success, or a
//! failed transmission. Every node whose counter is zero transmits; all
//! other counters decrement by one, busy slot or not (there is no freezing,
//! matching the analytic chain). Runs of idle slots are skipped in one step.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{packet_error_rate, LinkParams};
use crate::throughput::TimingParams;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub cw: u32,
    pub max_stage: u32,
    pub rate: f64,
    pub per: f64,
    /// Packet airtime in seconds.
    pub airtime: f64,
    /// When present, `per` is recomputed whenever the airtime changes.
    #[serde(default)]
    pub link: Option<LinkParams>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TftMode {
    #[default]
    Off,
    /// Adopt the smallest observed contention window.
    Mac,
    /// Also adopt the longest observed packet airtime.
    MacAndRate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub nodes: Vec<NodeSpec>,
    pub virtual_slots: u64,
    pub seed: u64,
    pub timing: TimingParams,
    #[serde(default)]
    pub tft: TftMode,
    /// Slots between two tit-for-tat observations.
    pub observation_window: u64,
}

impl SimConfig {
    pub fn new(nodes: Vec<NodeSpec>, virtual_slots: u64, seed: u64, timing: TimingParams) -> Self {
        SimConfig { nodes, virtual_slots, seed, timing, tft: TftMode::Off, observation_window: virtual_slots }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Precondition("simulation needs at least one node".into()));
        }
        if self.virtual_slots == 0 {
            return Err(Error::Precondition("virtual_slots must be at least 1".into()));
        }
        if self.observation_window == 0 {
            return Err(Error::Precondition("observation_window must be at least 1".into()));
        }
        self.timing.validate()?;
        for (i, n) in self.nodes.iter().enumerate() {
            if n.cw == 0 {
                return Err(Error::Precondition(format!("node {i}: cw must be at least 1")));
            }
            if n.max_stage > 30 {
                return Err(Error::Precondition(format!("node {i}: max_stage {} too large", n.max_stage)));
            }
            if !(0.0..=1.0).contains(&n.per) {
                return Err(Error::Precondition(format!("node {i}: per {} not in [0, 1]", n.per)));
            }
            if !(n.rate > 0.0 && n.airtime > 0.0) {
                return Err(Error::Precondition(format!("node {i}: rate and airtime must be > 0")));
            }
        }
        Ok(())
    }
}

/// One node's backoff state and counters.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub spec: NodeSpec,
    pub stage: u32,
    pub counter: u64,
    pub attempts: u64,
    pub successes: u64,
    pub collisions: u64,
    pub channel_errors: u64,
}

impl Node {
    pub fn new(spec: NodeSpec, rng: &mut impl Rng) -> Self {
        let mut node = Node { spec, stage: 0, counter: 0, attempts: 0, successes: 0, collisions: 0, channel_errors: 0 };
        node.counter = rng.gen_range(0..node.window());
        node
    }

    /// `2^stage W`, the width of the current backoff draw.
    pub fn window(&self) -> u64 {
        (self.spec.cw as u64) << self.stage
    }

    /// Back to stage 0 with a fresh counter in `[0, W - 1]`.
    pub fn on_success(&mut self, rng: &mut impl Rng) {
        self.stage = 0;
        self.counter = rng.gen_range(0..self.window());
    }

    /// Next stage, capped at `m`, with a fresh counter in `[0, 2^stage W - 1]`.
    pub fn on_failure(&mut self, rng: &mut impl Rng) {
        self.stage = (self.stage + 1).min(self.spec.max_stage);
        self.counter = rng.gen_range(0..self.window());
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeStats {
    pub attempts: u64,
    pub successes: u64,
    pub collisions: u64,
    pub channel_errors: u64,
    /// Attempts per virtual slot.
    pub tau_hat: f64,
    /// Fraction of attempts that collided.
    pub p_hat: f64,
    /// Delivered payload bits per second of simulated time.
    pub throughput: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub slots: u64,
    pub idle_slots: u64,
    /// Simulated seconds.
    pub elapsed: f64,
    pub nodes: Vec<NodeStats>,
}

struct Engine {
    nodes: Vec<Node>,
    timing: TimingParams,
    rng: ChaCha8Rng,
    slots: u64,
    idle_slots: u64,
    elapsed: f64,
}

impl Engine {
    fn new(config: &SimConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let nodes = config.nodes.iter().map(|s| Node::new(*s, &mut rng)).collect();
        Engine { nodes, timing: config.timing, rng, slots: 0, idle_slots: 0, elapsed: 0.0 }
    }

    /// Advance by at most `budget` virtual slots; returns the slots consumed.
    fn step(&mut self, budget: u64) -> u64 {
        let next = self.nodes.iter().map(|n| n.counter).min().unwrap_or(0);
        if next > 0 {
            let run = next.min(budget);
            for n in &mut self.nodes {
                n.counter -= run;
            }
            self.slots += run;
            self.idle_slots += run;
            self.elapsed += run as f64 * self.timing.sigma;
            return run;
        }
        let transmitters: Vec<usize> = (0..self.nodes.len()).filter(|&i| self.nodes[i].counter == 0).collect();
        let t = self.timing;
        if let [i] = transmitters[..] {
            let node = &mut self.nodes[i];
            node.attempts += 1;
            if self.rng.gen::<f64>() < node.spec.per {
                node.channel_errors += 1;
                self.elapsed += node.spec.airtime + t.sifs;
                node.on_failure(&mut self.rng);
            } else {
                node.successes += 1;
                self.elapsed += node.spec.airtime + t.sifs + t.ack + t.difs;
                node.on_success(&mut self.rng);
            }
        } else {
            let mut longest: f64 = 0.0;
            for &i in &transmitters {
                let node = &mut self.nodes[i];
                node.attempts += 1;
                node.collisions += 1;
                longest = longest.max(node.spec.airtime);
                node.on_failure(&mut self.rng);
            }
            self.elapsed += longest + t.sifs;
        }
        for (i, n) in self.nodes.iter_mut().enumerate() {
            if !transmitters.contains(&i) {
                n.counter -= 1;
            }
        }
        self.slots += 1;
        1
    }

    fn run(&mut self, slots: u64) {
        let mut left = slots;
        while left > 0 {
            left -= self.step(left);
        }
    }

    fn stats(&self) -> SimStats {
        let nodes = self
            .nodes
            .iter()
            .map(|n| NodeStats {
                attempts: n.attempts,
                successes: n.successes,
                collisions: n.collisions,
                channel_errors: n.channel_errors,
                tau_hat: n.attempts as f64 / self.slots.max(1) as f64,
                p_hat: if n.attempts == 0 { 0.0 } else { n.collisions as f64 / n.attempts as f64 },
                throughput: if self.elapsed > 0.0 {
                    n.successes as f64 * n.spec.rate * n.spec.airtime / self.elapsed
                } else {
                    0.0
                },
            })
            .collect();
        SimStats { slots: self.slots, idle_slots: self.idle_slots, elapsed: self.elapsed, nodes }
    }
}

/// Runs `config.virtual_slots` slots without tit-for-tat reactions.
pub fn simulate(config: &SimConfig) -> Result<SimStats> {
    config.validate()?;
    let mut engine = Engine::new(config);
    engine.run(config.virtual_slots);
    Ok(engine.stats())
}

/// One node's state at the end of an observation window. Window 0 is the
/// initial configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TftRecord {
    pub window: u64,
    pub node: usize,
    pub cw: u32,
    pub airtime: f64,
    /// Throughput measured over the window just finished.
    pub throughput: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TftTrace {
    pub records: Vec<TftRecord>,
    pub stats: SimStats,
}

impl TftTrace {
    /// `(cw, airtime)` of every node at the end of window `w`.
    pub fn snapshot(&self, window: u64) -> Vec<(u32, f64)> {
        self.records.iter().filter(|r| r.window == window).map(|r| (r.cw, r.airtime)).collect()
    }

    /// First window after which every node holds the same `(cw, airtime)`
    /// until the end of the trace.
    pub fn converged_at(&self) -> Option<u64> {
        let last = self.records.iter().map(|r| r.window).max()?;
        let uniform = |w: u64| {
            let snap = self.snapshot(w);
            snap.windows(2).all(|p| p[0] == p[1])
        };
        let mut first = None;
        for w in (0..=last).rev() {
            if uniform(w) && (w == last || self.snapshot(w) == self.snapshot(w + 1)) {
                first = Some(w);
            } else {
                break;
            }
        }
        first
    }

    /// Records as CSV: `window,node,W,airtime,throughput`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("window,node,W,airtime,throughput\n");
        for r in &self.records {
            out.push_str(&format!("{},{},{},{:e},{:e}\n", r.window, r.node, r.cw, r.airtime, r.throughput));
        }
        out
    }
}

/// Simulates with tit-for-tat reactions at the end of every observation
/// window: each node observes all contention windows and airtimes from the
/// same snapshot and adopts the minimum window and (with `MacAndRate`) the
/// maximum airtime.
pub fn simulate_tft(config: &SimConfig) -> Result<TftTrace> {
    config.validate()?;
    if config.tft == TftMode::Off {
        return Err(Error::Precondition("simulate_tft needs tit-for-tat enabled".into()));
    }
    let mut engine = Engine::new(config);
    let mut records = Vec::new();
    let record = |engine: &Engine, window: u64, delivered: &[f64], span: f64, records: &mut Vec<TftRecord>| {
        for (i, n) in engine.nodes.iter().enumerate() {
            records.push(TftRecord {
                window,
                node: i,
                cw: n.spec.cw,
                airtime: n.spec.airtime,
                throughput: if span > 0.0 { delivered[i] / span } else { 0.0 },
            });
        }
    };
    let zeros = vec![0.0; engine.nodes.len()];
    record(&engine, 0, &zeros, 0.0, &mut records);

    let mut left = config.virtual_slots;
    let mut window = 0;
    while left > 0 {
        let span = config.observation_window.min(left);
        let before: Vec<f64> = engine.nodes.iter().map(|n| n.successes as f64 * n.spec.rate * n.spec.airtime).collect();
        let t0 = engine.elapsed;
        engine.run(span);
        left -= span;
        window += 1;

        let observed: Vec<(u32, f64)> = engine.nodes.iter().map(|n| (n.spec.cw, n.spec.airtime)).collect();
        let min_cw = observed.iter().map(|o| o.0).min().unwrap_or(1);
        let max_airtime = observed.iter().map(|o| o.1).fold(0.0, f64::max);
        let delivered: Vec<f64> = engine
            .nodes
            .iter()
            .zip(&before)
            .map(|(n, b)| n.successes as f64 * n.spec.rate * n.spec.airtime - b)
            .collect();
        for n in &mut engine.nodes {
            n.spec.cw = tft_min(min_cw, n.spec.cw);
            if config.tft == TftMode::MacAndRate && max_airtime > n.spec.airtime {
                n.spec.airtime = max_airtime;
                if let Some(link) = n.spec.link {
                    n.spec.per = packet_error_rate(&link, n.spec.rate, max_airtime)?;
                }
            }
        }
        record(&engine, window, &delivered, engine.elapsed - t0, &mut records);
    }
    Ok(TftTrace { records, stats: engine.stats() })
}

fn tft_min(observed_min: u32, own: u32) -> u32 {
    observed_min.min(own)
}
