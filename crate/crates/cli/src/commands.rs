//! One function per subcommand. Each fills the output directory and returns
//! a short human-readable summary.

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wlan_game::dcf_sim::{simulate, simulate_tft, TftMode};
use wlan_game::mac_game::{
    algorithm1_run, refined_equilibrium, AnalyticMeasurement, CwBound, Measurement, SimulatedMeasurement,
};
use wlan_game::oracle::{price_of_anarchy, rate_game_poa, social_optimum, OracleOptions};
use wlan_game::rate_game::{certify_unique_ne, rate_equilibrium, GameContext};
use wlan_game::scenario::{MeasurementMode, Scenario, SweepKind};
use wlan_game::throughput::{user_throughputs, SlotMode};

use crate::output::{OutDir, Table};
use crate::{parallel, row, Command};

pub fn dispatch(command: Command, scenario: &Scenario, out: &mut OutDir) -> Result<String> {
    match command {
        Command::Stationary => stationary(scenario, out),
        Command::RateNe => rate_ne(scenario, out),
        Command::MacNe => mac_ne(scenario, out),
        Command::Algo1 => algo1(scenario, out),
        Command::Optimum => optimum(scenario, out),
        Command::Poa => poa(scenario, out),
        Command::Sweep => sweep(scenario, out),
        Command::Simulate => simulate_cmd(scenario, out),
        Command::Validate => validate(scenario, out),
    }
}

fn rate_tol(scenario: &Scenario, ctx: &GameContext) -> f64 {
    scenario.game.rate_tol * ctx.largest_r_max()
}

fn label(classes: &[Option<String>], i: usize) -> String {
    classes[i].clone().unwrap_or_default()
}

fn bound_cell(b: CwBound) -> String {
    match b {
        CwBound::Finite(w) => w.to_string(),
        CwBound::Unbounded => "unbounded".into(),
    }
}

/// Header: `user,class,cw,rate,per,tau,p,q,residual`.
fn stationary(scenario: &Scenario, out: &mut OutDir) -> Result<String> {
    let ctx = scenario.context()?;
    let rates = rate_equilibrium(&ctx, rate_tol(scenario, &ctx))?.rates;
    let pers = ctx.pers(&rates);
    let state = ctx.state(&rates)?;
    let classes = scenario.classes();
    let mut t = Table::new(&["user", "class", "cw", "rate", "per", "tau", "p", "q", "residual"]);
    for i in 0..ctx.len() {
        t.push(row![
            i,
            label(&classes, i),
            ctx.users[i].mac.cw,
            rates[i],
            pers[i],
            state.tau[i],
            state.p[i],
            state.q[i],
            state.residual
        ]);
    }
    out.table("stationary.csv", &t)?;
    Ok(format!("idle probability {:.6}, residual {:.1e}", state.c, state.residual))
}

/// Header: `user,class,snr_db,cw,rate,rate_from_above,per,goodput,throughput`.
fn rate_ne(scenario: &Scenario, out: &mut OutDir) -> Result<String> {
    let ctx = scenario.context()?;
    let cert = certify_unique_ne(&ctx, rate_tol(scenario, &ctx))?;
    let rates = &cert.from_below.rates;
    let pers = ctx.pers(rates);
    let goodputs = ctx.goodputs(rates);
    let s = ctx.throughputs(rates)?;
    let classes = scenario.classes();
    let mut t =
        Table::new(&["user", "class", "snr_db", "cw", "rate", "rate_from_above", "per", "goodput", "throughput"]);
    for i in 0..ctx.len() {
        t.push(row![
            i,
            label(&classes, i),
            ctx.users[i].channel.link.snr_db,
            ctx.users[i].mac.cw,
            rates[i],
            cert.from_above.rates[i],
            pers[i],
            goodputs[i],
            s[i]
        ]);
    }
    out.table("rate_ne.csv", &t)?;
    Ok(format!("certified with gap {:.3e} b/s, welfare {:.6e} b/s", cert.gap, s.iter().sum::<f64>()))
}

/// `mac_ne.csv`: `user,class,snr_db,rate,throughput` at W*.
/// `mac_ne_summary.csv`: `W_star,equilibria,welfare,scan_limit,windows_scanned`.
/// `utilities.csv`: `W,user,utility,member` for every scanned window.
fn mac_ne(scenario: &Scenario, out: &mut OutDir) -> Result<String> {
    let ctx = scenario.context()?;
    let eq = refined_equilibrium(&ctx, scenario.game.step, scenario.game.scan_cap)?;
    let classes = scenario.classes();
    let mut t = Table::new(&["user", "class", "snr_db", "rate", "throughput"]);
    for i in 0..ctx.len() {
        t.push(row![
            i,
            label(&classes, i),
            ctx.users[i].channel.link.snr_db,
            eq.rates.get(i).copied(),
            eq.throughputs.get(i).copied()
        ]);
    }
    out.table("mac_ne.csv", &t)?;

    let mut s = Table::new(&["W_star", "equilibria", "welfare", "scan_limit", "windows_scanned"]);
    s.push(row![eq.w_star, eq.equilibria.len(), eq.welfare, bound_cell(eq.scan_limit), eq.scanned.len()]);
    out.table("mac_ne_summary.csv", &s)?;

    let mut u = Table::new(&["W", "user", "utility", "member"]);
    for (k, &w) in eq.scanned.iter().enumerate() {
        for (i, &v) in eq.utilities[k].iter().enumerate() {
            u.push(row![w, i, v, eq.sets[i].contains(w)]);
        }
    }
    out.table("utilities.csv", &u)?;
    Ok(format!("W* = {}, welfare {:.6e} b/s", eq.w_star, eq.welfare))
}

/// `algo1.csv`: `agent,final_W,best_W,recorded`.
/// `algo1_trace.csv`: `round,sender,kind,payload`.
fn algo1(scenario: &Scenario, out: &mut OutDir) -> Result<String> {
    let ctx = scenario.context()?;
    let g = &scenario.game;
    let simulated = g.measurement == MeasurementMode::Simulated;
    // measurement noise needs slack of at least one scan step
    let epsilon = if simulated && g.epsilon == 0.0 { g.step as f64 } else { g.epsilon };
    let mut analytic;
    let mut sim;
    let m: &mut dyn Measurement = if simulated {
        sim = SimulatedMeasurement::new(&ctx, g.step, g.scan_cap, scenario.simulation.slots, scenario.seed);
        &mut sim
    } else {
        analytic = AnalyticMeasurement::new(&ctx, g.step, g.scan_cap);
        &mut analytic
    };
    let run = algorithm1_run(m, 0, epsilon)?;

    let mut t = Table::new(&["agent", "final_W", "best_W", "recorded"]);
    for (i, a) in run.agents.iter().enumerate() {
        let recorded = a.w_hat.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(" ");
        t.push(row![i, run.final_w[i], a.w_best, recorded]);
    }
    out.table("algo1.csv", &t)?;

    let mut trace = Table::new(&["round", "sender", "kind", "payload"]);
    for msg in &run.trace {
        trace.push(row![msg.round, msg.sender, format!("{:?}", msg.kind), msg.payload]);
    }
    out.table("algo1_trace.csv", &trace)?;
    match run.common_w() {
        Some(w) => Ok(format!("agents agree on W = {w} after {} messages", run.trace.len())),
        None => Ok(format!("agents did not agree: {:?}", run.final_w)),
    }
}

/// `optimum.csv`: `user,class,rate,throughput` at the optimum.
/// `optimum_probes.csv`: `W,welfare` for every probed window.
fn optimum(scenario: &Scenario, out: &mut OutDir) -> Result<String> {
    let ctx = scenario.context()?;
    let opt = social_optimum(&ctx, &OracleOptions::default())?;
    let at_opt = ctx.with_common_cw(opt.w_opt)?;
    let s = at_opt.throughputs(&opt.rates_opt)?;
    let classes = scenario.classes();
    let mut t = Table::new(&["user", "class", "rate", "throughput"]);
    for (i, (&rate, &si)) in opt.rates_opt.iter().zip(&s).enumerate() {
        t.push(row![i, label(&classes, i), rate, si]);
    }
    out.table("optimum.csv", &t)?;
    let mut p = Table::new(&["W", "welfare"]);
    for &(w, v) in &opt.probes {
        p.push(row![w, v]);
    }
    out.table("optimum_probes.csv", &p)?;
    Ok(format!("W_opt = {}, welfare {:.6e} b/s", opt.w_opt, opt.welfare_opt))
}

/// Header: `W_NE,W_opt,welfare_NE,welfare_opt,PoA,cw,rate_PoA`. The rate-game
/// ratio is taken at every user's configured window.
fn poa(scenario: &Scenario, out: &mut OutDir) -> Result<String> {
    let ctx = scenario.context()?;
    let opts = OracleOptions::default();
    let eq = refined_equilibrium(&ctx, scenario.game.step, scenario.game.scan_cap)?;
    let opt = social_optimum(&ctx, &opts)?;
    let system = price_of_anarchy(&ctx, &eq, &opt, &opts)?;
    let rate = rate_game_poa(&ctx, &opts)?;
    let mut t = Table::new(&["W_NE", "W_opt", "welfare_NE", "welfare_opt", "PoA", "cw", "rate_PoA"]);
    t.push(row![eq.w_star, opt.w_opt, eq.welfare, opt.welfare_opt, system, scenario.users[0].cw, rate]);
    out.table("poa.csv", &t)?;
    Ok(format!("PoA {system:.6} (W_NE {}, W_opt {}), rate game {rate:.6}", eq.w_star, opt.w_opt))
}

/// Symmetric and two-class: `sweep.csv` with `n,W_NE,W_opt,welfare_NE,welfare_opt,PoA,cw,rate_PoA`.
/// Asymmetric: `sweep.csv` with `n,draws,cw,mean_PoA,stderr,min_PoA,max_PoA` and
/// `sweep_draws.csv` with `n,draw,PoA,snr_db`.
fn sweep(scenario: &Scenario, out: &mut OutDir) -> Result<String> {
    let sw = scenario.sweep.as_ref().context("sweep needs a `sweep` section in the config")?;
    let threads = parallel::thread_count();
    let opts = OracleOptions::default();
    let cw = scenario.users[0].cw;
    match sw.kind {
        SweepKind::Symmetric | SweepKind::TwoClass => {
            let results = parallel::map(&sw.n, threads, |&n| -> Result<_> {
                let ctx = match sw.kind {
                    SweepKind::TwoClass => scenario.two_class_context(n)?,
                    _ => scenario.symmetric_context(n)?,
                };
                let eq = refined_equilibrium(&ctx, scenario.game.step, scenario.game.scan_cap)?;
                let opt = social_optimum(&ctx, &opts)?;
                let system = price_of_anarchy(&ctx, &eq, &opt, &opts)?;
                let rate = rate_game_poa(&ctx.with_common_cw(cw)?, &opts)?;
                Ok(row![n, eq.w_star, opt.w_opt, eq.welfare, opt.welfare_opt, system, cw, rate])
            })?;
            let mut t = Table::new(&["n", "W_NE", "W_opt", "welfare_NE", "welfare_opt", "PoA", "cw", "rate_PoA"]);
            results.into_iter().for_each(|r| t.push(r));
            out.table("sweep.csv", &t)?;
            Ok(format!("{} points", sw.n.len()))
        }
        SweepKind::Asymmetric => {
            let [lo, hi] = sw.snr_range;
            let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
            let draws: Vec<(usize, usize, Vec<f64>)> =
                sw.n.iter()
                    .flat_map(|&n| (0..sw.draws).map(move |d| (n, d)))
                    .map(|(n, d)| (n, d, (0..n).map(|_| rng.gen_range(lo..=hi)).collect()))
                    .collect();
            let poas = parallel::map(&draws, threads, |(_, _, snrs)| -> Result<f64> {
                let ctx = scenario.context_with_snrs(snrs)?.with_common_cw(cw)?;
                Ok(rate_game_poa(&ctx, &opts)?)
            })?;
            let mut detail = Table::new(&["n", "draw", "PoA", "snr_db"]);
            for ((n, d, snrs), &p) in draws.iter().zip(&poas) {
                let snr = snrs.iter().map(|&s| crate::output::sig9(s)).collect::<Vec<_>>().join(" ");
                detail.push(row![*n, *d, p, snr]);
            }
            out.table("sweep_draws.csv", &detail)?;
            let mut t = Table::new(&["n", "draws", "cw", "mean_PoA", "stderr", "min_PoA", "max_PoA"]);
            for (k, &n) in sw.n.iter().enumerate() {
                let xs = &poas[k * sw.draws..(k + 1) * sw.draws];
                let (mean, se) = mean_and_stderr(xs);
                let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                t.push(row![n, sw.draws, cw, mean, se, min, max]);
            }
            out.table("sweep.csv", &t)?;
            Ok(format!("{} points x {} draws", sw.n.len(), sw.draws))
        }
    }
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `simulate.csv`: `user,class,cw,rate,attempts,successes,collisions,channel_errors,tau_hat,p_hat,throughput`.
/// With tit-for-tat enabled, `tft.csv`: `window,node,W,airtime,throughput`.
fn simulate_cmd(scenario: &Scenario, out: &mut OutDir) -> Result<String> {
    let ctx = scenario.context()?;
    let rates = rate_equilibrium(&ctx, rate_tol(scenario, &ctx))?.rates;
    let cws: Vec<u32> = ctx.users.iter().map(|u| u.mac.cw).collect();
    let cfg = scenario.sim_config(&ctx, &cws, &rates);
    if cfg.tft != TftMode::Off {
        let trace = simulate_tft(&cfg)?;
        let mut t = Table::new(&["window", "node", "W", "airtime", "throughput"]);
        for r in &trace.records {
            t.push(row![r.window, r.node, r.cw, r.airtime, r.throughput]);
        }
        out.table("tft.csv", &t)?;
        return Ok(match trace.converged_at() {
            Some(w) => format!("uniform from observation window {w}"),
            None => "did not become uniform".into(),
        });
    }
    let stats = simulate(&cfg)?;
    let classes = scenario.classes();
    let mut t = Table::new(&[
        "user",
        "class",
        "cw",
        "rate",
        "attempts",
        "successes",
        "collisions",
        "channel_errors",
        "tau_hat",
        "p_hat",
        "throughput",
    ]);
    for (i, s) in stats.nodes.iter().enumerate() {
        t.push(row![
            i,
            label(&classes, i),
            cws[i],
            rates[i],
            s.attempts,
            s.successes,
            s.collisions,
            s.channel_errors,
            s.tau_hat,
            s.p_hat,
            s.throughput
        ]);
    }
    out.table("simulate.csv", &t)?;
    Ok(format!("{} virtual slots, {:.3} s simulated", stats.slots, stats.elapsed))
}

/// Header: `user,class,tau,tau_hat,tau_delta,throughput,throughput_hat,throughput_delta`,
/// deltas relative to the analytic value. The analytic side uses the
/// simulator's slot timing.
fn validate(scenario: &Scenario, out: &mut OutDir) -> Result<String> {
    let timing = scenario.sim_timing();
    let ctx = GameContext::new(scenario.users()?, timing)?.with_a_mode(scenario.game.a_mode);
    let rates = rate_equilibrium(&ctx, rate_tol(scenario, &ctx))?.rates;
    let cws: Vec<u32> = ctx.users.iter().map(|u| u.mac.cw).collect();
    let cfg = scenario.sim_config(&ctx, &cws, &rates);
    if cfg.tft != TftMode::Off {
        bail!("validate compares a static configuration; set simulation.tft to \"off\"");
    }
    let stats = simulate(&cfg)?;
    let pers = ctx.pers(&rates);
    let state = ctx.state(&rates)?;
    let analytic = user_throughputs(&state, &ctx.goodputs(&rates), &timing, &pers, SlotMode::Approx);
    let classes = scenario.classes();
    let mut t = Table::new(&[
        "user",
        "class",
        "tau",
        "tau_hat",
        "tau_delta",
        "throughput",
        "throughput_hat",
        "throughput_delta",
    ]);
    let (mut worst_tau, mut worst_s) = (0.0f64, 0.0f64);
    for (i, s) in stats.nodes.iter().enumerate() {
        let dt = (s.tau_hat - state.tau[i]) / state.tau[i];
        let ds = (s.throughput - analytic[i]) / analytic[i];
        worst_tau = worst_tau.max(dt.abs());
        worst_s = worst_s.max(ds.abs());
        t.push(row![i, label(&classes, i), state.tau[i], s.tau_hat, dt, analytic[i], s.throughput, ds]);
    }
    out.table("validate.csv", &t)?;
    Ok(format!("max relative delta: attempt rate {:.3}%, throughput {:.3}%", 100.0 * worst_tau, 100.0 * worst_s))
}
