//! Browser bindings. Every export takes a JSON request and returns a JSON
//! response, so the page needs no generated type glue beyond strings.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;
use wlan_game::mac_game::refined_equilibrium;
use wlan_game::oracle::{rate_game_poa, OracleOptions};
use wlan_game::scenario::Scenario;

/// Largest station count the page may ask for; keeps a click under a second.
pub const MAX_USERS: usize = 40;
const SCAN_CAP: u32 = 1024;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelRequest {
    pub snr_db: f64,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_points() -> usize {
    200
}

#[derive(Debug, Serialize)]
pub struct ChannelCurve {
    pub rate: Vec<f64>,
    pub per: Vec<f64>,
    pub goodput: Vec<f64>,
    pub peak_rate: f64,
    pub peak_goodput: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowRequest {
    pub n: usize,
    pub snr_db: f64,
}

#[derive(Debug, Serialize)]
pub struct WindowCurve {
    pub w: Vec<u32>,
    /// Sum of the users' utilities with everyone on window `w`.
    pub welfare: Vec<f64>,
    pub w_star: u32,
    pub equilibria: Vec<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoaRequest {
    pub snr_db: f64,
    pub n_max: usize,
    #[serde(default = "default_cw")]
    pub cw: u32,
}

fn default_cw() -> u32 {
    32
}

#[derive(Debug, Serialize)]
pub struct PoaCurve {
    pub n: Vec<usize>,
    pub poa: Vec<f64>,
}

fn scenario(n: usize, snr_db: f64) -> Result<Scenario, String> {
    if !(1..=MAX_USERS).contains(&n) {
        return Err(format!("n must be in 1..={MAX_USERS}"));
    }
    let s = Scenario::symmetric(n, snr_db);
    s.validate().map_err(|e| e.to_string())?;
    Ok(s)
}

/// PER and goodput against rate on a log grid over the default rate window.
pub fn channel_curve(req: &ChannelRequest) -> Result<ChannelCurve, String> {
    if !(2..=5000).contains(&req.points) {
        return Err("points must be in 2..=5000".into());
    }
    let ctx = scenario(1, req.snr_db)?.context().map_err(|e| e.to_string())?;
    let ch = &ctx.users[0].channel;
    let w = ctx.users[0].window();
    let rate: Vec<f64> =
        (0..req.points).map(|k| w.r_min * (w.r_max / w.r_min).powf(k as f64 / (req.points - 1) as f64)).collect();
    let (peak_rate, peak_goodput) = ch.max_goodput();
    Ok(ChannelCurve {
        per: rate.iter().map(|&r| ch.per(r)).collect(),
        goodput: rate.iter().map(|&r| ch.goodput(r)).collect(),
        rate,
        peak_rate,
        peak_goodput,
    })
}

/// Welfare against the common window, with the refined equilibrium marked.
pub fn window_curve(req: &WindowRequest) -> Result<WindowCurve, String> {
    let ctx = scenario(req.n, req.snr_db)?.context().map_err(|e| e.to_string())?;
    let eq = refined_equilibrium(&ctx, 1, SCAN_CAP).map_err(|e| e.to_string())?;
    Ok(WindowCurve {
        welfare: eq.utilities.iter().map(|u| u.iter().sum()).collect(),
        w: eq.scanned,
        w_star: eq.w_star,
        equilibria: eq.equilibria,
    })
}

/// Rate-game price of anarchy for 1..=n_max symmetric users on window `cw`.
pub fn poa_curve(req: &PoaRequest) -> Result<PoaCurve, String> {
    let base = scenario(req.n_max, req.snr_db)?;
    if req.cw < 4 {
        return Err("cw must be at least 4".into());
    }
    let opts = OracleOptions::default();
    let n: Vec<usize> = (1..=req.n_max).collect();
    let poa = n
        .iter()
        .map(|&k| {
            let ctx = base.symmetric_context(k)?.with_common_cw(req.cw)?;
            rate_game_poa(&ctx, &opts)
        })
        .collect::<wlan_game::Result<_>>()
        .map_err(|e| e.to_string())?;
    Ok(PoaCurve { n, poa })
}

fn json_call<Q: for<'de> Deserialize<'de>, R: Serialize>(
    request: &str,
    f: impl FnOnce(&Q) -> Result<R, String>,
) -> Result<String, String> {
    let req: Q = serde_json::from_str(request).map_err(|e| format!("bad request: {e}"))?;
    serde_json::to_string(&f(&req)?).map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = channelCurve)]
pub fn channel_curve_json(request: &str) -> Result<String, JsValue> {
    json_call(request, channel_curve).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = windowCurve)]
pub fn window_curve_json(request: &str) -> Result<String, JsValue> {
    json_call(request, window_curve).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = poaCurve)]
pub fn poa_curve_json(request: &str) -> Result<String, JsValue> {
    json_call(request, poa_curve).map_err(|e| JsValue::from_str(&e))
}
