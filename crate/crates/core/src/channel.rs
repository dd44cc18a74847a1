//! PHY abstraction: SNR and modulation to bit error rate, packet error rate
//! and goodput `G(R) = (1 - e(R)) R`.
//!
//! Packet success is carried in log space, `ln(1 - e) = R T ln(1 - BER)`, so
//! `e`, `G` and the log-derivative `G'/G` stay finite long after `G` itself
//! underflows to zero at high rates.

use serde::{Deserialize, Serialize};

use crate::numeric::{central_difference, grid_golden_max, FD_REL_STEP};
use crate::{Error, Result};

/// Largest BER we let through; keeps `ln(1 - BER)` finite.
pub const BER_CEILING: f64 = 1.0 - 1e-15;

/// Largest representable packet error rate strictly below one.
const PER_CEILING: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modulation {
    /// Square M-ary QAM with amplitude factor `alpha`.
    Mqam { order: u32, alpha: f64 },
    /// Differential PSK, `BER = exp(-Eb/N0) / 2`.
    Dpsk,
}

impl Modulation {
    pub fn qam64() -> Self {
        Modulation::Mqam { order: 64, alpha: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Modulation::Mqam { order, alpha } => {
                if ![4, 16, 64, 256].contains(&order) {
                    return Err(Error::Domain(format!("QAM order must be one of 4, 16, 64, 256 (got {order})")));
                }
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::Domain(format!("QAM alpha must be > 0 (got {alpha})")));
                }
                Ok(())
            }
            Modulation::Dpsk => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    pub snr_db: f64,
    /// Unspread signal bandwidth in Hz.
    pub bandwidth_hz: f64,
    pub modulation: Modulation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateWindow {
    pub r_min: f64,
    pub r_max: f64,
    /// Packet transmission time in seconds.
    pub airtime: f64,
}

/// Gaussian tail probability `Q(x) = erfc(x / sqrt 2) / 2`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

impl LinkParams {
    pub fn new(snr_db: f64, bandwidth_hz: f64, modulation: Modulation) -> Result<Self> {
        let link = LinkParams { snr_db, bandwidth_hz, modulation };
        link.validate()?;
        Ok(link)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.snr_db.is_finite() {
            return Err(Error::Domain(format!("snr_db must be finite (got {})", self.snr_db)));
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return Err(Error::Domain(format!("bandwidth_hz must be > 0 (got {})", self.bandwidth_hz)));
        }
        self.modulation.validate()
    }

    pub fn snr_linear(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }

    /// Bit-energy-to-noise ratio at `rate` bit/s: `SNR * B / R`.
    pub fn ebn0(&self, rate: f64) -> Result<f64> {
        if !(rate > 0.0) {
            return Err(Error::Domain(format!("rate must be > 0 (got {rate})")));
        }
        Ok(self.ebn0_unchecked(rate))
    }

    fn ebn0_unchecked(&self, rate: f64) -> f64 {
        self.snr_linear() * self.bandwidth_hz / rate
    }

    pub fn bit_error_rate(&self, rate: f64) -> Result<f64> {
        self.ebn0(rate).map(|g| ber_from_ebn0(self.modulation, g))
    }
}

/// BER for a modulation at a given Eb/N0, clamped to `[0, BER_CEILING]`.
pub fn ber_from_ebn0(modulation: Modulation, ebn0: f64) -> f64 {
    let ber = match modulation {
        Modulation::Mqam { order, alpha } => {
            let m = order as f64;
            let arg = 3.0 * alpha * alpha * m.log2() / (m - 1.0) * ebn0;
            4.0 * (1.0 - 1.0 / m.sqrt()) * q_function(arg.sqrt())
        }
        Modulation::Dpsk => 0.5 * (-ebn0).exp(),
    };
    ber.clamp(0.0, BER_CEILING)
}

/// `ln(1 - e)` for a packet of `bits` bits: `bits * ln(1 - BER)`.
fn log_success(ber: f64, bits: f64) -> f64 {
    bits * (-ber).ln_1p()
}

/// Packet error rate `1 - (1 - BER)^(rate * airtime)`.
pub fn packet_error_rate(link: &LinkParams, rate: f64, airtime: f64) -> Result<f64> {
    if !(rate * airtime >= 1.0) {
        return Err(Error::Domain(format!("packet must carry at least one bit (rate * airtime = {})", rate * airtime)));
    }
    let ber = link.bit_error_rate(rate)?;
    Ok(per_from_log_success(log_success(ber, rate * airtime)))
}

fn per_from_log_success(ls: f64) -> f64 {
    (-ls.exp_m1()).clamp(0.0, PER_CEILING)
}

/// A user's link together with its admissible rate window: everything
/// needed to evaluate `e(R)`, `G(R)` and their derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub link: LinkParams,
    pub window: RateWindow,
}

impl RateWindow {
    pub fn new(r_min: f64, r_max: f64, airtime: f64) -> Result<Self> {
        let w = RateWindow { r_min, r_max, airtime };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_min > 0.0 && self.r_min < self.r_max && self.r_max.is_finite()) {
            return Err(Error::Domain(format!(
                "rate window needs 0 < r_min < r_max (got [{}, {}])",
                self.r_min, self.r_max
            )));
        }
        if !(self.airtime > 0.0 && self.airtime.is_finite()) {
            return Err(Error::Domain(format!("airtime must be > 0 (got {})", self.airtime)));
        }
        if self.r_min * self.airtime < 1.0 {
            return Err(Error::Domain(format!("r_min * airtime = {} < 1 bit per packet", self.r_min * self.airtime)));
        }
        Ok(())
    }

    pub fn contains(&self, rate: f64) -> bool {
        rate >= self.r_min && rate <= self.r_max
    }
}

impl Channel {
    pub fn new(link: LinkParams, window: RateWindow) -> Result<Self> {
        link.validate()?;
        window.validate()?;
        Ok(Channel { link, window })
    }

    /// `ln(1 - e(R))`, finite for every positive rate.
    pub fn log_success(&self, rate: f64) -> f64 {
        let ber = ber_from_ebn0(self.link.modulation, self.link.ebn0_unchecked(rate));
        log_success(ber, rate * self.window.airtime)
    }

    fn log_success_slope(&self, rate: f64) -> f64 {
        central_difference(|r| self.log_success(r), rate, FD_REL_STEP)
    }

    pub fn bit_error_rate(&self, rate: f64) -> f64 {
        ber_from_ebn0(self.link.modulation, self.link.ebn0_unchecked(rate))
    }

    pub fn per(&self, rate: f64) -> f64 {
        per_from_log_success(self.log_success(rate))
    }

    /// `e'(R) = -(1 - e) d ln(1 - e)/dR`, with the log-derivative taken by
    /// central difference.
    pub fn per_derivative(&self, rate: f64) -> f64 {
        let ls = self.log_success(rate);
        -ls.exp() * self.log_success_slope(rate)
    }

    pub fn goodput(&self, rate: f64) -> f64 {
        rate * self.log_success(rate).exp()
    }

    /// `G'(R) = (1 - e)(1 + R d ln(1 - e)/dR)`.
    pub fn goodput_derivative(&self, rate: f64) -> f64 {
        self.log_success(rate).exp() * (1.0 + rate * self.log_success_slope(rate))
    }

    /// `G'(R) / G(R) = 1/R + d ln(1 - e)/dR`, finite even where `G` underflows.
    pub fn goodput_log_derivative(&self, rate: f64) -> f64 {
        1.0 / rate + self.log_success_slope(rate)
    }

    /// Everything the rate game needs at one rate, sharing the BER evaluations.
    pub fn eval(&self, rate: f64) -> ChannelPoint {
        let ls = self.log_success(rate);
        let slope = self.log_success_slope(rate);
        let success = ls.exp();
        ChannelPoint {
            per: per_from_log_success(ls),
            per_derivative: -success * slope,
            goodput: rate * success,
            goodput_log_derivative: 1.0 / rate + slope,
        }
    }

    /// `(argmax, max)` of `G` over the rate window.
    pub fn max_goodput(&self) -> (f64, f64) {
        let RateWindow { r_min, r_max, .. } = self.window;
        grid_golden_max(|r| self.goodput(r), r_min, r_max, 200, true, 1e-9 * r_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelPoint {
    pub per: f64,
    pub per_derivative: f64,
    pub goodput: f64,
    pub goodput_log_derivative: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_channel() -> Channel {
        Channel::new(
            LinkParams::new(15.0, 20e6, Modulation::qam64()).unwrap(),
            RateWindow::new(1e6, 100e6, 1e-3).unwrap(),
        )
        .unwrap()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn ebn0_examples() {
        let unit = LinkParams::new(0.0, 1e6, Modulation::Dpsk).unwrap();
        assert!(close(unit.ebn0(1e6).unwrap(), 1.0, 1e-15));
        let l = LinkParams::new(15.0, 2e7, Modulation::qam64()).unwrap();
        assert!(close(l.ebn0(2e7).unwrap(), 31.622776601683793, 1e-12));
        assert!(close(l.ebn0(1e7).unwrap(), 63.245553203367585, 1e-12));
    }

    #[test]
    fn ebn0_rejects_nonpositive_rate() {
        let l = LinkParams::new(15.0, 2e7, Modulation::qam64()).unwrap();
        assert!(matches!(l.ebn0(0.0), Err(Error::Domain(_))));
        assert!(l.ebn0(-3.0).is_err());
        assert!(l.bit_error_rate(0.0).is_err());
    }

    #[test]
    fn qam4_reduces_to_qpsk_form() {
        let m4 = Modulation::Mqam { order: 4, alpha: 1.0 };
        for &g in &[0.1f64, 1.0, 3.0, 7.5] {
            let expected = 2.0 * q_function((2.0 * g).sqrt());
            assert!(close(ber_from_ebn0(m4, g), expected, 1e-14));
        }
    }

    #[test]
    fn ber_vanishes_at_high_ebn0() {
        assert_eq!(ber_from_ebn0(Modulation::qam64(), 1e6), 0.0);
        assert!(ber_from_ebn0(Modulation::Dpsk, 800.0) < 1e-300);
    }

    #[test]
    fn dpsk_closed_form() {
        assert!(close(ber_from_ebn0(Modulation::Dpsk, 1.0), 0.5 * (-1f64).exp(), 1e-15));
        assert!(close(0.5 * (-1f64).exp(), 0.18393972058572117, 1e-15));
    }

    #[test]
    fn modulation_invariants() {
        assert!(Modulation::Mqam { order: 8, alpha: 1.0 }.validate().is_err());
        assert!(Modulation::Mqam { order: 16, alpha: 0.0 }.validate().is_err());
        assert!(Modulation::Mqam { order: 256, alpha: 0.7 }.validate().is_ok());
    }

    #[test]
    fn rate_window_invariants() {
        assert!(RateWindow::new(2e6, 1e6, 1e-3).is_err());
        assert!(RateWindow::new(0.0, 1e6, 1e-3).is_err());
        assert!(RateWindow::new(100.0, 1e6, 1e-3).is_err(), "less than one bit per packet");
        assert!(RateWindow::new(1e6, 1e8, 0.0).is_err());
    }

    #[test]
    fn per_examples() {
        // error-free channel
        let clean = LinkParams::new(200.0, 2e7, Modulation::qam64()).unwrap();
        assert_eq!(packet_error_rate(&clean, 1e7, 1e-3).unwrap(), 0.0);
        // one-bit packet: e equals BER
        let l = LinkParams::new(5.0, 2e7, Modulation::qam64()).unwrap();
        let ber = l.bit_error_rate(1e6).unwrap();
        assert!(close(packet_error_rate(&l, 1e6, 1e-6).unwrap(), ber, 1e-12));
        // BER = 1e-5 over 12000 bits (reference value from 40-digit arithmetic)
        let ls = log_success(1e-5, 12000.0);
        assert!(close(per_from_log_success(ls), 0.11308009543849258, 1e-12));
        assert!(packet_error_rate(&l, 1e3, 1e-4).is_err());
    }

    #[test]
    fn per_and_ber_stay_below_one() {
        let c = default_channel();
        for k in 0..=1000 {
            let r = 1e6 + k as f64 * 99e6 / 1000.0;
            let e = c.per(r);
            let b = c.bit_error_rate(r);
            assert!((0.0..1.0).contains(&e), "e = {e} at {r}");
            assert!((0.0..1.0).contains(&b));
        }
        // far beyond the window, still strictly below one
        assert!(c.per(1e12) < 1.0);
    }

    #[test]
    fn goodput_without_errors_is_identity() {
        let c = Channel::new(
            LinkParams::new(300.0, 2e7, Modulation::qam64()).unwrap(),
            RateWindow::new(1e6, 1e8, 1e-3).unwrap(),
        )
        .unwrap();
        for &r in &[1e6, 3.3e7, 1e8] {
            assert_eq!(c.goodput(r), r);
            assert!(close(c.goodput_derivative(r), 1.0, 1e-9));
            assert!(close(c.goodput_log_derivative(r), 1.0 / r, 1e-9));
        }
    }

    #[test]
    fn goodput_collapses_at_high_rate() {
        let c = default_channel();
        assert!(c.goodput(1e8) < 1e-300);
        assert!(c.goodput_log_derivative(1e8).is_finite());
    }

    #[test]
    fn dpsk_per_derivative_matches_closed_form() {
        let c = Channel::new(
            LinkParams::new(12.0, 2e7, Modulation::Dpsk).unwrap(),
            RateWindow::new(1e6, 1e8, 1e-3).unwrap(),
        )
        .unwrap();
        let k = c.link.snr_linear() * c.link.bandwidth_hz;
        let t = c.window.airtime;
        for &r in &[2e6, 5e6, 9e6, 1.3e7, 2e7] {
            let ber = 0.5 * (-k / r).exp();
            let dber = ber * k / (r * r);
            let ls = r * t * (-ber).ln_1p();
            let dls = t * (-ber).ln_1p() - r * t * dber / (1.0 - ber);
            let analytic = -ls.exp() * dls;
            let fd = c.per_derivative(r);
            assert!(close(fd, analytic, 1e-4), "r={r}: {fd} vs {analytic}");
        }
    }

    #[test]
    fn default_goodput_has_single_interior_peak() {
        let c = default_channel();
        let n = 10_000;
        let g: Vec<f64> = (0..n).map(|k| c.goodput(1e6 + k as f64 * 99e6 / (n - 1) as f64)).collect();
        let peak = g.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(k, _)| k).unwrap();
        assert!(peak > 0 && peak < n - 1);
        assert!(g[..=peak].windows(2).all(|w| w[1] >= w[0]));
        assert!(g[peak..].windows(2).all(|w| w[1] <= w[0]));
        let (r_star, _) = c.max_goodput();
        let grid_peak = 1e6 + peak as f64 * 99e6 / (n - 1) as f64;
        assert!((r_star - grid_peak).abs() <= 99e6 / (n - 1) as f64);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn modulation() -> impl Strategy<Value = Modulation> {
            prop_oneof![
                prop::sample::select(vec![4u32, 16, 64, 256]).prop_map(|order| Modulation::Mqam { order, alpha: 1.0 }),
                Just(Modulation::Dpsk),
            ]
        }

        proptest! {
            #[test]
            fn error_rates_stay_in_unit_interval(snr in -10.0..40.0f64, rate in 1e5..5e8f64, m in modulation()) {
                let link = LinkParams::new(snr, 20e6, m).unwrap();
                let ber = link.bit_error_rate(rate).unwrap();
                let per = packet_error_rate(&link, rate, 1e-3).unwrap();
                prop_assert!((0.0..1.0).contains(&ber));
                prop_assert!((0.0..1.0).contains(&per));
            }

            #[test]
            fn per_is_non_decreasing_in_rate(snr in 0.0..30.0f64, a in 1e6..1e8f64, b in 1e6..1e8f64, m in modulation()) {
                let link = LinkParams::new(snr, 20e6, m).unwrap();
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                prop_assert!(packet_error_rate(&link, lo, 1e-3).unwrap() <= packet_error_rate(&link, hi, 1e-3).unwrap());
            }
        }
    }
}
