//! Analysis engine for the joint contention-window / rate-adaptation game
//! played by selfish stations in a multi-rate 802.11 WLAN.
//!
//! The crate is layered bottom-up:
//!
//! * [`channel`]: bit/packet error rates and the goodput function `G(R)`.
//! * [`markov`]: the heterogeneous backoff chain and its stationary state.
//! * [`throughput`]: slot accounting and per-user effective throughput.
//! * [`rate_game`]: best responses and best-response dynamics for the rate game.
//! * [`mac_game`]: contention-window equilibria under tit-for-tat, refinement
//!   and the distributed equilibrium search.
//! * [`oracle`]: brute-force social optimum and price of anarchy.
//! * [`dcf_sim`]: virtual-slot simulator used to validate the analytic model.
//! * [`scenario`]: serializable scenario descriptions shared by the front ends.

// `!(x > 0.0)` style guards are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod dcf_sim;
mod error;
pub mod mac_game;
pub mod markov;
pub mod numeric;
pub mod oracle;
pub mod rate_game;
pub mod scenario;
pub mod throughput;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
