//! Simulation and analysis of random compositions of two interval
//! diffeomorphisms: one map pushing points toward 0, one toward 1, chosen
//! i.i.d. with fixed probabilities at every step.
//!
//! The library covers the map calculus ([`interval_maps`]), the symbolic
//! driving sequences ([`symbol_dynamics`]), orbit iteration in plain, log and
//! logit coordinates ([`skew_engine`]), boundary Lyapunov exponents and
//! regime classification ([`lyapunov`]), discretized measures with their
//! transfer-operator machinery ([`measure_lab`]), and the statistical
//! experiment drivers ([`experiments`]). [`cli_io`] holds the config format,
//! run manifests and CSV emitters behind the `skewprod` binary.

pub mod cli_io;
pub mod experiments;
pub mod interval_maps;
pub mod lyapunov;
pub mod measure_lab;
pub mod skew_engine;
pub mod symbol_dynamics;

pub use interval_maps::{Direction, Endpoint, IntervalMap, MapFamily};
pub use lyapunov::{Regime, RegimeReport};
pub use measure_lab::BinnedMeasure;
pub use symbol_dynamics::SymbolWord;
