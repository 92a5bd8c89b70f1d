//! Seeded driving sequences over the alphabet {1,2}: i.i.d. symbol words,
//! shifts, cylinders and their probabilities.
//!
//! Words are regenerable from a provenance triple (seed, stream, offset)
//! rather than stored in run manifests. The generator is ChaCha12 keyed by
//! `seed` (via `seed_from_u64`), with the ChaCha stream id carrying `stream`
//! and the word position set to two 32-bit words per symbol, so symbol `i`
//! of a word is always drawn from counter position `offset + i` no matter
//! how the work is partitioned. The algorithm is fixed for the lifetime of
//! this repository; distinct streams are statistically independent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

/// A symbol is 1 (select the down map) or 2 (select the up map).
pub type Symbol = u8;

/// Selection probabilities (p1, p2) with p1 + p2 = 1, both in (0,1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probabilities {
    p1: f64,
    p2: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum SymbolError {
    #[error("probabilities must lie in (0,1) and sum to 1, got ({0}, {1})")]
    BadProbabilities(f64, f64),
    #[error("shift by {k} exceeds word length {len}")]
    ShiftOutOfRange { k: usize, len: usize },
    #[error("cylinder positions must be distinct")]
    DuplicatePosition,
}

impl Probabilities {
    pub fn new(p1: f64) -> Result<Probabilities, SymbolError> {
        let p2 = 1.0 - p1;
        if !(p1 > 0.0 && p1 < 1.0) || !p1.is_finite() {
            return Err(SymbolError::BadProbabilities(p1, p2));
        }
        Ok(Probabilities { p1, p2 })
    }

    pub fn uniform() -> Probabilities {
        Probabilities { p1: 0.5, p2: 0.5 }
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p2(&self) -> f64 {
        self.p2
    }

    pub fn prob_of(&self, symbol: Symbol) -> f64 {
        match symbol {
            1 => self.p1,
            2 => self.p2,
            s => panic!("symbol must be 1 or 2, got {s}"),
        }
    }
}

/// Where a word came from: everything needed to regenerate it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Provenance {
    pub seed: u64,
    pub stream: u64,
    pub offset: u64,
}

/// A finite window of an i.i.d. symbol sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolWord {
    symbols: Vec<Symbol>,
    provenance: Provenance,
}

impl SymbolWord {
    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Word with the first k symbols dropped; the provenance offset advances
    /// so the result regenerates identically.
    pub fn shift(&self, k: usize) -> Result<SymbolWord, SymbolError> {
        if k > self.len() {
            return Err(SymbolError::ShiftOutOfRange { k, len: self.len() });
        }
        Ok(SymbolWord {
            symbols: self.symbols[k..].to_vec(),
            provenance: Provenance {
                offset: self.provenance.offset + k as u64,
                ..self.provenance
            },
        })
    }

    /// Assemble a word directly from symbols (used by tests and drivers that
    /// need a fixed pattern). Provenance is synthetic.
    pub fn from_symbols(symbols: Vec<Symbol>) -> SymbolWord {
        assert!(symbols.iter().all(|&s| s == 1 || s == 2), "symbols must be 1 or 2");
        SymbolWord { symbols, provenance: Provenance { seed: 0, stream: 0, offset: 0 } }
    }
}

/// Streaming symbol source; yields the same symbols `sample_word` would
/// store, one at a time, without materializing the word.
pub struct WordStream {
    rng: ChaCha12Rng,
    p1: f64,
}

impl WordStream {
    pub fn new(probabilities: Probabilities, provenance: Provenance) -> WordStream {
        let mut rng = ChaCha12Rng::seed_from_u64(provenance.seed);
        rng.set_stream(provenance.stream);
        // One u64 draw (two 32-bit ChaCha words) per symbol.
        rng.set_word_pos(provenance.offset as u128 * 2);
        WordStream { rng, p1: probabilities.p1() }
    }

    #[inline]
    pub fn next_symbol(&mut self) -> Symbol {
        // 53-bit uniform in [0,1).
        let u = (self.rng.gen::<u64>() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        if u < self.p1 {
            1
        } else {
            2
        }
    }
}

/// Draw an i.i.d. word of the given length, deterministically from
/// (seed, stream).
pub fn sample_word(
    probabilities: Probabilities,
    length: usize,
    seed: u64,
    stream: u64,
) -> SymbolWord {
    regenerate(probabilities, length, Provenance { seed, stream, offset: 0 })
}

/// Rebuild a word from its provenance triple.
pub fn regenerate(
    probabilities: Probabilities,
    length: usize,
    provenance: Provenance,
) -> SymbolWord {
    let mut stream = WordStream::new(probabilities, provenance);
    let symbols = (0..length).map(|_| stream.next_symbol()).collect();
    SymbolWord { symbols, provenance }
}

/// A finite set of (position, symbol) constraints defining a cylinder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CylinderSpec {
    constraints: Vec<(usize, Symbol)>,
}

impl CylinderSpec {
    pub fn new(constraints: Vec<(usize, Symbol)>) -> Result<CylinderSpec, SymbolError> {
        let mut positions: Vec<usize> = constraints.iter().map(|&(p, _)| p).collect();
        positions.sort_unstable();
        positions.dedup();
        if positions.len() != constraints.len() {
            return Err(SymbolError::DuplicatePosition);
        }
        assert!(
            constraints.iter().all(|&(_, s)| s == 1 || s == 2),
            "cylinder symbols must be 1 or 2"
        );
        Ok(CylinderSpec { constraints })
    }

    pub fn constraints(&self) -> &[(usize, Symbol)] {
        &self.constraints
    }
}

/// Product of the symbol probabilities over the constrained positions.
pub fn cylinder_probability(spec: &CylinderSpec, probabilities: Probabilities) -> f64 {
    spec.constraints.iter().map(|&(_, s)| probabilities.prob_of(s)).product()
}
