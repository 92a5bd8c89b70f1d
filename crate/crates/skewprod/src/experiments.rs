//! Statistical experiment drivers: basin scans, invariant-graph estimation,
//! fiber synchronization decay, occupation fractions, excursion run-length
//! statistics, the scaled-tail distribution check, forward-vs-pullback
//! contrasts, and drift fractions.
//!
//! Every theorem-level claim is asymptotic; each driver works with an
//! explicit finite-horizon surrogate (trailing-window containment for basin
//! membership, trends over checkpoint decades for occupation fractions and
//! run lengths, sup-distance at fixed n for the scaled-tail law) and records
//! its horizon and thresholds in the output so the claim stays auditable.
//!
//! Monte Carlo fan-out is deterministic: sample k of a driver always draws
//! from stream `stream_base + k` (or a documented arithmetic thereof), and
//! parallel workers write into order-preserving slots, so results depend
//! only on (family, seed, parameters) and never on scheduling.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::interval_maps::{logit, sigmoid, MapFamily};
use crate::skew_engine::EngineError;
use crate::symbol_dynamics::{Probabilities, Provenance, Symbol, SymbolWord, WordStream};

/// Streams consumed by a driver: the half-open range \[lo, hi) under `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecordProvenance {
    pub seed: u64,
    pub stream_lo: u64,
    pub stream_hi: u64,
}

/// Tabular result of one experiment run, with enough provenance to
/// regenerate it bit-identically on the same build.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub experiment: String,
    pub parameters: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub provenance: RecordProvenance,
}

impl ExperimentRecord {
    fn new(
        experiment: &str,
        columns: &[&str],
        provenance: RecordProvenance,
    ) -> ExperimentRecord {
        ExperimentRecord {
            experiment: experiment.to_string(),
            parameters: BTreeMap::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            provenance,
        }
    }

    fn set_param(&mut self, key: &str, value: impl ToString) {
        self.parameters.insert(key.to_string(), value.to_string());
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Vec<f64> {
        let idx = self.column_index(name).unwrap_or_else(|| panic!("no column {name}"));
        self.rows.iter().map(|r| r[idx]).collect()
    }
}

/// Nearest-rank percentile of an unsorted slice (q in \[0,1\]).
fn percentile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in percentile input"));
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

fn median(values: &[f64]) -> f64 {
    percentile(values, 0.5)
}

/// Outcome of a finite-horizon basin test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasinOutcome {
    ToZero,
    ToOne,
    Undecided,
}

/// Classify where the orbit of x0 under the word settles: `ToZero` if it
/// stays inside [0, delta) through the whole trailing 10% of the horizon,
/// `ToOne` symmetrically, otherwise `Undecided`.
pub fn basin_classify(
    family: &MapFamily,
    word: &SymbolWord,
    x0: f64,
    horizon: usize,
    delta: f64,
) -> Result<BasinOutcome, EngineError> {
    assert!(delta > 0.0 && delta < 0.5, "delta must lie in (0, 1/2)");
    if word.len() < horizon {
        return Err(EngineError::WordTooShort { len: word.len(), needed: horizon });
    }
    let threshold = logit(delta);
    let tail_start = horizon - horizon / 10;
    let mut y = logit(x0);
    let mut low = y < threshold;
    let mut high = y > -threshold;
    for (i, &s) in word.symbols()[..horizon].iter().enumerate() {
        y = family.map_for(s).eval_logit(y);
        if i + 1 >= tail_start {
            low &= y < threshold;
            high &= y > -threshold;
        } else {
            low = y < threshold;
            high = y > -threshold;
        }
    }
    Ok(match (low, high) {
        (true, false) => BasinOutcome::ToZero,
        (false, true) => BasinOutcome::ToOne,
        _ => BasinOutcome::Undecided,
    })
}

/// Configuration for the per-cell basin scan.
#[derive(Debug, Clone)]
pub struct ScanConfig {
    pub cylinder_len: usize,
    pub subdivisions: usize,
    pub samples_per_cell: usize,
    pub horizon: usize,
    pub delta: f64,
    pub seed: u64,
    pub stream_base: u64,
}

/// Basin fractions for one (cylinder × subinterval) cell.
#[derive(Debug, Clone)]
pub struct CellStats {
    pub cylinder: Vec<Symbol>,
    pub interval_index: usize,
    pub to_zero: f64,
    pub to_one: f64,
    pub undecided: f64,
}

fn cylinder_pattern(code: usize, len: usize) -> Vec<Symbol> {
    (0..len).map(|b| if code >> b & 1 == 0 { 1 } else { 2 }).collect()
}

/// Sample basin outcomes over every (cylinder of the given length ×
/// interval subdivision) cell. Initial points are stratified inside each
/// subinterval; word tails come from stream `stream_base + flat_index`.
pub fn intermingled_scan(
    family: &MapFamily,
    cfg: &ScanConfig,
) -> (Vec<CellStats>, ExperimentRecord) {
    let probs = Probabilities::new(family.probabilities().0).expect("family probabilities valid");
    let cylinders = 1usize << cfg.cylinder_len;
    let cells = cylinders * cfg.subdivisions;
    let stats: Vec<CellStats> = (0..cells)
        .into_par_iter()
        .map(|cell| {
            let code = cell / cfg.subdivisions;
            let j = cell % cfg.subdivisions;
            let pattern = cylinder_pattern(code, cfg.cylinder_len);
            let mut counts = [0usize; 3];
            for s in 0..cfg.samples_per_cell {
                let flat = (cell * cfg.samples_per_cell + s) as u64;
                let x0 = (j as f64 + (s as f64 + 0.5) / cfg.samples_per_cell as f64)
                    / cfg.subdivisions as f64;
                let outcome = basin_classify_streamed(
                    family,
                    &pattern,
                    probs,
                    Provenance { seed: cfg.seed, stream: cfg.stream_base + flat, offset: 0 },
                    x0,
                    cfg.horizon,
                    cfg.delta,
                );
                counts[match outcome {
                    BasinOutcome::ToZero => 0,
                    BasinOutcome::ToOne => 1,
                    BasinOutcome::Undecided => 2,
                }] += 1;
            }
            let total = cfg.samples_per_cell as f64;
            CellStats {
                cylinder: pattern,
                interval_index: j,
                to_zero: counts[0] as f64 / total,
                to_one: counts[1] as f64 / total,
                undecided: counts[2] as f64 / total,
            }
        })
        .collect();

    let mut record = ExperimentRecord::new(
        "basin_scan",
        &["cylinder_code", "interval_index", "to_zero", "to_one", "undecided"],
        RecordProvenance {
            seed: cfg.seed,
            stream_lo: cfg.stream_base,
            stream_hi: cfg.stream_base + (cells * cfg.samples_per_cell) as u64,
        },
    );
    record.set_param("cylinder_len", cfg.cylinder_len);
    record.set_param("subdivisions", cfg.subdivisions);
    record.set_param("samples_per_cell", cfg.samples_per_cell);
    record.set_param("horizon", cfg.horizon);
    record.set_param("delta", cfg.delta);
    record.set_param("surrogate", "trailing-window containment over the last 10% of steps");
    for (cell, st) in stats.iter().enumerate() {
        record.rows.push(vec![
            (cell / cfg.subdivisions) as f64,
            st.interval_index as f64,
            st.to_zero,
            st.to_one,
            st.undecided,
        ]);
    }
    (stats, record)
}

/// Basin classification with a fixed symbol prefix and a streamed tail.
fn basin_classify_streamed(
    family: &MapFamily,
    prefix: &[Symbol],
    probs: Probabilities,
    provenance: Provenance,
    x0: f64,
    horizon: usize,
    delta: f64,
) -> BasinOutcome {
    let threshold = logit(delta);
    let tail_start = horizon - horizon / 10;
    let mut stream = WordStream::new(probs, provenance);
    let mut y = logit(x0);
    let mut low = y < threshold;
    let mut high = y > -threshold;
    for i in 0..horizon {
        let s = if i < prefix.len() { prefix[i] } else { stream.next_symbol() };
        y = family.map_for(s).eval_logit(y);
        if i + 1 >= tail_start {
            low &= y < threshold;
            high &= y > -threshold;
        } else {
            low = y < threshold;
            high = y > -threshold;
        }
    }
    match (low, high) {
        (true, false) => BasinOutcome::ToZero,
        (false, true) => BasinOutcome::ToOne,
        _ => BasinOutcome::Undecided,
    }
}

/// Estimate the basin-separating graph value for a word: the threshold x
/// where the horizon-step image crosses 1/2, found by bisection (the fiber
/// map is monotone, so the finite-horizon basin boundary is one point).
pub fn invariant_graph_estimate(
    family: &MapFamily,
    word: &SymbolWord,
    tolerance: f64,
    horizon: usize,
) -> Result<f64, EngineError> {
    if word.len() < horizon {
        return Err(EngineError::WordTooShort { len: word.len(), needed: horizon });
    }
    let goes_down = |x: f64| {
        let mut y = logit(x);
        for &s in &word.symbols()[..horizon] {
            y = family.map_for(s).eval_logit(y);
        }
        y < 0.0
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > tolerance {
        let mid = 0.5 * (lo + hi);
        if goes_down(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Configuration for the fiber-distance decay experiment.
#[derive(Debug, Clone)]
pub struct SyncConfig {
    pub pair: (f64, f64),
    pub words: usize,
    pub horizon: usize,
    pub stride: usize,
    pub seed: u64,
    pub stream_base: u64,
}

/// Track |f^n(x0) − f^n(y0)| over independent words; per recorded step the
/// median and 90th percentile of the plain-coordinate distance.
pub fn synchronization_experiment(family: &MapFamily, cfg: &SyncConfig) -> ExperimentRecord {
    let probs = Probabilities::new(family.probabilities().0).expect("family probabilities valid");
    let stride = cfg.stride.max(1);
    let checkpoints: Vec<u64> = (0..=cfg.horizon as u64).step_by(stride).collect();
    let per_word: Vec<Vec<f64>> = (0..cfg.words as u64)
        .into_par_iter()
        .map(|k| {
            let mut stream = WordStream::new(
                probs,
                Provenance { seed: cfg.seed, stream: cfg.stream_base + k, offset: 0 },
            );
            let mut ya = logit(cfg.pair.0);
            let mut yb = logit(cfg.pair.1);
            let mut gaps = Vec::with_capacity(checkpoints.len());
            gaps.push((sigmoid(ya) - sigmoid(yb)).abs());
            for i in 0..cfg.horizon {
                let map = family.map_for(stream.next_symbol());
                ya = map.eval_logit(ya);
                yb = map.eval_logit(yb);
                if (i + 1) % stride == 0 {
                    gaps.push((sigmoid(ya) - sigmoid(yb)).abs());
                }
            }
            gaps
        })
        .collect();

    let mut record = ExperimentRecord::new(
        "sync",
        &["step", "median_gap", "p90_gap"],
        RecordProvenance {
            seed: cfg.seed,
            stream_lo: cfg.stream_base,
            stream_hi: cfg.stream_base + cfg.words as u64,
        },
    );
    record.set_param("x0", cfg.pair.0);
    record.set_param("y0", cfg.pair.1);
    record.set_param("words", cfg.words);
    record.set_param("horizon", cfg.horizon);
    record.set_param("stride", stride);
    for (ci, &step) in checkpoints.iter().enumerate() {
        let snapshot: Vec<f64> = per_word.iter().map(|g| g[ci]).collect();
        record.rows.push(vec![step as f64, median(&snapshot), percentile(&snapshot, 0.9)]);
    }
    record
}

/// Least-squares slope of ln(median gap) against step, restricted to
/// checkpoints whose median lies in (gap_min, gap_max). Returns None when
/// fewer than two checkpoints qualify.
pub fn log_median_decay_slope(record: &ExperimentRecord, gap_min: f64, gap_max: f64) -> Option<f64> {
    let steps = record.column("step");
    let medians = record.column("median_gap");
    let pts: Vec<(f64, f64)> = steps
        .iter()
        .zip(&medians)
        .filter(|&(_, &m)| m > gap_min && m < gap_max)
        .map(|(&s, &m)| (s, m.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    Some((n * sxy - sx * sy) / (n * sxx - sx * sx))
}

/// Which occupation indicator to accumulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OccupationIndicator {
    /// 1{x < beta} — the neutral-floor occupation of the on-off regime.
    BelowBeta,
    /// 1{beta ≤ x ≤ 1−beta} — interior occupation for the double-neutral
    /// regime (tends to zero).
    MidInterval,
}

impl OccupationIndicator {
    pub fn label(self) -> &'static str {
        match self {
            OccupationIndicator::BelowBeta => "below_beta",
            OccupationIndicator::MidInterval => "mid_interval",
        }
    }
}

/// Running occupation fraction over the first n states (i = 0 .. n−1) of
/// the orbit, reported at each checkpoint.
pub fn occupation_fraction(
    family: &MapFamily,
    word: &SymbolWord,
    x0: f64,
    beta: f64,
    checkpoints: &[usize],
    indicator: OccupationIndicator,
) -> Result<ExperimentRecord, EngineError> {
    assert!(beta > 0.0 && beta < 0.5);
    let horizon = *checkpoints.iter().max().expect("need at least one checkpoint");
    if word.len() + 1 < horizon {
        return Err(EngineError::WordTooShort { len: word.len(), needed: horizon - 1 });
    }
    let k = logit(beta);
    let hit = |y: f64| match indicator {
        OccupationIndicator::BelowBeta => y < k,
        OccupationIndicator::MidInterval => y >= k && y <= -k,
    };
    let mut sorted = checkpoints.to_vec();
    sorted.sort_unstable();
    let mut record = ExperimentRecord::new(
        "occupation",
        &["n", "fraction"],
        RecordProvenance {
            seed: word.provenance().seed,
            stream_lo: word.provenance().stream,
            stream_hi: word.provenance().stream + 1,
        },
    );
    record.set_param("x0", x0);
    record.set_param("beta", beta);
    record.set_param("indicator", indicator.label());
    record.set_param("surrogate", "running fraction at checkpoint decades");
    let mut y = logit(x0);
    let mut count = 0u64;
    let mut next = 0usize;
    for i in 0..horizon {
        if hit(y) {
            count += 1;
        }
        while next < sorted.len() && sorted[next] == i + 1 {
            record.rows.push(vec![(i + 1) as f64, count as f64 / (i + 1) as f64]);
            next += 1;
        }
        if i + 1 < horizon {
            y = family.map_for(word.symbols()[i]).eval_logit(y);
        }
    }
    Ok(record)
}

/// Run-length decomposition of a logit orbit at a threshold K: durations of
/// maximal runs of consecutive states at or below K (laminar) and above K
/// (burst). States 0 .. horizon−1 are decomposed, so the durations always
/// sum to the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcursionStats {
    /// Durations of maximal runs with y ≤ K, in order of occurrence.
    pub laminar: Vec<u64>,
    /// Durations of maximal runs with y > K, in order of occurrence.
    pub burst: Vec<u64>,
    /// Whether the final run was cut short by the horizon (the state after
    /// the last decomposed one continues the run).
    pub truncated: bool,
}

impl ExcursionStats {
    pub fn total(&self) -> u64 {
        self.laminar.iter().sum::<u64>() + self.burst.iter().sum::<u64>()
    }

    pub fn mean_laminar(&self) -> f64 {
        mean_u64(&self.laminar)
    }

    pub fn mean_burst(&self) -> f64 {
        mean_u64(&self.burst)
    }
}

fn mean_u64(v: &[u64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<u64>() as f64 / v.len() as f64
    }
}

/// Decompose the orbit of x0 at logit threshold `k_logit` over `horizon`
/// states, and emit the laminar-run survival curve as plot data.
pub fn excursion_statistics(
    family: &MapFamily,
    word: &SymbolWord,
    x0: f64,
    horizon: usize,
    k_logit: f64,
) -> Result<(ExcursionStats, ExperimentRecord), EngineError> {
    assert!(horizon >= 1);
    if word.len() < horizon {
        return Err(EngineError::WordTooShort { len: word.len(), needed: horizon });
    }
    let mut laminar = Vec::new();
    let mut burst = Vec::new();
    let mut y = logit(x0);
    let mut below = y <= k_logit;
    let mut run = 1u64;
    for i in 0..horizon {
        let next = family.map_for(word.symbols()[i]).eval_logit(y);
        if i + 1 < horizon {
            let next_below = next <= k_logit;
            if next_below == below {
                run += 1;
            } else {
                if below {
                    laminar.push(run);
                } else {
                    burst.push(run);
                }
                below = next_below;
                run = 1;
            }
        } else {
            // Final run: peek at the state after the horizon to decide
            // whether the horizon cut it short.
            let truncated = (next <= k_logit) == below;
            if below {
                laminar.push(run);
            } else {
                burst.push(run);
            }
            let stats = ExcursionStats { laminar, burst, truncated };
            let record = excursion_record(&stats, word, x0, horizon, k_logit);
            return Ok((stats, record));
        }
        y = next;
    }
    unreachable!("horizon >= 1 returns inside the loop");
}

fn excursion_record(
    stats: &ExcursionStats,
    word: &SymbolWord,
    x0: f64,
    horizon: usize,
    k_logit: f64,
) -> ExperimentRecord {
    let mut record = ExperimentRecord::new(
        "excursions",
        &["duration", "laminar_survival"],
        RecordProvenance {
            seed: word.provenance().seed,
            stream_lo: word.provenance().stream,
            stream_hi: word.provenance().stream + 1,
        },
    );
    record.set_param("x0", x0);
    record.set_param("horizon", horizon);
    record.set_param("k_logit", k_logit);
    record.set_param("laminar_count", stats.laminar.len());
    record.set_param("burst_count", stats.burst.len());
    record.set_param("laminar_mean", stats.mean_laminar());
    record.set_param("burst_mean", stats.mean_burst());
    record.set_param("laminar_max", stats.laminar.iter().max().copied().unwrap_or(0));
    record.set_param("burst_max", stats.burst.iter().max().copied().unwrap_or(0));
    record.set_param("truncated", stats.truncated);
    // Log-spaced survival curve of the laminar durations.
    if !stats.laminar.is_empty() {
        let mut sorted = stats.laminar.clone();
        sorted.sort_unstable();
        let n = sorted.len() as f64;
        let max = *sorted.last().unwrap();
        let mut d = 1u64;
        while d <= max {
            let surviving = sorted.len() - sorted.partition_point(|&x| x < d);
            record.rows.push(vec![d as f64, surviving as f64 / n]);
            d = (d * 2).max(d + 1);
        }
    }
    record
}

/// Configuration for the scaled-tail distribution experiment.
#[derive(Debug, Clone)]
pub struct TailLawConfig {
    pub x0: f64,
    pub steps: usize,
    pub samples: usize,
    pub a_grid: Vec<f64>,
    pub seed: u64,
    pub stream_base: u64,
}

/// Empirical P(x_n ≥ e^{−a·√n}) over independent words against the
/// half-normal CDF ∫₀^a √(2/π)·e^{−t²/2} dt.
pub fn tail_law_experiment(family: &MapFamily, cfg: &TailLawConfig) -> ExperimentRecord {
    let probs = Probabilities::new(family.probabilities().0).expect("family probabilities valid");
    let sqrt_n = (cfg.steps as f64).sqrt();
    let log_tails: Vec<f64> = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|k| {
            let mut stream = WordStream::new(
                probs,
                Provenance { seed: cfg.seed, stream: cfg.stream_base + k, offset: 0 },
            );
            let mut y = logit(cfg.x0);
            for _ in 0..cfg.steps {
                y = family.map_for(stream.next_symbol()).eval_logit(y);
            }
            crate::interval_maps::ln_sigmoid(y)
        })
        .collect();

    let mut record = ExperimentRecord::new(
        "tail_law",
        &["a", "empirical", "theoretical", "difference"],
        RecordProvenance {
            seed: cfg.seed,
            stream_lo: cfg.stream_base,
            stream_hi: cfg.stream_base + cfg.samples as u64,
        },
    );
    record.set_param("x0", cfg.x0);
    record.set_param("steps", cfg.steps);
    record.set_param("samples", cfg.samples);
    record.set_param("surrogate", "sup distance at fixed n");
    for &a in &cfg.a_grid {
        let cut = -a * sqrt_n;
        let empirical =
            log_tails.iter().filter(|&&t| t >= cut).count() as f64 / cfg.samples as f64;
        let theoretical = half_normal_cdf(a);
        record.rows.push(vec![a, empirical, theoretical, empirical - theoretical]);
    }
    record
}

/// CDF of the half-normal law, ∫₀^a √(2/π)·e^{−t²/2} dt, by adaptive
/// Simpson quadrature to 1e−12.
pub fn half_normal_cdf(a: f64) -> f64 {
    assert!(a >= 0.0);
    if a == 0.0 {
        return 0.0;
    }
    if a > 40.0 {
        return 1.0;
    }
    let density = |t: f64| (2.0 / std::f64::consts::PI).sqrt() * (-0.5 * t * t).exp();
    adaptive_simpson(&density, 0.0, a, 1e-12, 40).min(1.0)
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, eps: f64, depth: usize) -> f64 {
    fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        eps: f64,
        depth: usize,
    ) -> f64 {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, fa, m, fm, flm);
        let right = simpson(m, fm, b, fb, frm);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * eps {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, fa, m, fm, lm, flm, left, 0.5 * eps, depth - 1)
                + recurse(f, m, fm, b, fb, rm, frm, right, 0.5 * eps, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let (fa, fb, fm) = (f(a), f(b), f(m));
    let whole = simpson(a, fa, b, fb, fm);
    recurse(f, a, fa, b, fb, m, fm, whole, eps, depth)
}

/// Configuration for the pullback-vs-forward contrast.
#[derive(Debug, Clone)]
pub struct PullbackConfig {
    pub x0: f64,
    pub n_grid: Vec<usize>,
    pub words_per_n: usize,
    pub beta: f64,
    pub reentry_window: usize,
    pub seed: u64,
    pub stream_base: u64,
}

/// Contrast the two limit notions with fresh words per n: pullback medians
/// must decay while forward orbits keep re-entering \[beta, 1].
///
/// Word k of grid entry g uses stream `base + 2·(g·words_per_n + k)` for
/// the past and `… + 1` for the forward word.
pub fn pullback_vs_forward(family: &MapFamily, cfg: &PullbackConfig) -> ExperimentRecord {
    let probs = Probabilities::new(family.probabilities().0).expect("family probabilities valid");
    let k_beta = logit(cfg.beta);
    let rows: Vec<Vec<f64>> = cfg
        .n_grid
        .iter()
        .enumerate()
        .map(|(g, &n)| {
            let per_word: Vec<(f64, f64, bool, bool)> = (0..cfg.words_per_n as u64)
                .into_par_iter()
                .map(|k| {
                    let pair = (g * cfg.words_per_n) as u64 + k;
                    let mut past = WordStream::new(
                        probs,
                        Provenance {
                            seed: cfg.seed,
                            stream: cfg.stream_base + 2 * pair,
                            offset: 0,
                        },
                    );
                    let mut forward = WordStream::new(
                        probs,
                        Provenance {
                            seed: cfg.seed,
                            stream: cfg.stream_base + 2 * pair + 1,
                            offset: 0,
                        },
                    );
                    let y0 = logit(cfg.x0);
                    let mut yp = y0;
                    let mut yf = y0;
                    for _ in 0..n {
                        yp = family.map_for(past.next_symbol()).eval_logit(yp);
                        yf = family.map_for(forward.next_symbol()).eval_logit(yf);
                    }
                    let below = yf < k_beta;
                    let mut reenters = yf >= k_beta;
                    let mut y = yf;
                    for _ in 0..cfg.reentry_window {
                        if reenters {
                            break;
                        }
                        y = family.map_for(forward.next_symbol()).eval_logit(y);
                        reenters = y >= k_beta;
                    }
                    (sigmoid(yp), sigmoid(yf), below, reenters)
                })
                .collect();
            let pullbacks: Vec<f64> = per_word.iter().map(|r| r.0).collect();
            let forwards: Vec<f64> = per_word.iter().map(|r| r.1).collect();
            let below = per_word.iter().filter(|r| r.2).count() as f64 / per_word.len() as f64;
            let reent = per_word.iter().filter(|r| r.3).count() as f64 / per_word.len() as f64;
            vec![n as f64, median(&pullbacks), median(&forwards), below, reent]
        })
        .collect();

    let total_words = (cfg.n_grid.len() * cfg.words_per_n) as u64;
    let mut record = ExperimentRecord::new(
        "pullback_vs_forward",
        &["n", "pullback_median", "forward_median", "forward_below_beta", "reentry_fraction"],
        RecordProvenance {
            seed: cfg.seed,
            stream_lo: cfg.stream_base,
            stream_hi: cfg.stream_base + 2 * total_words,
        },
    );
    record.set_param("x0", cfg.x0);
    record.set_param("beta", cfg.beta);
    record.set_param("words_per_n", cfg.words_per_n);
    record.set_param("reentry_window", cfg.reentry_window);
    record.rows = rows;
    record
}

/// Configuration for the drift experiment.
#[derive(Debug, Clone)]
pub struct DriftConfig {
    pub x0: f64,
    pub samples: usize,
    pub horizon: usize,
    pub delta: f64,
    pub seed: u64,
    pub stream_base: u64,
}

/// Fraction of orbits with f^horizon(x0) > 1−delta, one stream per sample.
pub fn drift_experiment(family: &MapFamily, cfg: &DriftConfig) -> (f64, ExperimentRecord) {
    let probs = Probabilities::new(family.probabilities().0).expect("family probabilities valid");
    let threshold = -logit(cfg.delta);
    let finals: Vec<f64> = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|k| {
            let mut stream = WordStream::new(
                probs,
                Provenance { seed: cfg.seed, stream: cfg.stream_base + k, offset: 0 },
            );
            let mut y = logit(cfg.x0);
            for _ in 0..cfg.horizon {
                y = family.map_for(stream.next_symbol()).eval_logit(y);
            }
            y
        })
        .collect();
    let reached = finals.iter().filter(|&&y| y > threshold).count();
    let fraction = reached as f64 / cfg.samples as f64;

    let mut record = ExperimentRecord::new(
        "drift",
        &["sample", "final_logit", "reached"],
        RecordProvenance {
            seed: cfg.seed,
            stream_lo: cfg.stream_base,
            stream_hi: cfg.stream_base + cfg.samples as u64,
        },
    );
    record.set_param("x0", cfg.x0);
    record.set_param("horizon", cfg.horizon);
    record.set_param("delta", cfg.delta);
    record.set_param("fraction", fraction);
    for (i, &y) in finals.iter().enumerate() {
        record.rows.push(vec![i as f64, y, if y > threshold { 1.0 } else { 0.0 }]);
    }
    (fraction, record)
}

/// Plain-coordinate time series of one orbit, for figure emission.
pub fn orbit_timeseries(
    family: &MapFamily,
    word: &SymbolWord,
    x0: f64,
    n: usize,
    stride: usize,
) -> Result<ExperimentRecord, EngineError> {
    let orbit =
        crate::skew_engine::forward_orbit(family, word, logit(x0), n, crate::skew_engine::Coordinate::Logit, stride)?;
    let mut record = ExperimentRecord::new(
        "timeseries",
        &["step", "x"],
        RecordProvenance {
            seed: word.provenance().seed,
            stream_lo: word.provenance().stream,
            stream_hi: word.provenance().stream + 1,
        },
    );
    record.set_param("x0", x0);
    record.set_param("n", n);
    record.set_param("stride", stride.max(1));
    for &(step, y) in &orbit.samples {
        record.rows.push(vec![step as f64, sigmoid(y)]);
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol_dynamics::sample_word;

    fn all_ones(n: usize) -> SymbolWord {
        SymbolWord::from_symbols(vec![1; n])
    }

    fn all_twos(n: usize) -> SymbolWord {
        SymbolWord::from_symbols(vec![2; n])
    }

    #[test]
    fn basin_trap_below_the_attracting_endpoint() {
        let family = MapFamily::logistic_pair(0.5);
        let delta = 1e-3;
        let out = basin_classify(&family, &all_ones(2000), delta / 2.0, 2000, delta).unwrap();
        assert_eq!(out, BasinOutcome::ToZero);
        let out = basin_classify(&family, &all_ones(2000), 1.0, 2000, delta).unwrap();
        assert_eq!(out, BasinOutcome::ToOne);
        // An orbit that keeps moving up from the middle is decided upward.
        let out = basin_classify(&family, &all_twos(2000), 0.5, 2000, delta).unwrap();
        assert_eq!(out, BasinOutcome::ToOne);
    }

    #[test]
    fn basin_outcomes_are_monotone_in_the_initial_point() {
        // For a fixed word, ToZero points form a down-set, ToOne an up-set,
        // with Undecided (if any) an interval between them.
        let family = MapFamily::logistic_pair(0.5);
        let probs = Probabilities::uniform();
        for stream in 0..5 {
            let w = sample_word(probs, 800, 99, stream);
            let outcomes: Vec<BasinOutcome> = (1..100)
                .map(|k| basin_classify(&family, &w, k as f64 / 100.0, 800, 1e-3).unwrap())
                .collect();
            let first_not_zero =
                outcomes.iter().position(|&o| o != BasinOutcome::ToZero).unwrap_or(outcomes.len());
            let first_one =
                outcomes.iter().position(|&o| o == BasinOutcome::ToOne).unwrap_or(outcomes.len());
            assert!(first_not_zero <= first_one);
            for (i, &o) in outcomes.iter().enumerate() {
                match o {
                    BasinOutcome::ToZero => assert!(i < first_not_zero),
                    BasinOutcome::Undecided => {
                        assert!(i >= first_not_zero && i < first_one)
                    }
                    BasinOutcome::ToOne => assert!(i >= first_one),
                }
            }
        }
    }

    #[test]
    fn scan_reduces_to_global_frequencies_for_trivial_cells() {
        let family = MapFamily::logistic_pair(0.5);
        let cfg = ScanConfig {
            cylinder_len: 0,
            subdivisions: 1,
            samples_per_cell: 40,
            horizon: 600,
            delta: 1e-3,
            seed: 5,
            stream_base: 0,
        };
        let (stats, record) = intermingled_scan(&family, &cfg);
        assert_eq!(stats.len(), 1);
        let s = &stats[0];
        assert!((s.to_zero + s.to_one + s.undecided - 1.0).abs() < 1e-12);
        assert!(s.to_zero > 0.0 && s.to_one > 0.0);
        assert_eq!(record.rows.len(), 1);
    }

    #[test]
    fn scan_is_deterministic() {
        let family = MapFamily::logistic_pair(0.5);
        let cfg = ScanConfig {
            cylinder_len: 2,
            subdivisions: 2,
            samples_per_cell: 10,
            horizon: 300,
            delta: 1e-3,
            seed: 7,
            stream_base: 100,
        };
        let (_, a) = intermingled_scan(&family, &cfg);
        let (_, b) = intermingled_scan(&family, &cfg);
        assert_eq!(a, b);
    }

    #[test]
    fn graph_estimate_tracks_monotone_words() {
        let family = MapFamily::logistic_pair(0.5);
        let horizon = 300;
        let xi_up = invariant_graph_estimate(&family, &all_twos(horizon), 1e-10, horizon).unwrap();
        assert!(xi_up < 1e-3, "all-up word should push the threshold to 0, got {xi_up}");
        let xi_down = invariant_graph_estimate(&family, &all_ones(horizon), 1e-10, horizon).unwrap();
        assert!(xi_down > 1.0 - 1e-3, "all-down word should push the threshold to 1, got {xi_down}");
    }

    #[test]
    fn graph_estimate_is_equivariant_under_the_shift() {
        // The horizon must be long enough that the finite-horizon threshold
        // truncation (decaying exponentially) falls below the bisection
        // tolerance; the residual is then bounded by the tolerance alone.
        let family = MapFamily::logistic_pair(0.5);
        let tol = 1e-10;
        let horizon = 2000;
        let probs = Probabilities::uniform();
        for stream in 0..20 {
            let w = sample_word(probs, horizon + 1, 13, stream);
            let xi = invariant_graph_estimate(&family, &w, tol, horizon).unwrap();
            let shifted = w.shift(1).unwrap();
            let xi_next = invariant_graph_estimate(&family, &shifted, tol, horizon).unwrap();
            let pushed = family.map_for(w.symbols()[0]).eval(xi);
            assert!(
                (xi_next - pushed).abs() <= 10.0 * tol,
                "stream {stream}: |{xi_next} - {pushed}| > 10·tol"
            );
        }
    }

    #[test]
    fn equal_initial_points_stay_synchronized() {
        let family = MapFamily::inverse_logistic_pair(0.5);
        let cfg = SyncConfig {
            pair: (0.4, 0.4),
            words: 8,
            horizon: 50,
            stride: 10,
            seed: 1,
            stream_base: 0,
        };
        let record = synchronization_experiment(&family, &cfg);
        assert!(record.column("median_gap").iter().all(|&g| g == 0.0));
        assert!(record.column("p90_gap").iter().all(|&g| g == 0.0));
    }

    #[test]
    fn sync_gaps_shrink_for_expanding_boundaries() {
        let family = MapFamily::inverse_logistic_pair(0.5);
        let cfg = SyncConfig {
            pair: (0.1, 0.9),
            words: 64,
            horizon: 2000,
            stride: 100,
            seed: 2,
            stream_base: 0,
        };
        let record = synchronization_experiment(&family, &cfg);
        let medians = record.column("median_gap");
        assert!(medians[0] > 0.5);
        assert!(*medians.last().unwrap() < 1e-20);
        let slope = log_median_decay_slope(&record, 1e-60, 1e-2).unwrap();
        assert!(slope < 0.0);
    }

    #[test]
    fn occupation_fraction_is_one_for_a_single_state_below_beta() {
        let family = MapFamily::damped_walk(0.3);
        let record = occupation_fraction(
            &family,
            &all_ones(1),
            0.01,
            0.05,
            &[1],
            OccupationIndicator::BelowBeta,
        )
        .unwrap();
        assert_eq!(record.rows, vec![vec![1.0, 1.0]]);
    }

    #[test]
    fn occupation_fractions_lie_in_unit_interval_and_match_direct_count() {
        let family = MapFamily::damped_walk(0.3);
        let probs = Probabilities::uniform();
        let w = sample_word(probs, 5000, 21, 4);
        let record = occupation_fraction(
            &family,
            &w,
            0.3,
            0.05,
            &[1000, 5000],
            OccupationIndicator::BelowBeta,
        )
        .unwrap();
        // Direct recount through the orbit in logit coordinates.
        let k = logit(0.05);
        let mut y = logit(0.3);
        let mut count = 0;
        for i in 0..1000 {
            if y < k {
                count += 1;
            }
            y = family.map_for(w.symbols()[i]).eval_logit(y);
        }
        assert_eq!(record.rows[0][1], count as f64 / 1000.0);
        for row in &record.rows {
            assert!((0.0..=1.0).contains(&row[1]));
        }
    }

    #[test]
    fn excursions_partition_the_horizon() {
        let family = MapFamily::damped_walk(0.3);
        let probs = Probabilities::uniform();
        let k = logit(0.05);
        for stream in 0..5 {
            let w = sample_word(probs, 20_000, 3, stream);
            let (stats, _) = excursion_statistics(&family, &w, 0.3, 20_000, k).unwrap();
            assert_eq!(stats.total(), 20_000);
            assert!(stats.laminar.iter().all(|&d| d >= 1));
            assert!(stats.burst.iter().all(|&d| d >= 1));
            // Runs alternate, so the counts differ by at most one.
            let diff = stats.laminar.len() as i64 - stats.burst.len() as i64;
            assert!(diff.abs() <= 1);
        }
    }

    #[test]
    fn forced_laminar_orbit_is_a_single_truncated_run() {
        let family = MapFamily::damped_walk(0.3);
        let k = logit(0.05);
        let (stats, record) =
            excursion_statistics(&family, &all_ones(500), 0.01, 500, k).unwrap();
        assert_eq!(stats.laminar, vec![500]);
        assert!(stats.burst.is_empty());
        assert!(stats.truncated);
        assert_eq!(record.parameters["laminar_count"], "1");
    }

    #[test]
    fn half_normal_cdf_matches_series_oracle() {
        // erf(z) by its Maclaurin series: the half-normal CDF is erf(a/√2).
        let erf_series = |z: f64| {
            let mut term = z;
            let mut sum = z;
            for n in 1..200 {
                term *= -z * z / n as f64;
                sum += term / (2 * n + 1) as f64;
            }
            sum * 2.0 / std::f64::consts::PI.sqrt()
        };
        for a in [0.1, 0.25, 0.5, 1.0, 1.7, 2.5, 3.0] {
            let expected = erf_series(a / std::f64::consts::SQRT_2);
            let got = half_normal_cdf(a);
            assert!((got - expected).abs() < 1e-10, "a={a}: {got} vs {expected}");
        }
        assert!((half_normal_cdf(1.0) - 0.682_689_492_137_086).abs() < 1e-10);
        assert!(half_normal_cdf(8.0) > 1.0 - 1e-10);
        assert_eq!(half_normal_cdf(0.0), 0.0);
        // Valid CDF: nondecreasing toward 1.
        let grid: Vec<f64> = (0..=32).map(|k| k as f64 * 0.25).collect();
        for pair in grid.windows(2) {
            assert!(half_normal_cdf(pair[0]) <= half_normal_cdf(pair[1]));
        }
    }

    #[test]
    fn tail_law_record_is_well_formed() {
        let family = MapFamily::damped_walk(0.3);
        let cfg = TailLawConfig {
            x0: 0.5,
            steps: 500,
            samples: 200,
            a_grid: vec![0.5, 1.0, 2.0],
            seed: 11,
            stream_base: 0,
        };
        let record = tail_law_experiment(&family, &cfg);
        assert_eq!(record.rows.len(), 3);
        for row in &record.rows {
            assert!((0.0..=1.0).contains(&row[1]));
            assert!((row[1] - row[2] - row[3]).abs() < 1e-15);
        }
        // The tail event {x_n ≥ e^{−a√n}} grows with a.
        assert!(record.rows[0][1] <= record.rows[1][1]);
        assert!(record.rows[1][1] <= record.rows[2][1]);
    }

    #[test]
    fn pullback_vs_forward_at_n_zero_returns_the_initial_point() {
        let family = MapFamily::damped_walk(0.3);
        let cfg = PullbackConfig {
            x0: 0.37,
            n_grid: vec![0],
            words_per_n: 16,
            beta: 0.05,
            reentry_window: 100,
            seed: 3,
            stream_base: 0,
        };
        let record = pullback_vs_forward(&family, &cfg);
        assert_eq!(record.rows[0][1], 0.37);
        assert_eq!(record.rows[0][2], 0.37);
    }

    #[test]
    fn drift_reaches_the_top_for_tilted_walks() {
        let family = MapFamily::moebius_pair(-1.0, 1.0, 0.4).unwrap();
        let cfg = DriftConfig {
            x0: 0.5,
            samples: 100,
            horizon: 2000,
            delta: 1e-6,
            seed: 4,
            stream_base: 0,
        };
        let (fraction, record) = drift_experiment(&family, &cfg);
        assert!(fraction > 0.95, "fraction {fraction}");
        assert_eq!(record.rows.len(), 100);
        // x0 = 1 stays at 1.
        let cfg_top = DriftConfig { x0: 1.0, samples: 10, ..cfg };
        let (fraction_top, _) = drift_experiment(&family, &cfg_top);
        assert_eq!(fraction_top, 1.0);
    }

    #[test]
    fn timeseries_record_has_plain_values() {
        let family = MapFamily::symmetric_walk();
        let probs = Probabilities::uniform();
        let w = sample_word(probs, 100, 8, 0);
        let record = orbit_timeseries(&family, &w, 0.5, 100, 10).unwrap();
        assert_eq!(record.rows.len(), 11);
        for row in &record.rows {
            assert!((0.0..=1.0).contains(&row[1]));
        }
    }

    #[test]
    fn drivers_are_deterministic_across_reruns() {
        let family = MapFamily::damped_walk(0.3);
        let cfg = TailLawConfig {
            x0: 0.5,
            steps: 200,
            samples: 64,
            a_grid: vec![1.0],
            seed: 17,
            stream_base: 5,
        };
        assert_eq!(tail_law_experiment(&family, &cfg), tail_law_experiment(&family, &cfg));
        let dcfg = DriftConfig {
            x0: 0.5,
            samples: 32,
            horizon: 500,
            delta: 1e-4,
            seed: 6,
            stream_base: 0,
        };
        let drift_a = drift_experiment(&MapFamily::moebius_pair(-1.0, 1.0, 0.4).unwrap(), &dcfg);
        let drift_b = drift_experiment(&MapFamily::moebius_pair(-1.0, 1.0, 0.4).unwrap(), &dcfg);
        assert_eq!(drift_a.1, drift_b.1);
    }
}
