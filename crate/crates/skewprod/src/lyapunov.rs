//! Boundary and empirical Lyapunov exponents, regime classification, and
//! the sufficient-condition check for minimality of the generated function
//! system.

use crate::interval_maps::{logit, sigmoid, Endpoint, MapFamily};
use crate::symbol_dynamics::SymbolWord;
use serde::Serialize;

/// The dynamical regimes, keyed by the signs of the boundary exponents
/// (L0, L1): negative = attracting, zero = neutral, positive = repelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// L0 < 0, L1 < 0: both boundaries attract, basins intermingle.
    IntermingledBasins,
    /// L0 > 0, L1 > 0: both boundaries repel, fiber orbits synchronize.
    Synchronization,
    /// L0 = 0, L1 > 0: neutral floor with recurrent bursts away from it.
    OnOffAtZero,
    /// L0 > 0, L1 = 0: mirror image of `OnOffAtZero`.
    OnOffAtOne,
    /// L0 = L1 = 0: neutral at both ends; interior time has zero density.
    DoubleNeutral,
    /// L0 ≥ 0, L1 < 0: almost every orbit drifts to 1.
    DriftToOne,
    /// L0 < 0, L1 ≥ 0: almost every orbit drifts to 0.
    DriftToZero,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::IntermingledBasins => "intermingled_basins",
            Regime::Synchronization => "synchronization",
            Regime::OnOffAtZero => "onoff_at_zero",
            Regime::OnOffAtOne => "onoff_at_one",
            Regime::DoubleNeutral => "double_neutral",
            Regime::DriftToOne => "drift_to_one",
            Regime::DriftToZero => "drift_to_zero",
        }
    }

    /// Regime of the family conjugated by x ↦ 1−x.
    pub fn mirrored(self) -> Regime {
        match self {
            Regime::OnOffAtZero => Regime::OnOffAtOne,
            Regime::OnOffAtOne => Regime::OnOffAtZero,
            Regime::DriftToOne => Regime::DriftToZero,
            Regime::DriftToZero => Regime::DriftToOne,
            other => other,
        }
    }
}

/// Boundary exponents in nats per step, plus the sign-table classification.
#[derive(Debug, Clone, Serialize)]
pub struct RegimeReport {
    #[serde(rename = "L0")]
    pub l0: f64,
    #[serde(rename = "L1")]
    pub l1: f64,
    pub regime: Regime,
    pub zero_tolerance: f64,
}

/// Default zero tolerance used by the CLI.
pub const DEFAULT_ZERO_TOLERANCE: f64 = 1e-12;

/// L(e) = p1·ln f_down′(e) + p2·ln f_up′(e), from exact endpoint
/// log-derivatives. A symmetric pair with reciprocal multipliers and
/// p = (1/2, 1/2) yields exactly 0.
pub fn boundary_exponent(family: &MapFamily, endpoint: Endpoint) -> f64 {
    let (p1, p2) = family.probabilities();
    p1 * family.f_down.ln_derivative_at(endpoint) + p2 * family.f_up.ln_derivative_at(endpoint)
}

/// Birkhoff average (1/n)·Σ ln f′ along the orbit of x0 under the word,
/// iterated in logit coordinates. x0 may be 0 or 1 (the orbit then stays at
/// the endpoint and the exact endpoint log-derivatives are summed).
pub fn empirical_fiber_exponent(family: &MapFamily, word: &SymbolWord, x0: f64, n: usize) -> f64 {
    assert!(n >= 1, "need at least one step");
    assert!(word.len() >= n, "word of length {} too short for {} steps", word.len(), n);
    let mut y = logit(x0);
    let mut sum = 0.0;
    for &s in &word.symbols()[..n] {
        let map = family.map_for(s);
        sum += if y == f64::NEG_INFINITY {
            map.ln_derivative_at(Endpoint::Zero)
        } else if y == f64::INFINITY {
            map.ln_derivative_at(Endpoint::One)
        } else {
            map.ln_derivative(sigmoid(y))
        };
        y = map.eval_logit(y);
    }
    sum / n as f64
}

fn sign_with_tolerance(l: f64, tol: f64) -> i8 {
    if l == 0.0 || l.abs() <= tol {
        0
    } else if l > 0.0 {
        1
    } else {
        -1
    }
}

/// Classify the regime from the signs of (L0, L1); |L| ≤ zero_tolerance
/// counts as zero (exact zeros need no tolerance).
pub fn classify_regime(family: &MapFamily, zero_tolerance: f64) -> RegimeReport {
    assert!(zero_tolerance >= 0.0);
    let l0 = boundary_exponent(family, Endpoint::Zero);
    let l1 = boundary_exponent(family, Endpoint::One);
    let signs =
        (sign_with_tolerance(l0, zero_tolerance), sign_with_tolerance(l1, zero_tolerance));
    let regime = match signs {
        (-1, -1) => Regime::IntermingledBasins,
        (1, 1) => Regime::Synchronization,
        (0, 1) => Regime::OnOffAtZero,
        (1, 0) => Regime::OnOffAtOne,
        (0, 0) => Regime::DoubleNeutral,
        // A non-attracting floor with an attracting ceiling drifts up, and
        // mirrored down; this covers the neutral-attracting mixes.
        (1, -1) | (0, -1) => Regime::DriftToOne,
        (-1, 1) | (-1, 0) => Regime::DriftToZero,
        _ => unreachable!(),
    };
    RegimeReport { l0, l1, regime, zero_tolerance }
}

/// Which sufficient condition fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MinimalityClause {
    /// ln λ / ln μ admits no integer relation q·ratio ≈ p with q ≤ Q.
    IrrationalRatio,
    /// The ratio is rationally dependent but the endpoint second-derivative
    /// ratios differ.
    SecondDerivative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MinimalityVerdict {
    SufficientConditionHolds,
    Inconclusive,
}

impl MinimalityVerdict {
    pub fn label(&self) -> &'static str {
        match self {
            MinimalityVerdict::SufficientConditionHolds => "sufficient_condition_holds",
            MinimalityVerdict::Inconclusive => "inconclusive",
        }
    }
}

/// Outcome of the minimality sufficient-condition test. Irrationality is
/// undecidable numerically, so a holding verdict always records the searched
/// denominator bound and tolerance; there is no "not minimal" verdict.
#[derive(Debug, Clone, Serialize)]
pub struct MinimalityReport {
    pub verdict: MinimalityVerdict,
    pub clause: Option<MinimalityClause>,
    /// Endpoint whose conditions fired ("0" or "1"), if any.
    pub endpoint: Option<String>,
    #[serde(rename = "Q")]
    pub denominator_bound: u64,
    #[serde(rename = "tau")]
    pub tolerance: f64,
    pub detail: String,
}

/// Smallest residual min_p |q·x − p| over continued-fraction convergents
/// with denominator q ≤ bound, with the achieving (p, q). Convergents
/// realize the successive minima of |q·x − p|, so scanning them suffices.
fn best_integer_relation(x: f64, bound: u64) -> (f64, i128, u64) {
    let ax = x.abs();
    let (mut p0, mut q0): (i128, i128) = (1, 0);
    let (mut p1, mut q1): (i128, i128) = (ax.floor() as i128, 1);
    let mut t = ax - ax.floor();
    let mut best = (ax - p1 as f64).abs();
    let mut best_pq = (p1, 1u64);
    for _ in 0..64 {
        if q1 < 0 || q1 as u64 > bound {
            break;
        }
        let res = (q1 as f64 * ax - p1 as f64).abs();
        if res < best {
            best = res;
            best_pq = (p1, q1 as u64);
        }
        if t == 0.0 {
            break;
        }
        t = 1.0 / t;
        let a = t.floor();
        t -= a;
        let (np, nq) = (a as i128 * p1 + p0, a as i128 * q1 + q0);
        p0 = p1;
        q0 = q1;
        p1 = np;
        q1 = nq;
    }
    let signed_p = if x < 0.0 { -best_pq.0 } else { best_pq.0 };
    (best, signed_p, best_pq.1)
}

struct EndpointConditions {
    lambda: f64,
    mu: f64,
    ratio_contracting: f64,
    ratio_expanding: f64,
}

/// Multipliers and second-derivative ratios at an endpoint, in the
/// coordinate where that endpoint sits at 0. At endpoint 1 the conjugation
/// x ↦ 1−x swaps the map roles and negates second derivatives.
fn endpoint_conditions(family: &MapFamily, e: Endpoint) -> Option<EndpointConditions> {
    let (contracting, expanding, sign) = match e {
        Endpoint::Zero => (&family.f_down, &family.f_up, 1.0),
        Endpoint::One => (&family.f_up, &family.f_down, -1.0),
    };
    let lambda = contracting.derivative_at(e);
    let mu = expanding.derivative_at(e);
    if !(lambda < 1.0 && mu > 1.0) {
        return None;
    }
    let ratio = |map: &crate::interval_maps::IntervalMap, d: f64| {
        sign * map.second_derivative_at(e) / (d * d - d)
    };
    Some(EndpointConditions {
        lambda,
        mu,
        ratio_contracting: ratio(contracting, lambda),
        ratio_expanding: ratio(expanding, mu),
    })
}

/// Test the sufficient conditions for minimality on (0,1): at either
/// endpoint, ln λ / ln μ free of integer relations up to the denominator
/// bound, or distinct second-derivative ratios f″(e)/(λ²−λ).
///
/// The rational-dependence residual is |q·ratio − p| (how close q·ratio is
/// to an integer), not |ratio − p/q|: convergents drive the latter below any
/// fixed tolerance once q² exceeds 1/tolerance, which would flag every real
/// number as dependent.
pub fn minimality_check(
    family: &MapFamily,
    denominator_bound: u64,
    tolerance: f64,
) -> MinimalityReport {
    let mut details: Vec<String> = Vec::new();
    for e in [Endpoint::Zero, Endpoint::One] {
        let tag = match e {
            Endpoint::Zero => "0",
            Endpoint::One => "1",
        };
        let Some(c) = endpoint_conditions(family, e) else {
            details.push(format!(
                "endpoint {tag}: precondition failed (need contracting multiplier < 1 < expanding multiplier)"
            ));
            continue;
        };
        let ratio = c.lambda.ln() / c.mu.ln();
        let (residual, p, q) = best_integer_relation(ratio, denominator_bound);
        if residual > tolerance {
            return MinimalityReport {
                verdict: MinimalityVerdict::SufficientConditionHolds,
                clause: Some(MinimalityClause::IrrationalRatio),
                endpoint: Some(tag.to_string()),
                denominator_bound,
                tolerance,
                detail: format!(
                    "endpoint {tag}: ln λ/ln μ = {ratio} has no integer relation with q ≤ {denominator_bound} \
                     (best |q·x−p| = {residual:e} at p/q = {p}/{q})"
                ),
            };
        }
        details.push(format!("endpoint {tag}: ratio {ratio} ≈ {p}/{q} (residual {residual:e})"));
        if (c.ratio_contracting - c.ratio_expanding).abs() > tolerance {
            return MinimalityReport {
                verdict: MinimalityVerdict::SufficientConditionHolds,
                clause: Some(MinimalityClause::SecondDerivative),
                endpoint: Some(tag.to_string()),
                denominator_bound,
                tolerance,
                detail: format!(
                    "endpoint {tag}: second-derivative ratios differ: {} vs {}",
                    c.ratio_contracting, c.ratio_expanding
                ),
            };
        }
        details.push(format!(
            "endpoint {tag}: second-derivative ratios equal ({} = {})",
            c.ratio_contracting, c.ratio_expanding
        ));
    }
    MinimalityReport {
        verdict: MinimalityVerdict::Inconclusive,
        clause: None,
        endpoint: None,
        denominator_bound,
        tolerance,
        detail: details.join("; "),
    }
}
