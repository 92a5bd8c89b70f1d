//! Discretized probability measures on \[0,1\] and the operator machinery on
//! them: push-forwards, the averaged transfer operator, Krylov–Bogolyubov
//! averaging, power-law tail cones, the noise-smoothed operator, the fiber
//! Lyapunov integral, relative entropy, and pullback push-forwards.
//!
//! A measure is stored as two explicit boundary atoms plus weights on B
//! uniform interior bins. Atoms are first-class because the boundary delta
//! measures are always stationary and bins cannot represent them without
//! leakage. Push-forwards treat within-bin mass as uniform, which makes the
//! CDF exact at bin boundaries and O(1/B) inside bins; since both maps fix
//! the endpoints, atom mass never leaks into the interior or back.

use crate::interval_maps::{Endpoint, IntervalMap, MapFamily};
use crate::symbol_dynamics::SymbolWord;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MeasureError {
    #[error("measure components must be nonnegative")]
    NegativeComponent,
    #[error("total mass {0} differs from 1 by more than 1e-12")]
    BadTotalMass(f64),
    #[error("bin grids differ: {0} vs {1}")]
    GridMismatch(usize, usize),
    #[error("cone parameters need 0 < alpha < 1, 0 < q < 1, c > 0 and c·q^alpha > 1")]
    BadConeParams,
}

/// A probability measure on \[0,1\]: atoms at the endpoints plus
/// piecewise-uniform mass on B interior bins \[k/B, (k+1)/B).
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedMeasure {
    atom0: f64,
    atom1: f64,
    bins: Vec<f64>,
}

impl BinnedMeasure {
    pub fn from_parts(atom0: f64, atom1: f64, bins: Vec<f64>) -> Result<BinnedMeasure, MeasureError> {
        if atom0 < 0.0 || atom1 < 0.0 || bins.iter().any(|&w| w < 0.0) {
            return Err(MeasureError::NegativeComponent);
        }
        let total = atom0 + atom1 + bins.iter().sum::<f64>();
        if (total - 1.0).abs() > 1e-12 {
            return Err(MeasureError::BadTotalMass(total));
        }
        Ok(BinnedMeasure { atom0, atom1, bins })
    }

    /// Lebesgue measure: equal weight on every bin, no atoms.
    pub fn lebesgue(bin_count: usize) -> BinnedMeasure {
        assert!(bin_count >= 1);
        BinnedMeasure {
            atom0: 0.0,
            atom1: 0.0,
            bins: vec![1.0 / bin_count as f64; bin_count],
        }
    }

    /// Unit atom at 0.
    pub fn delta0(bin_count: usize) -> BinnedMeasure {
        BinnedMeasure { atom0: 1.0, atom1: 0.0, bins: vec![0.0; bin_count] }
    }

    /// Unit atom at 1.
    pub fn delta1(bin_count: usize) -> BinnedMeasure {
        BinnedMeasure { atom0: 0.0, atom1: 1.0, bins: vec![0.0; bin_count] }
    }

    pub fn bin_count(&self) -> usize {
        self.bins.len()
    }

    pub fn atom0(&self) -> f64 {
        self.atom0
    }

    pub fn atom1(&self) -> f64 {
        self.atom1
    }

    pub fn bins(&self) -> &[f64] {
        &self.bins
    }

    pub fn total_mass(&self) -> f64 {
        self.atom0 + self.atom1 + self.bins.iter().sum::<f64>()
    }

    pub fn interior_mass(&self) -> f64 {
        self.bins.iter().sum()
    }

    /// Cumulative interior mass: prefix[k] = mass of (0, k/B).
    fn prefix(&self) -> Vec<f64> {
        let mut prefix = Vec::with_capacity(self.bins.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for &w in &self.bins {
            acc += w;
            prefix.push(acc);
        }
        prefix
    }

    /// Interior mass of (0, x), linear within bins.
    pub fn interior_cdf(&self, x: f64) -> f64 {
        interior_cdf_from_prefix(&self.prefix(), x)
    }

    /// Mass of the half-open interval \[0, x) for x ∈ (0, 1]; includes the
    /// atom at 0, never the atom at 1.
    pub fn cdf_lower(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            self.atom0 + self.interior_cdf(x)
        }
    }

    /// Mass of the half-open interval (1−x, 1] for x ∈ (0, 1].
    pub fn cdf_upper(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            self.atom1 + (self.interior_mass() - self.interior_cdf(1.0 - x)).max(0.0)
        }
    }

    /// Convex combination s·self + (1−s)·other on the same grid.
    pub fn mix(&self, other: &BinnedMeasure, s: f64) -> Result<BinnedMeasure, MeasureError> {
        if self.bin_count() != other.bin_count() {
            return Err(MeasureError::GridMismatch(self.bin_count(), other.bin_count()));
        }
        let t = 1.0 - s;
        Ok(BinnedMeasure {
            atom0: s * self.atom0 + t * other.atom0,
            atom1: s * self.atom1 + t * other.atom1,
            bins: self
                .bins
                .iter()
                .zip(&other.bins)
                .map(|(&a, &b)| s * a + t * b)
                .collect(),
        })
    }

    /// Total variation distance on the binned representation:
    /// ½·Σ |difference| over atoms and bins.
    pub fn tv_distance(&self, other: &BinnedMeasure) -> f64 {
        assert_eq!(self.bin_count(), other.bin_count(), "grids differ");
        let mut sum = (self.atom0 - other.atom0).abs() + (self.atom1 - other.atom1).abs();
        sum += self
            .bins
            .iter()
            .zip(&other.bins)
            .map(|(&a, &b)| (a - b).abs())
            .sum::<f64>();
        0.5 * sum
    }
}

fn interior_cdf_from_prefix(prefix: &[f64], x: f64) -> f64 {
    let b = prefix.len() - 1;
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return prefix[b];
    }
    let t = x * b as f64;
    let idx = (t.floor() as usize).min(b - 1);
    let frac = t - idx as f64;
    prefix[idx] + (prefix[idx + 1] - prefix[idx]) * frac
}

/// Exact monotone push-forward: the new bin \[a, b) receives the m-mass of
/// [f⁻¹(a), f⁻¹(b)); atoms map to atoms since both endpoints are fixed.
pub fn pushforward(m: &BinnedMeasure, map: &IntervalMap) -> BinnedMeasure {
    let b = m.bin_count();
    let prefix = m.prefix();
    let mut edges = Vec::with_capacity(b + 1);
    for k in 0..=b {
        let t = k as f64 / b as f64;
        edges.push(interior_cdf_from_prefix(&prefix, map.inverse_eval(t)));
    }
    let bins = (0..b).map(|k| (edges[k + 1] - edges[k]).max(0.0)).collect();
    BinnedMeasure { atom0: m.atom0, atom1: m.atom1, bins }
}

/// The averaged push-forward p1·f_down m + p2·f_up m.
pub fn transfer(m: &BinnedMeasure, family: &MapFamily) -> BinnedMeasure {
    let (p1, _) = family.probabilities();
    let down = pushforward(m, &family.f_down);
    let up = pushforward(m, &family.f_up);
    down.mix(&up, p1).expect("pushforwards share the grid")
}

/// Cesàro average (1/n)·Σ 𝒯^r m0 together with the per-step residual
/// d(𝒯 m̄, m̄) in total variation.
pub fn krylov_bogolyubov(
    m0: &BinnedMeasure,
    family: &MapFamily,
    iterations: usize,
) -> (BinnedMeasure, Vec<f64>) {
    assert!(iterations >= 1);
    let mut power = m0.clone();
    let mut avg = m0.clone();
    let mut residuals = Vec::with_capacity(iterations);
    residuals.push(transfer(&avg, family).tv_distance(&avg));
    for n in 1..iterations {
        power = transfer(&power, family);
        let w = 1.0 / (n as f64 + 1.0);
        avg = avg.mix(&power, 1.0 - w).expect("same grid");
        residuals.push(transfer(&avg, family).tv_distance(&avg));
    }
    (avg, residuals)
}

/// Power-law tail cone: measures with m(\[0,x)) ≤ c·x^α and
/// m((1−x,1]) ≤ c·x^α for all x ≤ q. Requires c·q^α > 1, which extends the
/// bound trivially to all x ∈ \[0,1\] and keeps the cone closed under the
/// transfer operator when the multiplier condition holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeParams {
    pub c: f64,
    pub alpha: f64,
    pub q: f64,
}

impl ConeParams {
    pub fn new(c: f64, alpha: f64, q: f64) -> Result<ConeParams, MeasureError> {
        let valid = alpha > 0.0
            && alpha < 1.0
            && q > 0.0
            && q < 1.0
            && c > 0.0
            && c * q.powf(alpha) > 1.0;
        if !valid {
            return Err(MeasureError::BadConeParams);
        }
        Ok(ConeParams { c, alpha, q })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConeViolation {
    pub x: f64,
    pub bound: f64,
    pub actual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ConeCheck {
    pub inside: bool,
    pub first_violation: Option<ConeViolation>,
}

/// Verify both tail bounds on every bin boundary ≤ q. A positive boundary
/// atom violates the cone outright (the bound c·x^α vanishes as x → 0).
pub fn cone_check(m: &BinnedMeasure, cone: &ConeParams) -> ConeCheck {
    let fail = |x: f64, bound: f64, actual: f64| ConeCheck {
        inside: false,
        first_violation: Some(ConeViolation { x, bound, actual }),
    };
    if m.atom0 > 0.0 {
        return fail(0.0, 0.0, m.atom0);
    }
    if m.atom1 > 0.0 {
        return fail(0.0, 0.0, m.atom1);
    }
    let b = m.bin_count();
    let prefix = m.prefix();
    let interior = prefix[b];
    for k in 1..=b {
        let x = k as f64 / b as f64;
        if x > cone.q {
            break;
        }
        let bound = cone.c * x.powf(cone.alpha);
        let lower = prefix[k];
        if lower > bound {
            return fail(x, bound, lower);
        }
        let upper = interior - prefix[b - k];
        if upper > bound {
            return fail(x, bound, upper);
        }
    }
    ConeCheck { inside: true, first_violation: None }
}

/// Admissible cone parameters for a family with both boundary exponents
/// positive, found by direct search: verify Σ p_i (ρ_i − δ)^{−α} < 1 at both
/// endpoints and the inverse-map bound f⁻¹(x) ≤ x/(ρ−δ) on a grid in (0,q].
/// Returns the parameters and the slack δ that certified them.
pub fn find_cone_params(family: &MapFamily, grid: usize) -> Option<(ConeParams, f64)> {
    let (p1, p2) = family.probabilities();
    let maps = [&family.f_down, &family.f_up];
    let probs = [p1, p2];
    for &alpha in &[0.5, 0.3, 0.2, 0.1, 0.05] {
        for &delta in &[1e-4, 1e-3, 1e-2, 0.05] {
            for &q in &[0.2, 0.1, 0.05, 0.02] {
                let mut ok = true;
                for e in [Endpoint::Zero, Endpoint::One] {
                    let rhos: Vec<f64> = maps.iter().map(|f| f.derivative_at(e)).collect();
                    if rhos.iter().any(|&r| r - delta <= 0.0) {
                        ok = false;
                        break;
                    }
                    let sum: f64 = probs
                        .iter()
                        .zip(&rhos)
                        .map(|(&p, &r)| p / (r - delta).powf(alpha))
                        .sum();
                    if sum >= 1.0 {
                        ok = false;
                        break;
                    }
                    // Inverse-map bound near this endpoint on the grid.
                    for k in 1..=grid {
                        let x = q * k as f64 / grid as f64;
                        for (f, &rho) in maps.iter().zip(&rhos) {
                            let pulled = match e {
                                Endpoint::Zero => f.inverse_eval(x),
                                Endpoint::One => 1.0 - f.inverse_eval(1.0 - x),
                            };
                            if pulled > x / (rho - delta) {
                                ok = false;
                                break;
                            }
                        }
                        if !ok {
                            break;
                        }
                    }
                    if !ok {
                        break;
                    }
                }
                if ok {
                    let c = 2.0 / q.powf(alpha);
                    return ConeParams::new(c, alpha, q).ok().map(|cp| (cp, delta));
                }
            }
        }
    }
    None
}

/// Noise-smoothed operator: average over i and over the uniform noise level
/// ζ of push-forwards under (1−ε)f_i(x) + ζε, with ζ discretized by the
/// midpoint rule. The output carries no boundary atoms: the noise pushes
/// all mass strictly inside.
pub fn noisy_transfer(
    m: &BinnedMeasure,
    family: &MapFamily,
    epsilon: f64,
    quadrature_nodes: usize,
) -> BinnedMeasure {
    assert!(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0,1)");
    assert!(quadrature_nodes >= 2, "need at least two quadrature nodes");
    let b = m.bin_count();
    let prefix = m.prefix();
    let (p1, p2) = family.probabilities();
    let full_cdf = |s: f64| {
        if s <= 0.0 {
            0.0
        } else {
            m.atom0 + interior_cdf_from_prefix(&prefix, s)
        }
    };
    let mut combined = vec![0.0f64; b + 1];
    for (map, p) in [(&family.f_down, p1), (&family.f_up, p2)] {
        for j in 0..quadrature_nodes {
            let zeta = (j as f64 + 0.5) / quadrature_nodes as f64;
            let w = p / quadrature_nodes as f64;
            let lo = zeta * epsilon;
            let hi = 1.0 - epsilon + zeta * epsilon;
            for (k, slot) in combined.iter_mut().enumerate() {
                let t = k as f64 / b as f64;
                let cdf = if t <= lo {
                    0.0
                } else if t > hi {
                    1.0
                } else {
                    full_cdf(map.inverse_eval(((t - lo) / (1.0 - epsilon)).clamp(0.0, 1.0)))
                };
                *slot += w * cdf;
            }
        }
    }
    // Everything below 1 plus the former atom at 1 (mapped to hi < 1).
    let total = m.atom0 + m.atom1 + prefix[b];
    combined[b] = total;
    let bins = (0..b).map(|k| (combined[k + 1] - combined[k]).max(0.0)).collect();
    BinnedMeasure { atom0: 0.0, atom1: 0.0, bins }
}

/// Fiber Lyapunov exponent of the measure: Σ p_i ∫ ln f_i′ dm with exact
/// atom contributions and bin midpoints for the interior.
pub fn lyapunov_vs_measure(family: &MapFamily, m: &BinnedMeasure) -> f64 {
    let (p1, p2) = family.probabilities();
    let b = m.bin_count();
    let mut total = 0.0;
    for (map, p) in [(&family.f_down, p1), (&family.f_up, p2)] {
        let mut acc = m.atom0 * map.ln_derivative_at(Endpoint::Zero)
            + m.atom1 * map.ln_derivative_at(Endpoint::One);
        for (k, &w) in m.bins.iter().enumerate() {
            if w > 0.0 {
                let mid = (k as f64 + 0.5) / b as f64;
                acc += w * map.ln_derivative(mid);
            }
        }
        total += p * acc;
    }
    total
}

/// Kullback–Leibler divergence over the (atom0, bins, atom1) cells;
/// +∞ when m1 charges a cell that m2 misses. On a fixed finite partition
/// this is the variational characterization of relative entropy restricted
/// to cell-constant test functions.
pub fn relative_entropy(m1: &BinnedMeasure, m2: &BinnedMeasure) -> f64 {
    assert_eq!(m1.bin_count(), m2.bin_count(), "grids differ");
    let cells = std::iter::once((m1.atom0, m2.atom0))
        .chain(m1.bins.iter().copied().zip(m2.bins.iter().copied()))
        .chain(std::iter::once((m1.atom1, m2.atom1)));
    let mut sum = 0.0;
    for (a, b) in cells {
        if a > 0.0 {
            if b == 0.0 {
                return f64::INFINITY;
            }
            sum += a * (a / b).ln();
        }
    }
    sum.max(0.0)
}

/// Push m through the pullback composition of the past word (oldest symbol
/// applied first, matching `skew_engine::pullback_point`).
pub fn pullback_pushforward(
    m: &BinnedMeasure,
    family: &MapFamily,
    past_word: &SymbolWord,
) -> BinnedMeasure {
    past_word
        .symbols()
        .iter()
        .fold(m.clone(), |acc, &s| pushforward(&acc, family.map_for(s)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval_maps::MapFamily;
    use crate::symbol_dynamics::SymbolWord;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn walk_up() -> IntervalMap {
        IntervalMap::moebius(1.0)
    }

    fn random_interior_measure(b: usize, seed: u64) -> BinnedMeasure {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..b).map(|_| rng.gen::<f64>() + 0.01).collect();
        let total: f64 = raw.iter().sum();
        BinnedMeasure::from_parts(0.0, 0.0, raw.into_iter().map(|w| w / total).collect()).unwrap()
    }

    #[test]
    fn delta_is_a_fixed_point_of_pushforward_and_transfer() {
        let family = MapFamily::symmetric_walk();
        let d0 = BinnedMeasure::delta0(64);
        assert_eq!(pushforward(&d0, &family.f_up), d0);
        assert_eq!(transfer(&d0, &family), d0);
        let combo = BinnedMeasure::from_parts(0.3, 0.7, vec![0.0; 64]).unwrap();
        let moved = transfer(&combo, &family);
        assert!(combo.tv_distance(&moved) < 1e-15);
    }

    #[test]
    fn uniform_pushforward_matches_closed_form_cdf() {
        // Push Lebesgue through the up walk map with B = 4: the first new
        // bin holds g⁻¹(1/4) = 1/(1+3e).
        let m = BinnedMeasure::lebesgue(4);
        let pushed = pushforward(&m, &walk_up());
        let expected = 0.109_231_772_573_035_93;
        assert!((pushed.bins()[0] - expected).abs() < 1e-14);
        assert!((pushed.total_mass() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn mass_is_conserved_by_every_operation() {
        let family = MapFamily::damped_walk(0.3);
        let m = random_interior_measure(512, 3);
        for candidate in [
            pushforward(&m, &family.f_down),
            transfer(&m, &family),
            noisy_transfer(&m, &family, 0.01, 16),
            pullback_pushforward(
                &m,
                &family,
                &crate::symbol_dynamics::sample_word(
                    crate::symbol_dynamics::Probabilities::uniform(),
                    40,
                    7,
                    0,
                ),
            ),
        ] {
            assert!((candidate.total_mass() - 1.0).abs() <= 1e-12, "mass {}", candidate.total_mass());
        }
    }

    #[test]
    fn transfer_is_affine() {
        let family = MapFamily::inverse_logistic_pair(0.5);
        for (seed, s) in [(1u64, 0.25f64), (2, 0.5), (3, 0.9)] {
            let m1 = random_interior_measure(128, seed);
            let m2 = random_interior_measure(128, seed + 100);
            let mixed = m1.mix(&m2, s).unwrap();
            let lhs = transfer(&mixed, &family);
            let rhs = transfer(&m1, &family).mix(&transfer(&m2, &family), s).unwrap();
            assert!(lhs.tv_distance(&rhs) <= 1e-12);
        }
    }

    #[test]
    fn krylov_bogolyubov_fixed_point_has_zero_residual() {
        let family = MapFamily::symmetric_walk();
        let (avg, residuals) = krylov_bogolyubov(&BinnedMeasure::delta0(32), &family, 50);
        assert_eq!(avg, BinnedMeasure::delta0(32));
        assert!(residuals.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn lebesgue_is_exactly_stationary_for_the_inverse_logistic_pair() {
        // ½(f_down(t) + f_up(t)) = t because the two quadratic bumps cancel,
        // so the interior stationary measure of the inverse pair is exactly
        // Lebesgue.
        let family = MapFamily::inverse_logistic_pair(0.5);
        let leb = BinnedMeasure::lebesgue(512);
        assert!(transfer(&leb, &family).tv_distance(&leb) < 1e-14);
    }

    #[test]
    fn krylov_bogolyubov_finds_interior_measure_for_expanding_boundaries() {
        // Start away from the fixed point: averages must flow back to the
        // unique interior stationary measure (Lebesgue) with shrinking
        // residuals.
        let family = MapFamily::inverse_logistic_pair(0.5);
        let b = 256;
        let mut half = vec![0.0; b];
        for w in half.iter_mut().take(b / 2) {
            *w = 2.0 / b as f64;
        }
        let m0 = BinnedMeasure::from_parts(0.0, 0.0, half).unwrap();
        let (avg, residuals) = krylov_bogolyubov(&m0, &family, 1500);
        assert!(avg.interior_mass() >= 0.99, "interior mass {}", avg.interior_mass());
        let last = *residuals.last().unwrap();
        assert!(last < 1e-3, "residual {last}");
        assert!(residuals[0] > 10.0 * last, "residual history should shrink");
        assert!(avg.tv_distance(&BinnedMeasure::lebesgue(b)) < 0.01);
    }

    #[test]
    fn krylov_bogolyubov_drains_toward_the_neutral_boundary_for_damped_walk() {
        // With L(0) = 0 and L(1) > 0 the only stationary measures sit on the
        // boundary. The binned operator concentrates mass near 0 as the
        // average lengthens, up to a plateau set by the bin resolution (the
        // within-bin smoothing acts like a small noise floor).
        let family = MapFamily::damped_walk(0.3);
        let (short, _) = krylov_bogolyubov(&BinnedMeasure::lebesgue(128), &family, 200);
        let (long, _) = krylov_bogolyubov(&BinnedMeasure::lebesgue(128), &family, 2000);
        assert!(long.cdf_lower(0.05) > short.cdf_lower(0.05));
        assert!(long.cdf_lower(0.05) > 0.4, "mass near 0 is {}", long.cdf_lower(0.05));
        // The orbit-level occupation statistics carry the sharp statement;
        // see the experiments module.
    }

    #[test]
    fn cone_check_accepts_lebesgue_and_rejects_deltas() {
        let cone = ConeParams::new(2.0 / 0.1f64.powf(0.5), 0.5, 0.1).unwrap();
        let lebesgue = BinnedMeasure::lebesgue(256);
        assert!(cone_check(&lebesgue, &cone).inside);
        let d0 = BinnedMeasure::delta0(256);
        let check = cone_check(&d0, &cone);
        assert!(!check.inside);
        let v = check.first_violation.unwrap();
        assert!(v.actual >= 1.0);
    }

    #[test]
    fn bounded_density_lies_in_cone_when_c_large_enough() {
        // Density ≤ d fits whenever c ≥ d·q^{1−α}.
        let m = random_interior_measure(256, 9);
        let density_bound = m.bins().iter().cloned().fold(0.0, f64::max) * 256.0;
        let (alpha, q): (f64, f64) = (0.4, 0.1);
        let c = density_bound * q.powf(1.0 - alpha) + 1.0 / q.powf(alpha) + 0.1;
        let cone = ConeParams::new(c, alpha, q).unwrap();
        assert!(cone_check(&m, &cone).inside);
    }

    #[test]
    fn found_cone_is_invariant_under_transfer() {
        let family = MapFamily::inverse_logistic_pair(0.5);
        let (cone, _delta) = find_cone_params(&family, 64).expect("cone params exist");
        let mut accepted = 0;
        let mut seed = 0u64;
        while accepted < 100 {
            seed += 1;
            assert!(seed < 2000, "rejection sampling stalled");
            let m = random_interior_measure(256, seed);
            if !cone_check(&m, &cone).inside {
                continue;
            }
            accepted += 1;
            let image = transfer(&m, &family);
            let check = cone_check(&image, &cone);
            assert!(check.inside, "transfer left the cone: {:?}", check.first_violation);
        }
    }

    #[test]
    fn noisy_transfer_converges_to_transfer_as_noise_vanishes() {
        let family = MapFamily::inverse_logistic_pair(0.5);
        let m = random_interior_measure(512, 21);
        let sharp = transfer(&m, &family);
        let noisy = noisy_transfer(&m, &family, 1e-8, 16);
        assert!(sharp.tv_distance(&noisy) < 1e-6);
    }

    #[test]
    fn noisy_transfer_spreads_the_zero_atom_over_the_noise_band() {
        let family = MapFamily::symmetric_walk();
        let b = 100;
        let eps = 0.1;
        let pushed = noisy_transfer(&BinnedMeasure::delta0(b), &family, eps, 64);
        assert_eq!(pushed.atom0(), 0.0);
        // The image of 0 is ζ·ε with ζ uniform, so [0, ε) holds all mass.
        assert!((pushed.cdf_lower(eps + 0.01) - 1.0).abs() < 1e-12);
        // Roughly uniform over [0, ε): each of the ten bins holds ~1/10.
        for k in 0..(b as f64 * eps) as usize {
            assert!((pushed.bins()[k] - 0.1).abs() < 0.05, "bin {k}: {}", pushed.bins()[k]);
        }
    }

    #[test]
    fn transfer_depends_continuously_on_probabilities() {
        let m = random_interior_measure(512, 4);
        let base = MapFamily::moebius_pair(-1.0, 1.0, 0.5).unwrap();
        let tweaked = MapFamily::moebius_pair(-1.0, 1.0, 0.5 + 1e-4).unwrap();
        let d = transfer(&m, &base).tv_distance(&transfer(&m, &tweaked));
        assert!(d <= 1e-3, "tv jump {d}");
    }

    #[test]
    fn stochastic_dominance_is_preserved() {
        // m ≼ push(m, up map); applying any monotone map preserves that.
        let family = MapFamily::damped_walk(0.3);
        for seed in 0..5 {
            let m1 = random_interior_measure(128, 50 + seed);
            let m2 = pushforward(&m1, &walk_up());
            let a = pushforward(&m1, &family.f_down);
            let b = pushforward(&m2, &family.f_down);
            let (pa, pb) = (a.prefix(), b.prefix());
            for k in 0..pa.len() {
                assert!(pa[k] + 1e-12 >= pb[k], "dominance broken at edge {k}");
            }
        }
    }

    #[test]
    fn relative_entropy_oracles() {
        let m = random_interior_measure(64, 6);
        assert_eq!(relative_entropy(&m, &m), 0.0);
        let uniform = BinnedMeasure::lebesgue(64);
        assert_eq!(relative_entropy(&BinnedMeasure::delta0(64), &uniform), f64::INFINITY);
        let mut half = vec![0.0; 64];
        for w in half.iter_mut().take(32) {
            *w = 1.0 / 32.0;
        }
        let left = BinnedMeasure::from_parts(0.0, 0.0, half).unwrap();
        assert!((relative_entropy(&left, &uniform) - 2.0f64.ln()).abs() < 1e-12);
        assert!(relative_entropy(&uniform, &left).is_infinite());
    }

    #[test]
    fn lyapunov_integral_consistency() {
        let family = MapFamily::logistic_pair(0.5);
        let b = 64;
        let l0 = crate::lyapunov::boundary_exponent(&family, Endpoint::Zero);
        let l1 = crate::lyapunov::boundary_exponent(&family, Endpoint::One);
        assert_eq!(lyapunov_vs_measure(&family, &BinnedMeasure::delta0(b)), l0);
        let even = BinnedMeasure::from_parts(0.5, 0.5, vec![0.0; b]).unwrap();
        assert!((lyapunov_vs_measure(&family, &even) - 0.5 * (l0 + l1)).abs() < 1e-15);
        // Linearity in the measure.
        let m1 = random_interior_measure(b, 8);
        let m2 = random_interior_measure(b, 9);
        let mixed = m1.mix(&m2, 0.3).unwrap();
        let lhs = lyapunov_vs_measure(&family, &mixed);
        let rhs = 0.3 * lyapunov_vs_measure(&family, &m1) + 0.7 * lyapunov_vs_measure(&family, &m2);
        assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn pullback_pushforward_identity_and_cross_check() {
        let family = MapFamily::logistic_pair(0.5);
        let m = random_interior_measure(128, 10);
        let empty = SymbolWord::from_symbols(vec![]);
        assert_eq!(pullback_pushforward(&m, &family, &empty), m);
        // Single symbol: same as one pushforward.
        let one = SymbolWord::from_symbols(vec![2]);
        assert_eq!(pullback_pushforward(&m, &family, &one), pushforward(&m, &family.f_up));
    }

    #[test]
    fn pullback_pushforward_tracks_the_orbit_pullback_point() {
        // Cross-module consistency for the expanding-boundary family: the
        // orbit-level pullback of a Lebesgue grid collapses onto the
        // pullback point, and the binned push-forward's median follows it.
        // (The binned measure itself cannot concentrate below a few bins:
        // each push re-spreads mass across the landing bin, and trailing
        // derivative products amplify that noise word by word.)
        use crate::skew_engine::{pullback_point, Coordinate};
        let family = MapFamily::inverse_logistic_pair(0.5);
        let probs = crate::symbol_dynamics::Probabilities::uniform();
        let b = 512;
        for stream in 0..10u64 {
            let past = crate::symbol_dynamics::sample_word(probs, 200, 7, stream);
            let target = pullback_point(&family, &past, 0.5, Coordinate::Plain);
            let mut inside = 0;
            for k in 1..1000 {
                let y = pullback_point(&family, &past, k as f64 / 1000.0, Coordinate::Plain);
                if (y - target).abs() <= 0.01 {
                    inside += 1;
                }
            }
            assert!(inside >= 989, "stream {stream}: only {inside}/999 grid orbits near target");

            let pushed = pullback_pushforward(&BinnedMeasure::lebesgue(b), &family, &past);
            let half = 0.5 * pushed.interior_mass();
            let mut acc = 0.0;
            let mut median = 1.0;
            for (k, &w) in pushed.bins().iter().enumerate() {
                if acc + w >= half {
                    let frac = if w > 0.0 { (half - acc) / w } else { 0.5 };
                    median = (k as f64 + frac) / b as f64;
                    break;
                }
                acc += w;
            }
            // Measured worst offset over the pilot words was 7.3 bins.
            assert!(
                (median - target).abs() <= 16.0 / b as f64,
                "stream {stream}: median {median} vs target {target}"
            );
        }
    }

    #[test]
    fn pullback_pushforward_drains_to_zero_for_the_damped_walk() {
        let family = MapFamily::damped_walk(0.3);
        let probs = crate::symbol_dynamics::Probabilities::uniform();
        let lebesgue = BinnedMeasure::lebesgue(512);
        let long = crate::symbol_dynamics::sample_word(probs, 400, 3, 0);
        let short = SymbolWord::from_symbols(long.symbols()[..50].to_vec());
        let near_zero_short =
            pullback_pushforward(&lebesgue, &family, &short).cdf_lower(0.05);
        let near_zero_long = pullback_pushforward(&lebesgue, &family, &long).cdf_lower(0.05);
        assert!(near_zero_long > near_zero_short);
        assert!(near_zero_long > 0.9, "mass near 0 after 400 pulls: {near_zero_long}");
    }

    #[test]
    fn noisy_transfer_is_affine_too() {
        let family = MapFamily::damped_walk(0.3);
        let m1 = random_interior_measure(128, 31);
        let m2 = random_interior_measure(128, 32);
        for s in [0.25, 0.5, 0.9] {
            let mixed = m1.mix(&m2, s).unwrap();
            let lhs = noisy_transfer(&mixed, &family, 0.05, 8);
            let rhs = noisy_transfer(&m1, &family, 0.05, 8)
                .mix(&noisy_transfer(&m2, &family, 0.05, 8), s)
                .unwrap();
            assert!(lhs.tv_distance(&rhs) <= 1e-12, "noisy affinity at s = {s}");
        }
    }

    #[test]
    fn bad_measures_are_rejected() {
        assert_eq!(
            BinnedMeasure::from_parts(0.5, 0.6, vec![0.0; 4]).unwrap_err(),
            MeasureError::BadTotalMass(1.1)
        );
        assert_eq!(
            BinnedMeasure::from_parts(-0.1, 1.1, vec![0.0; 4]).unwrap_err(),
            MeasureError::NegativeComponent
        );
        assert!(ConeParams::new(1.0, 0.5, 0.1).is_err());
    }
}
