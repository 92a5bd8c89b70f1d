//! Increasing C² diffeomorphisms of \[0,1\] that fix both endpoints, and the
//! two-map families driving the random compositions.
//!
//! Four map kinds are built in:
//!
//! * `Moebius` — x ↦ a·x / (1 + (a−1)·x), parameterized by t = ln a. In the
//!   logit coordinate y = ln(x/(1−x)) this is exactly the translation
//!   y ↦ y + t, which is why the symmetric-walk pair uses t = ∓1.
//! * `LogisticPerturb` — x ↦ x ∓ r·x·(1−x), the quadratic perturbation of
//!   the identity (down or up).
//! * `DampedMoebius` — a Moebius map damped by (1 − c·x·(1−x)), which keeps
//!   the multiplier at 0 but lifts the one at 1.
//! * `Composite` — a finite composition of the above.
//!
//! Any map can additionally be marked inverted, which swaps `eval` and
//! `inverse_eval` and flips its direction. All evaluations have
//! boundary-stable variants in log (u = ln x) and logit coordinates so that
//! long orbits never saturate at the fixed endpoints.

use thiserror::Error;

/// Whether a map moves interior points toward 0 (`Down`) or toward 1 (`Up`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Down,
    Up,
}

impl Direction {
    pub fn flipped(self) -> Direction {
        match self {
            Direction::Down => Direction::Up,
            Direction::Up => Direction::Down,
        }
    }
}

/// One of the two fixed boundary points of the interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Zero,
    One,
}

/// Slack accepted around \[0,1\] before `eval` and friends treat the argument
/// as a caller bug and panic.
pub const DOMAIN_SLACK: f64 = 1e-12;

const LN_2: f64 = std::f64::consts::LN_2;

#[derive(Debug, Clone, PartialEq)]
enum MapKind {
    Moebius {
        log_mult: f64,
        mult: f64,
    },
    LogisticPerturb {
        r: f64,
        direction: Direction,
    },
    DampedMoebius {
        log_mult: f64,
        mult: f64,
        damping: f64,
    },
    Composite {
        components: Vec<IntervalMap>,
    },
}

/// An increasing diffeomorphism of \[0,1\] fixing 0 and 1.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMap {
    kind: MapKind,
    inverted: bool,
    direction: Direction,
}

fn check_finite(name: &str, x: f64) {
    assert!(x.is_finite(), "{name} must be finite, got {x}");
}

/// ln(1 + e^t), stable across the whole real line.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// ln of the sigmoid e^y/(1+e^y); equals ln x for y = logit(x).
pub(crate) fn ln_sigmoid(y: f64) -> f64 {
    -softplus(-y)
}

/// Sigmoid with full relative accuracy in both tails.
pub(crate) fn sigmoid(y: f64) -> f64 {
    if y >= 0.0 {
        1.0 / (1.0 + (-y).exp())
    } else {
        let e = y.exp();
        e / (1.0 + e)
    }
}

/// logit(x) = ln(x/(1−x)); accepts the endpoints and returns ±∞ there.
pub fn logit(x: f64) -> f64 {
    (x / (1.0 - x)).ln()
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Clamp x into \[0,1\], panicking if it lies outside by more than the slack.
fn check_domain(x: f64) -> f64 {
    assert!(
        (-DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(&x),
        "interval map evaluated outside [0,1]: x = {x}"
    );
    x.clamp(0.0, 1.0)
}

impl IntervalMap {
    /// Moebius map with multiplier a = e^{log_mult} at 0; equals the logit
    /// translation y ↦ y + log_mult.
    pub fn moebius(log_mult: f64) -> IntervalMap {
        check_finite("log_mult", log_mult);
        let direction = if log_mult <= 0.0 { Direction::Down } else { Direction::Up };
        IntervalMap {
            kind: MapKind::Moebius { log_mult, mult: log_mult.exp() },
            inverted: false,
            direction,
        }
    }

    /// Quadratic perturbation x ∓ r·x·(1−x) of the identity.
    pub fn logistic_perturb(r: f64, direction: Direction) -> IntervalMap {
        check_finite("r", r);
        assert!(r >= 0.0, "perturbation strength r must be nonnegative, got {r}");
        IntervalMap {
            kind: MapKind::LogisticPerturb { r, direction },
            inverted: false,
            direction,
        }
    }

    /// Moebius map with multiplier e^{log_mult} damped by
    /// (1 − damping·x·(1−x)).
    pub fn damped_moebius(log_mult: f64, damping: f64) -> IntervalMap {
        check_finite("log_mult", log_mult);
        check_finite("damping", damping);
        assert!(damping >= 0.0, "damping must be nonnegative, got {damping}");
        let direction = if log_mult <= 0.0 { Direction::Down } else { Direction::Up };
        IntervalMap {
            kind: MapKind::DampedMoebius { log_mult, mult: log_mult.exp(), damping },
            inverted: false,
            direction,
        }
    }

    /// Composition of the given maps, applied first-to-last.
    pub fn composite(components: Vec<IntervalMap>) -> IntervalMap {
        assert!(!components.is_empty(), "composite map needs at least one component");
        let probe: f64 = components.iter().fold(0.5, |x, m| m.eval(x));
        let direction = if probe < 0.5 { Direction::Down } else { Direction::Up };
        IntervalMap { kind: MapKind::Composite { components }, inverted: false, direction }
    }

    /// The inverse diffeomorphism.
    pub fn inverse(&self) -> IntervalMap {
        IntervalMap {
            kind: self.kind.clone(),
            inverted: !self.inverted,
            direction: self.direction.flipped(),
        }
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn is_inverted(&self) -> bool {
        self.inverted
    }

    /// f(x) for x ∈ \[0,1\]; exact at both endpoints.
    pub fn eval(&self, x: f64) -> f64 {
        let x = check_domain(x);
        self.eval_dir(x, self.inverted)
    }

    /// The unique x with f(x) = y; closed form for Moebius and
    /// LogisticPerturb, guarded Newton elsewhere.
    pub fn inverse_eval(&self, y: f64) -> f64 {
        let y = check_domain(y);
        self.eval_dir(y, !self.inverted)
    }

    /// First derivative f′(x) > 0.
    pub fn derivative(&self, x: f64) -> f64 {
        let x = check_domain(x);
        self.derivative_dir(x, self.inverted)
    }

    /// ln f′(x), exact at the endpoints for every built-in kind.
    pub fn ln_derivative(&self, x: f64) -> f64 {
        let x = check_domain(x);
        self.ln_derivative_dir(x, self.inverted)
    }

    /// Exact ln f′ at a boundary fixed point.
    pub fn ln_derivative_at(&self, e: Endpoint) -> f64 {
        self.ln_derivative_at_dir(e, self.inverted)
    }

    /// Exact f′ at a boundary fixed point.
    pub fn derivative_at(&self, e: Endpoint) -> f64 {
        self.derivative_at_dir(e, self.inverted)
    }

    /// Exact f″ at a boundary fixed point, by chain/product rule over
    /// components.
    pub fn second_derivative_at(&self, e: Endpoint) -> f64 {
        self.second_derivative_at_dir(e, self.inverted)
    }

    /// Exact f″(0).
    pub fn second_derivative_at_zero(&self) -> f64 {
        self.second_derivative_at(Endpoint::Zero)
    }

    /// ln f(e^u) for u ≤ 0, stable down to u = −∞ (which is the fixed point).
    pub fn eval_log(&self, u: f64) -> f64 {
        assert!(u <= DOMAIN_SLACK, "eval_log expects u = ln x ≤ 0, got {u}");
        let u = u.min(0.0);
        // ln(1−x) from u without cancellation.
        let v = if u == 0.0 { f64::NEG_INFINITY } else { (-u.exp_m1()).ln() };
        self.log_pair_dir(u, v, self.inverted).0
    }

    /// The map expressed in the logit coordinate y = ln(x/(1−x)).
    ///
    /// For Moebius maps this is exactly y ↦ y ± log_mult; other kinds go
    /// through the stable (ln x, ln(1−x)) pair so that neither tail
    /// saturates.
    pub fn eval_logit(&self, y: f64) -> f64 {
        match (&self.kind, self.inverted) {
            (MapKind::Moebius { log_mult, .. }, false) => y + log_mult,
            (MapKind::Moebius { log_mult, .. }, true) => y - log_mult,
            _ => {
                let (u, v) = (ln_sigmoid(y), ln_sigmoid(-y));
                let (nu, nv) = self.log_pair_dir(u, v, self.inverted);
                nu - nv
            }
        }
    }

    /// (ln f(x), ln(1−f(x))) from (ln x, ln(1−x)); the workhorse behind the
    /// boundary-safe coordinates.
    pub fn log_pair(&self, u: f64, v: f64) -> (f64, f64) {
        self.log_pair_dir(u, v, self.inverted)
    }

    fn eval_dir(&self, x: f64, inv: bool) -> f64 {
        match &self.kind {
            MapKind::Moebius { mult, .. } => {
                let a = if inv { 1.0 / mult } else { *mult };
                moebius_eval(a, x)
            }
            MapKind::LogisticPerturb { r, direction } => {
                let down = *direction == Direction::Down;
                if inv {
                    logistic_inverse(*r, down, x)
                } else {
                    logistic_eval(*r, down, x)
                }
            }
            MapKind::DampedMoebius { mult, damping, .. } => {
                if inv {
                    newton_inverse(
                        |z| damped_eval(*mult, *damping, z),
                        |z| damped_derivative(*mult, *damping, z),
                        x,
                    )
                } else {
                    damped_eval(*mult, *damping, x)
                }
            }
            MapKind::Composite { components } => {
                if inv {
                    components.iter().rev().fold(x, |z, m| m.eval_dir(z, !m.inverted))
                } else {
                    components.iter().fold(x, |z, m| m.eval_dir(z, m.inverted))
                }
            }
        }
    }

    fn derivative_dir(&self, x: f64, inv: bool) -> f64 {
        if inv {
            let pre = self.eval_dir(x, true);
            return 1.0 / self.derivative_dir(pre, false);
        }
        match &self.kind {
            MapKind::Moebius { mult, .. } => {
                let b = mult - 1.0;
                let d = 1.0 + b * x;
                mult / (d * d)
            }
            MapKind::LogisticPerturb { r, direction } => match direction {
                Direction::Down => 1.0 - r * (1.0 - 2.0 * x),
                Direction::Up => 1.0 + r * (1.0 - 2.0 * x),
            },
            MapKind::DampedMoebius { mult, damping, .. } => damped_derivative(*mult, *damping, x),
            MapKind::Composite { components } => {
                let mut z = x;
                let mut d = 1.0;
                for m in components {
                    d *= m.derivative_dir(z, m.inverted);
                    z = m.eval_dir(z, m.inverted);
                }
                d
            }
        }
    }

    fn ln_derivative_dir(&self, x: f64, inv: bool) -> f64 {
        if inv {
            let pre = self.eval_dir(x, true);
            return -self.ln_derivative_dir(pre, false);
        }
        match &self.kind {
            MapKind::Moebius { log_mult, mult } => log_mult - 2.0 * ((mult - 1.0) * x).ln_1p(),
            MapKind::LogisticPerturb { .. } | MapKind::DampedMoebius { .. } => {
                self.derivative_dir(x, false).ln()
            }
            MapKind::Composite { components } => {
                let mut z = x;
                let mut s = 0.0;
                for m in components {
                    s += m.ln_derivative_dir(z, m.inverted);
                    z = m.eval_dir(z, m.inverted);
                }
                s
            }
        }
    }

    fn ln_derivative_at_dir(&self, e: Endpoint, inv: bool) -> f64 {
        if inv {
            return -self.ln_derivative_at_dir(e, false);
        }
        match &self.kind {
            MapKind::Moebius { log_mult, .. } => match e {
                Endpoint::Zero => *log_mult,
                Endpoint::One => -log_mult,
            },
            MapKind::LogisticPerturb { r, direction } => {
                let at_zero = match direction {
                    Direction::Down => 1.0 - r,
                    Direction::Up => 1.0 + r,
                };
                match e {
                    Endpoint::Zero => at_zero.ln(),
                    Endpoint::One => (2.0 - at_zero).ln(),
                }
            }
            MapKind::DampedMoebius { log_mult, mult, damping } => match e {
                Endpoint::Zero => *log_mult,
                Endpoint::One => (1.0 / mult + damping).ln(),
            },
            MapKind::Composite { components } => {
                components.iter().map(|m| m.ln_derivative_at_dir(e, m.inverted)).sum()
            }
        }
    }

    fn derivative_at_dir(&self, e: Endpoint, inv: bool) -> f64 {
        if inv {
            return 1.0 / self.derivative_at_dir(e, false);
        }
        match &self.kind {
            MapKind::Moebius { mult, .. } => match e {
                Endpoint::Zero => *mult,
                Endpoint::One => 1.0 / mult,
            },
            MapKind::LogisticPerturb { r, direction } => {
                let at_zero = match direction {
                    Direction::Down => 1.0 - r,
                    Direction::Up => 1.0 + r,
                };
                match e {
                    Endpoint::Zero => at_zero,
                    Endpoint::One => 2.0 - at_zero,
                }
            }
            MapKind::DampedMoebius { mult, damping, .. } => match e {
                Endpoint::Zero => *mult,
                Endpoint::One => 1.0 / mult + damping,
            },
            MapKind::Composite { components } => {
                components.iter().map(|m| m.derivative_at_dir(e, m.inverted)).product()
            }
        }
    }

    fn second_derivative_at_dir(&self, e: Endpoint, inv: bool) -> f64 {
        if inv {
            // (f⁻¹)″(e) = −f″(e) / f′(e)³ at a fixed point.
            let d = self.derivative_at_dir(e, false);
            return -self.second_derivative_at_dir(e, false) / (d * d * d);
        }
        match &self.kind {
            MapKind::Moebius { mult, .. } => {
                let b = mult - 1.0;
                match e {
                    Endpoint::Zero => -2.0 * mult * b,
                    Endpoint::One => -2.0 * b / (mult * mult),
                }
            }
            MapKind::LogisticPerturb { r, direction } => match direction {
                Direction::Down => 2.0 * r,
                Direction::Up => -2.0 * r,
            },
            MapKind::DampedMoebius { mult, damping, .. } => {
                let a = *mult;
                let b = a - 1.0;
                match e {
                    Endpoint::Zero => -2.0 * a * b - 2.0 * a * damping,
                    Endpoint::One => -2.0 * b / (a * a) + 2.0 * damping / a + 2.0 * damping,
                }
            }
            MapKind::Composite { components } => {
                // Fold (f∘g)″(e) = f″(e)·g′(e)² + f′(e)·g″(e) over the chain.
                let mut d = 1.0;
                let mut s = 0.0;
                for m in components {
                    let md = m.derivative_at_dir(e, m.inverted);
                    let ms = m.second_derivative_at_dir(e, m.inverted);
                    s = ms * d * d + md * s;
                    d *= md;
                }
                s
            }
        }
    }

    fn log_pair_dir(&self, u: f64, v: f64, inv: bool) -> (f64, f64) {
        match &self.kind {
            MapKind::Moebius { log_mult, mult } => {
                if inv {
                    moebius_pair(-log_mult, 1.0 / mult, u, v)
                } else {
                    moebius_pair(*log_mult, *mult, u, v)
                }
            }
            MapKind::LogisticPerturb { r, direction } => {
                let down = *direction == Direction::Down;
                if inv {
                    logistic_pair_inverse(*r, down, u, v)
                } else {
                    logistic_pair(*r, down, u, v)
                }
            }
            MapKind::DampedMoebius { log_mult, mult, damping } => {
                if inv {
                    logit_pair_inverse_by_bisection(
                        |y| {
                            let (a, b) = damped_pair(
                                *log_mult,
                                *mult,
                                *damping,
                                ln_sigmoid(y),
                                ln_sigmoid(-y),
                            );
                            a - b
                        },
                        u - v,
                    )
                } else {
                    damped_pair(*log_mult, *mult, *damping, u, v)
                }
            }
            MapKind::Composite { components } => {
                if inv {
                    components
                        .iter()
                        .rev()
                        .fold((u, v), |(a, b), m| m.log_pair_dir(a, b, !m.inverted))
                } else {
                    components
                        .iter()
                        .fold((u, v), |(a, b), m| m.log_pair_dir(a, b, m.inverted))
                }
            }
        }
    }
}

fn moebius_eval(a: f64, x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if x == 1.0 {
        1.0
    } else {
        a * x / (1.0 + (a - 1.0) * x)
    }
}

fn logistic_eval(r: f64, down: bool, x: f64) -> f64 {
    let bump = r * x * (1.0 - x);
    if down {
        x - bump
    } else {
        x + bump
    }
}

/// Closed-form inverse of x ∓ r·x·(1−x), in the rationalized form
/// 2y / (s + sqrt(s² ± 4ry)) that stays stable as r → 0 and y → 0.
fn logistic_inverse(r: f64, down: bool, y: f64) -> f64 {
    if y == 0.0 || y == 1.0 || r == 0.0 {
        return y;
    }
    if down {
        let s = 1.0 - r;
        2.0 * y / (s + (s * s + 4.0 * r * y).sqrt())
    } else {
        let s = 1.0 + r;
        2.0 * y / (s + (s * s - 4.0 * r * y).sqrt())
    }
}

fn damped_eval(a: f64, c: f64, x: f64) -> f64 {
    moebius_eval(a, x) * (1.0 - c * x * (1.0 - x))
}

fn damped_derivative(a: f64, c: f64, x: f64) -> f64 {
    let b = a - 1.0;
    let d = 1.0 + b * x;
    let g = a * x / d;
    let dg = a / (d * d);
    dg * (1.0 - c * x * (1.0 - x)) - g * c * (1.0 - 2.0 * x)
}

fn moebius_pair(t: f64, a: f64, u: f64, v: f64) -> (f64, f64) {
    // f = a x / (1 + b x), 1−f = (1−x) / (1 + b x) with b = a−1.
    let corr = ((a - 1.0) * u.exp()).ln_1p();
    let nu = if u == 0.0 { 0.0 } else { t + u - corr };
    let nv = v - corr;
    (nu, nv)
}

fn logistic_pair(r: f64, down: bool, u: f64, v: f64) -> (f64, f64) {
    // down: f = x(1 − r(1−x)), 1−f = (1−x)(1 + r x); up mirrors the signs.
    let (su, sv) = if down { (-r, r) } else { (r, -r) };
    (u + (su * v.exp()).ln_1p(), v + (sv * u.exp()).ln_1p())
}

fn logistic_pair_inverse(r: f64, down: bool, u: f64, v: f64) -> (f64, f64) {
    if r == 0.0 {
        return (u, v);
    }
    // Stable logs of the rationalized quadratic roots on both sides.
    let root_minus = |w: f64| {
        let s = 1.0 - r;
        LN_2 + w - (s + (s * s + 4.0 * r * w.exp()).sqrt()).ln()
    };
    let root_plus = |w: f64| {
        let s = 1.0 + r;
        LN_2 + w - (s + (s * s - 4.0 * r * w.exp()).sqrt()).ln()
    };
    let nu = if u == 0.0 { 0.0 } else if down { root_minus(u) } else { root_plus(u) };
    let nv = if v == 0.0 { 0.0 } else if down { root_plus(v) } else { root_minus(v) };
    (nu, nv)
}

fn damped_pair(t: f64, a: f64, c: f64, u: f64, v: f64) -> (f64, f64) {
    let (mu, mv) = moebius_pair(t, a, u, v);
    let ln_p = c.ln() + u + v;
    let nu = if u == 0.0 { 0.0 } else { mu + (-ln_p.exp()).ln_1p() };
    // 1−f = (1−g) + g·p with g the Moebius part.
    let nv = log_add_exp(mv, mu + ln_p);
    (nu, nv)
}

/// Invert a monotone logit-coordinate map by expanding bracket + bisection.
fn logit_pair_inverse_by_bisection(fwd: impl Fn(f64) -> f64, target: f64) -> (f64, f64) {
    if target.is_infinite() {
        return (ln_sigmoid(target), ln_sigmoid(-target));
    }
    let mut lo = target - 1.0;
    let mut hi = target + 1.0;
    let mut span = 1.0;
    while fwd(lo) > target {
        span *= 2.0;
        lo -= span;
    }
    let mut span = 1.0;
    while fwd(hi) < target {
        span *= 2.0;
        hi += span;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if fwd(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let z = 0.5 * (lo + hi);
    (ln_sigmoid(z), ln_sigmoid(-z))
}

/// Guarded Newton for inverting an increasing map of \[0,1\]; keeps a
/// bisection bracket and polishes to ~1e−15 in x.
fn newton_inverse(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, y: f64) -> f64 {
    if y == 0.0 {
        return 0.0;
    }
    if y == 1.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut x = y;
    for _ in 0..100 {
        let fx = f(x);
        if fx < y {
            lo = x;
        } else {
            hi = x;
        }
        let step = (fx - y) / df(x);
        let mut next = x - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(1e-300) {
            return next;
        }
        x = next;
    }
    x
}

/// Errors raised when assembling a two-map family.
#[derive(Debug, Error, PartialEq)]
pub enum FamilyError {
    #[error("f_down must have direction Down and f_up direction Up")]
    DirectionMismatch,
    #[error("probabilities must lie in (0,1) and sum to 1, got ({0}, {1})")]
    BadProbabilities(f64, f64),
}

/// An ordered pair of interval maps (one below, one above the diagonal)
/// together with their selection probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct MapFamily {
    pub f_down: IntervalMap,
    pub f_up: IntervalMap,
    p1: f64,
    p2: f64,
}

impl MapFamily {
    pub fn new(f_down: IntervalMap, f_up: IntervalMap, p1: f64) -> Result<MapFamily, FamilyError> {
        let p2 = 1.0 - p1;
        if !(p1 > 0.0 && p1 < 1.0) || !p1.is_finite() {
            return Err(FamilyError::BadProbabilities(p1, p2));
        }
        if f_down.direction() != Direction::Down || f_up.direction() != Direction::Up {
            return Err(FamilyError::DirectionMismatch);
        }
        Ok(MapFamily { f_down, f_up, p1, p2 })
    }

    pub fn with_probabilities(
        f_down: IntervalMap,
        f_up: IntervalMap,
        p1: f64,
        p2: f64,
    ) -> Result<MapFamily, FamilyError> {
        if (p1 + p2 - 1.0).abs() > 1e-15 {
            return Err(FamilyError::BadProbabilities(p1, p2));
        }
        MapFamily::new(f_down, f_up, p1)
    }

    /// The symmetric-walk pair: Moebius translations by ∓1 in logit
    /// coordinates, each picked with probability 1/2.
    pub fn symmetric_walk() -> MapFamily {
        MapFamily::new(IntervalMap::moebius(-1.0), IntervalMap::moebius(1.0), 0.5).unwrap()
    }

    /// The quadratic pair x ∓ r·x·(1−x) with probabilities 1/2; both
    /// boundary exponents equal ln(1−r²)/2 < 0.
    pub fn logistic_pair(r: f64) -> MapFamily {
        MapFamily::new(
            IntervalMap::logistic_perturb(r, Direction::Down),
            IntervalMap::logistic_perturb(r, Direction::Up),
            0.5,
        )
        .unwrap()
    }

    /// The inverses of [`MapFamily::logistic_pair`]; both boundary exponents
    /// are positive.
    pub fn inverse_logistic_pair(r: f64) -> MapFamily {
        MapFamily::new(
            IntervalMap::logistic_perturb(r, Direction::Up).inverse(),
            IntervalMap::logistic_perturb(r, Direction::Down).inverse(),
            0.5,
        )
        .unwrap()
    }

    /// Damped symmetric walk g_i(x)·(1 − damping·x·(1−x)): a zero exponent
    /// at 0 and a positive exponent at 1.
    pub fn damped_walk(damping: f64) -> MapFamily {
        MapFamily::new(
            IntervalMap::damped_moebius(-1.0, damping),
            IntervalMap::damped_moebius(1.0, damping),
            0.5,
        )
        .unwrap()
    }

    /// Moebius pair with the given logit translation lengths and p1.
    pub fn moebius_pair(t_down: f64, t_up: f64, p1: f64) -> Result<MapFamily, FamilyError> {
        MapFamily::new(IntervalMap::moebius(t_down), IntervalMap::moebius(t_up), p1)
    }

    pub fn probabilities(&self) -> (f64, f64) {
        (self.p1, self.p2)
    }

    /// The map selected by a symbol (1 = down, 2 = up).
    pub fn map_for(&self, symbol: u8) -> &IntervalMap {
        match symbol {
            1 => &self.f_down,
            2 => &self.f_up,
            s => panic!("symbol must be 1 or 2, got {s}"),
        }
    }

    /// Family with the two maps inverted (and roles swapped so the pair
    /// stays ordered down/up). Probabilities keep following the same
    /// symbols, so symbol 1 now selects the inverse of f_up.
    pub fn inverse(&self) -> Result<MapFamily, FamilyError> {
        MapFamily::with_probabilities(self.f_up.inverse(), self.f_down.inverse(), self.p2, self.p1)
    }
}

/// Conditions checked by [`validate_family`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    EndpointsFixed,
    DownBelowDiagonal,
    UpAboveDiagonal,
    StrictlyIncreasing,
    ProbabilitiesValid,
}

#[derive(Debug, Clone)]
pub struct Violation {
    pub condition: Condition,
    pub witness: Option<f64>,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check the class conditions (fixed endpoints, one map below and one above
/// the diagonal, strict monotonicity) on a uniform interior grid.
pub fn validate_family(family: &MapFamily, grid_size: usize) -> ValidationReport {
    assert!(grid_size >= 2, "grid_size must be at least 2");
    let mut report = ValidationReport::default();
    let (p1, p2) = family.probabilities();
    if !(p1 > 0.0 && p1 < 1.0 && p2 > 0.0 && p2 < 1.0) || (p1 + p2 - 1.0).abs() > 1e-15 {
        report.violations.push(Violation {
            condition: Condition::ProbabilitiesValid,
            witness: None,
            message: format!("probabilities ({p1}, {p2}) must lie in (0,1) and sum to 1"),
        });
    }

    for (name, map) in [("f_down", &family.f_down), ("f_up", &family.f_up)] {
        for (e, x) in [(0.0f64, "0"), (1.0, "1")] {
            let fe = map.eval(e);
            if fe != e {
                report.violations.push(Violation {
                    condition: Condition::EndpointsFixed,
                    witness: Some(e),
                    message: format!("{name}({x}) = {fe}, expected {x}"),
                });
            }
        }
    }

    let mut first_down = true;
    let mut first_up = true;
    let mut first_mono = [true, true];
    for k in 1..grid_size {
        let x = k as f64 / grid_size as f64;
        let fd = family.f_down.eval(x);
        if fd >= x && first_down {
            first_down = false;
            report.violations.push(Violation {
                condition: Condition::DownBelowDiagonal,
                witness: Some(x),
                message: format!(
                    "direction mismatch: f_down({x}) = {fd} is not below the diagonal"
                ),
            });
        }
        let fu = family.f_up.eval(x);
        if fu <= x && first_up {
            first_up = false;
            report.violations.push(Violation {
                condition: Condition::UpAboveDiagonal,
                witness: Some(x),
                message: format!("direction mismatch: f_up({x}) = {fu} is not above the diagonal"),
            });
        }
        for (i, (name, map)) in [("f_down", &family.f_down), ("f_up", &family.f_up)]
            .into_iter()
            .enumerate()
        {
            let d = map.derivative(x);
            if d <= 0.0 && first_mono[i] {
                first_mono[i] = false;
                report.violations.push(Violation {
                    condition: Condition::StrictlyIncreasing,
                    witness: Some(x),
                    message: format!("{name} not increasing: derivative {d} at x = {x}"),
                });
            }
        }
    }
    report
}
