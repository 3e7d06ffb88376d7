//! Model constants, states and the pointwise algebra of the two-phase system
//!
//! ```text
//! d_t rho + d_x (rho v)  = 0
//! d_t eta + d_x (eta v)  = 0,     v = min{ V_max, (eta / rho) psi(rho) }
//! ```
//!
//! States are stored as `(rho, w)` with `w = eta / rho` the Lagrangian marker
//! (a driver's own maximal speed); `eta` is derived on demand.

use std::fmt;

use crate::error::{Error, Result};
use crate::speed_law::SpeedLaw;

/// Absolute tolerance, on speeds, used to decide the phase of a state.
pub const PHASE_TOL: f64 = 1e-12;

/// Number of uniform samples used by the hypothesis checks.
pub const VALIDATION_SAMPLES: usize = 1001;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficState {
    pub rho: f64,
    pub w: f64,
}

impl TrafficState {
    pub const fn new(rho: f64, w: f64) -> Self {
        TrafficState { rho, w }
    }

    pub fn eta(&self) -> f64 {
        self.rho * self.w
    }
}

impl fmt::Display for TrafficState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(rho={}, w={})", self.rho, self.w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Free,
    Congested,
    FreeCongestedBoundary,
}

impl Phase {
    pub fn is_free(self) -> bool {
        matches!(self, Phase::Free | Phase::FreeCongestedBoundary)
    }

    pub fn is_congested(self) -> bool {
        matches!(self, Phase::Congested | Phase::FreeCongestedBoundary)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Free => "free",
            Phase::Congested => "congested",
            Phase::FreeCongestedBoundary => "boundary",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaxFamily {
    First,
    Second,
}

/// Which standing hypothesis a violation belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    /// Positivity of the constants and `w_min < w_max`.
    A,
    /// Shape of the speed law.
    B,
    /// `w_min > V_max`: every driver feels the speed bound.
    C,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Hypothesis::A => "a",
            Hypothesis::B => "b",
            Hypothesis::C => "c",
        };
        write!(f, "hypothesis {s}.")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NotPositive { name: &'static str, value: f64 },
    MarkerRangeEmpty { w_min: f64, w_max: f64 },
    PsiAtZero { value: f64 },
    PsiAtMaxDensity { value: f64 },
    PsiOutOfRange { rho: f64, value: f64 },
    PsiIncreasing { rho: f64, dpsi: f64 },
    FlowNotConcave { rho: f64, second_difference: f64 },
    SpeedBoundNotFelt { w_min: f64, v_max: f64 },
}

impl Violation {
    pub fn hypothesis(&self) -> Hypothesis {
        match self {
            Violation::NotPositive { .. } | Violation::MarkerRangeEmpty { .. } => Hypothesis::A,
            Violation::SpeedBoundNotFelt { .. } => Hypothesis::C,
            _ => Hypothesis::B,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.hypothesis())?;
        match self {
            Violation::NotPositive { name, value } => {
                write!(f, "{name} must be positive, got {value}")
            }
            Violation::MarkerRangeEmpty { w_min, w_max } => {
                write!(f, "w_min={w_min} must be below w_max={w_max}")
            }
            Violation::PsiAtZero { value } => write!(f, "psi(0) must be 1, got {value}"),
            Violation::PsiAtMaxDensity { value } => write!(f, "psi(R) must be 0, got {value}"),
            Violation::PsiOutOfRange { rho, value } => {
                write!(f, "psi({rho}) = {value} lies outside [0,1]")
            }
            Violation::PsiIncreasing { rho, dpsi } => {
                write!(f, "psi must be non-increasing, psi'({rho}) = {dpsi}")
            }
            Violation::FlowNotConcave {
                rho,
                second_difference,
            } => write!(
                f,
                "rho*psi(rho) must be concave, second difference {second_difference} at rho={rho}"
            ),
            Violation::SpeedBoundNotFelt { w_min, v_max } => {
                write!(f, "w_min={w_min} must exceed v_max={v_max}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violates(&self, h: Hypothesis) -> bool {
        self.violations.iter().any(|v| v.hypothesis() == h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalDensities {
    /// End of the plateau where `psi` is constant; `psi` is strictly
    /// decreasing on `[rho_bar, R]`.
    pub rho_bar: f64,
    /// Largest maximiser of the flow `rho * psi(rho)`.
    pub rho_star: f64,
    /// Whether the maximal flow is attained in the free phase,
    /// `w_max * psi(rho_star) >= V_max`.
    pub capacity_drop: bool,
}

/// Model constants. `R` is the maximal density of the speed law.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    law: SpeedLaw,
    w_min: f64,
    w_max: f64,
    v_max: f64,
    rho_bar: f64,
    rho_star: f64,
}

impl ModelParams {
    /// Builds the parameter set without checking the hypotheses; see
    /// [`ModelParams::validate`] and [`ModelParams::checked`].
    pub fn new(law: SpeedLaw, w_min: f64, w_max: f64, v_max: f64) -> Self {
        let rho_bar = plateau_end(&law);
        let rho_star = flow_argmax(&law);
        ModelParams {
            law,
            w_min,
            w_max,
            v_max,
            rho_bar,
            rho_star,
        }
    }

    /// Like [`ModelParams::new`] but fails when any hypothesis is violated.
    pub fn checked(law: SpeedLaw, w_min: f64, w_max: f64, v_max: f64) -> Result<Self> {
        let p = Self::new(law, w_min, w_max, v_max);
        let report = p.validate();
        if let Some(v) = report.violations.first() {
            return Err(Error::Domain(v.to_string()));
        }
        Ok(p)
    }

    /// `R = 1`, `psi = 1 - rho`, `V_max = 0.8`, `w` in `[1, 2]`.
    pub fn reference() -> Self {
        Self::new(SpeedLaw::affine(1.0), 1.0, 2.0, 0.8)
    }

    pub fn law(&self) -> &SpeedLaw {
        &self.law
    }
    pub fn r(&self) -> f64 {
        self.law.max_density()
    }
    pub fn w_min(&self) -> f64 {
        self.w_min
    }
    pub fn w_max(&self) -> f64 {
        self.w_max
    }
    pub fn v_max(&self) -> f64 {
        self.v_max
    }
    pub fn rho_bar(&self) -> f64 {
        self.rho_bar
    }
    pub fn rho_star(&self) -> f64 {
        self.rho_star
    }

    pub fn psi(&self, rho: f64) -> f64 {
        self.law.psi(rho)
    }

    pub fn dpsi(&self, rho: f64) -> f64 {
        self.law.dpsi(rho)
    }

    /// Same model with densities rescaled so that `R = 1`.
    pub fn normalized(&self) -> Self {
        Self::new(self.law.rescaled(1.0), self.w_min, self.w_max, self.v_max)
    }

    /// Copy with a different marker range; used for the single-marker
    /// reduction where `w_min == w_max` (which deliberately violates a.).
    pub fn with_marker_range(&self, w_min: f64, w_max: f64) -> Self {
        ModelParams {
            w_min,
            w_max,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let r = self.r();
        for (name, value) in [
            ("R", r),
            ("w_min", self.w_min),
            ("w_max", self.w_max),
            ("v_max", self.v_max),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                violations.push(Violation::NotPositive { name, value });
            }
        }
        if !(self.w_min < self.w_max) {
            violations.push(Violation::MarkerRangeEmpty {
                w_min: self.w_min,
                w_max: self.w_max,
            });
        }

        if r > 0.0 && r.is_finite() {
            let p0 = self.psi(0.0);
            if (p0 - 1.0).abs() > 1e-12 {
                violations.push(Violation::PsiAtZero { value: p0 });
            }
            let pr = self.psi(r);
            if pr.abs() > 1e-12 {
                violations.push(Violation::PsiAtMaxDensity { value: pr });
            }
            let n = VALIDATION_SAMPLES;
            let h = r / (n - 1) as f64;
            let rho_k = |k: usize| if k == n - 1 { r } else { k as f64 * h };
            let flow: Vec<f64> = (0..n).map(|k| rho_k(k) * self.psi(rho_k(k))).collect();
            if let Some(k) = (0..n).find(|&k| {
                let v = self.psi(rho_k(k));
                !(-1e-12..=1.0 + 1e-12).contains(&v)
            }) {
                violations.push(Violation::PsiOutOfRange {
                    rho: rho_k(k),
                    value: self.psi(rho_k(k)),
                });
            }
            if let Some(k) = (0..n).find(|&k| !(self.dpsi(rho_k(k)) <= 1e-12)) {
                violations.push(Violation::PsiIncreasing {
                    rho: rho_k(k),
                    dpsi: self.dpsi(rho_k(k)),
                });
            }
            if let Some(k) =
                (1..n - 1).find(|&k| !(flow[k - 1] - 2.0 * flow[k] + flow[k + 1] <= 1e-10))
            {
                violations.push(Violation::FlowNotConcave {
                    rho: rho_k(k),
                    second_difference: flow[k - 1] - 2.0 * flow[k] + flow[k + 1],
                });
            }
        }

        if !(self.w_min > self.v_max) {
            violations.push(Violation::SpeedBoundNotFelt {
                w_min: self.w_min,
                v_max: self.v_max,
            });
        }
        ValidationReport { violations }
    }

    pub fn check_state(&self, s: TrafficState) -> Result<()> {
        let ok = (0.0..=self.r()).contains(&s.rho) && (self.w_min..=self.w_max).contains(&s.w);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidState {
                rho: s.rho,
                w: s.w,
                r: self.r(),
                w_min: self.w_min,
                w_max: self.w_max,
            })
        }
    }

    /// `v = min{V_max, w psi(rho)}`; the vacuum moves at `V_max`.
    pub fn speed(&self, s: TrafficState) -> f64 {
        if s.rho == 0.0 {
            return self.v_max;
        }
        self.v_max.min(s.w * self.psi(s.rho))
    }

    pub fn phase_of(&self, s: TrafficState) -> Phase {
        let unbounded = s.w * self.psi(s.rho);
        if unbounded > self.v_max + PHASE_TOL {
            Phase::Free
        } else if unbounded < self.v_max - PHASE_TOL {
            Phase::Congested
        } else {
            Phase::FreeCongestedBoundary
        }
    }

    /// Physical flux `(rho v, eta v)`.
    pub fn flux(&self, s: TrafficState) -> [f64; 2] {
        let q = s.rho * self.speed(s);
        [q, s.w * q]
    }

    /// `(lambda_1, lambda_2)`. Free states carry the double speed `V_max`;
    /// congested and boundary states use `lambda_1 = eta psi' + v`,
    /// `lambda_2 = v`.
    pub fn char_speeds(&self, s: TrafficState) -> (f64, f64) {
        match self.phase_of(s) {
            Phase::Free => (self.v_max, self.v_max),
            _ => {
                let v = self.speed(s);
                (s.eta() * self.dpsi(s.rho) + v, v)
            }
        }
    }

    /// First characteristic speed in its congested form `w (rho psi)'(rho)`.
    pub(crate) fn lambda1_congested(&self, rho: f64, w: f64) -> f64 {
        w * self.law.dflow(rho)
    }

    /// `eta` on the Lax curve of the given family through `anchor`.
    pub fn lax_curve(&self, family: LaxFamily, rho: f64, anchor: TrafficState) -> Result<f64> {
        match family {
            LaxFamily::First => {
                if !(anchor.rho > 0.0) {
                    return Err(Error::Domain(
                        "first Lax curve needs an anchor with positive density".into(),
                    ));
                }
                Ok(anchor.w * rho)
            }
            LaxFamily::Second => {
                if rho >= self.r() {
                    return Err(Error::Domain(
                        "second Lax curve is the vertical segment rho=R there".into(),
                    ));
                }
                Ok(rho * self.speed(anchor) / self.psi(rho))
            }
        }
    }

    pub fn critical_densities(&self) -> CriticalDensities {
        CriticalDensities {
            rho_bar: self.rho_bar,
            rho_star: self.rho_star,
            capacity_drop: self.w_max * self.psi(self.rho_star) >= self.v_max,
        }
    }

    /// Unique `rho` in `[rho_bar, R]` with `psi(rho) = c`, by bisection.
    pub fn invert_psi(&self, c: f64) -> Result<f64> {
        let top = self.psi(self.rho_bar);
        if !(c > 0.0 && c <= top) {
            return Err(Error::Domain(format!(
                "psi^-1 is defined on (0, {top}], got {c}"
            )));
        }
        if c == top {
            return Ok(self.rho_bar);
        }
        let (mut lo, mut hi) = (self.rho_bar, self.r());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.psi(mid) > c {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let best = if (self.psi(lo) - c).abs() <= (self.psi(hi) - c).abs() {
            lo
        } else {
            hi
        };
        Ok(best)
    }

    /// Lower bound for every wave speed the Riemann solver can emit.
    pub fn min_wave_speed(&self) -> f64 {
        let q = self.law.dflow(self.r());
        (self.w_min * q).min(self.w_max * q).min(0.0)
    }
}

fn plateau_end(law: &SpeedLaw) -> f64 {
    match law {
        SpeedLaw::Affine { .. } => 0.0,
        SpeedLaw::Table(t) => {
            let (xs, ys) = t.knots();
            let run = ys.iter().take_while(|&&y| y == ys[0]).count();
            if run >= 2 {
                xs[run - 1]
            } else {
                0.0
            }
        }
    }
}

fn flow_argmax(law: &SpeedLaw) -> f64 {
    let r = law.max_density();
    match law {
        SpeedLaw::Affine { r } => 0.5 * r,
        SpeedLaw::Table(_) => {
            // (rho psi)' is non-increasing; the largest maximiser is where it
            // last stays non-negative.
            let tol = 1e-13;
            if law.dflow(r) >= -tol {
                return r;
            }
            let (mut lo, mut hi) = (0.0, r);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if law.dflow(mid) >= -tol {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        }
    }
}
