//! Exact self-similar Riemann solver.
//!
//! The solution depends on the phases of the two data:
//!
//! | left \ right | free                             | congested                        |
//! |--------------|----------------------------------|----------------------------------|
//! | free         | one linear wave at `V_max`       | shock, then 2-contact            |
//! | congested    | 1-rarefaction, then linear wave  | 1-wave (shock/rarefaction), then 2-contact |
//!
//! Every 1-wave keeps the left marker `w`; the middle state is found on the
//! first Lax curve (`w = w_left`) by matching the speed of the right state
//! (or `V_max` when the right state is free).
//!
//! States on the free/congested boundary are handled as congested when the
//! other datum is congested and as free otherwise. Both readings give the
//! same solution.

use std::fmt;

use crate::error::{Error, Result};
use crate::model::{ModelParams, Phase, TrafficState};

/// Tolerance used to compare states in the consistency predicates.
pub const CONSISTENCY_TOL: f64 = 1e-10;

/// Grid size used by the consistency predicates.
pub const CONSISTENCY_GRID: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WaveKind {
    Shock,
    Rarefaction,
    Contact2,
    FreeLinear,
}

impl WaveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            WaveKind::Shock => "shock",
            WaveKind::Rarefaction => "rarefaction",
            WaveKind::Contact2 => "contact",
            WaveKind::FreeLinear => "free_linear",
        }
    }
}

impl fmt::Display for WaveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wave {
    pub kind: WaveKind,
    pub left: TrafficState,
    pub right: TrafficState,
    pub speed_lo: f64,
    pub speed_hi: f64,
}

impl Wave {
    fn jump(kind: WaveKind, left: TrafficState, right: TrafficState, speed: f64) -> Self {
        Wave {
            kind,
            left,
            right,
            speed_lo: speed,
            speed_hi: speed,
        }
    }

    pub fn is_discontinuity(&self) -> bool {
        self.kind != WaveKind::Rarefaction
    }
}

/// Which of the four constructions produced a fan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiemannCase {
    FreeFree,
    CongestedCongested,
    CongestedFree,
    FreeCongested,
}

/// Marker given to the middle state when a congested left state meets a
/// free right state. `Left` is what the 1-rarefaction requires and is what
/// [`solve`] uses; `Right` is kept only for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CongestedFreeMarker {
    #[default]
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveFan {
    pub left: TrafficState,
    pub right: TrafficState,
    pub case: RiemannCase,
    pub waves: Vec<Wave>,
}

impl WaveFan {
    /// Left datum, then the right state of every wave.
    pub fn states(&self) -> impl Iterator<Item = TrafficState> + '_ {
        std::iter::once(self.left).chain(self.waves.iter().map(|w| w.right))
    }

    pub fn slowest(&self) -> Option<f64> {
        self.waves.first().map(|w| w.speed_lo)
    }

    pub fn fastest(&self) -> Option<f64> {
        self.waves.last().map(|w| w.speed_hi)
    }
}

pub fn classify(left: TrafficState, right: TrafficState, params: &ModelParams) -> RiemannCase {
    let pl = params.phase_of(left);
    let pr = params.phase_of(right);
    let treat_congested = |own: Phase, other: Phase| match own {
        Phase::Congested => true,
        Phase::Free => false,
        Phase::FreeCongestedBoundary => other == Phase::Congested,
    };
    match (treat_congested(pl, pr), treat_congested(pr, pl)) {
        (false, false) => RiemannCase::FreeFree,
        (true, true) => RiemannCase::CongestedCongested,
        (true, false) => RiemannCase::CongestedFree,
        (false, true) => RiemannCase::FreeCongested,
    }
}

pub fn solve(left: TrafficState, right: TrafficState, params: &ModelParams) -> Result<WaveFan> {
    params.check_state(left)?;
    params.check_state(right)?;
    let case = classify(left, right, params);
    solve_case(left, right, case, params)
}

pub fn middle_state(
    left: TrafficState,
    right: TrafficState,
    params: &ModelParams,
) -> Result<TrafficState> {
    middle_state_with(left, right, params, CongestedFreeMarker::Left)
}

pub fn middle_state_with(
    left: TrafficState,
    right: TrafficState,
    params: &ModelParams,
    marker: CongestedFreeMarker,
) -> Result<TrafficState> {
    params.check_state(left)?;
    params.check_state(right)?;
    match classify(left, right, params) {
        RiemannCase::FreeFree => Err(Error::NoMiddleState),
        RiemannCase::CongestedFree => {
            let w = match marker {
                CongestedFreeMarker::Left => left.w,
                CongestedFreeMarker::Right => right.w,
            };
            let rho = params.invert_psi(params.v_max() / w)?;
            Ok(TrafficState::new(rho, w))
        }
        RiemannCase::CongestedCongested | RiemannCase::FreeCongested => {
            middle_on_first_curve(left, right, params)
        }
    }
}

/// State on the first Lax curve through `left` whose speed matches `right`.
fn middle_on_first_curve(
    left: TrafficState,
    right: TrafficState,
    params: &ModelParams,
) -> Result<TrafficState> {
    if left.w == right.w {
        return Ok(right);
    }
    let v = params.speed(right);
    if v == 0.0 {
        return Ok(TrafficState::new(params.r(), left.w));
    }
    let rho = params.invert_psi(v / left.w)?;
    Ok(TrafficState::new(rho, left.w))
}

pub(crate) fn solve_case(
    left: TrafficState,
    right: TrafficState,
    case: RiemannCase,
    params: &ModelParams,
) -> Result<WaveFan> {
    let mut waves = Vec::with_capacity(2);
    match case {
        RiemannCase::FreeFree => {
            if left != right {
                waves.push(Wave::jump(
                    WaveKind::FreeLinear,
                    left,
                    right,
                    params.v_max(),
                ));
            }
        }
        RiemannCase::CongestedCongested | RiemannCase::FreeCongested => {
            let mid = middle_on_first_curve(left, right, params)?;
            if let Some(w) = first_wave(left, mid, params) {
                waves.push(w);
            }
            if mid != right {
                waves.push(Wave::jump(
                    WaveKind::Contact2,
                    mid,
                    right,
                    params.speed(right),
                ));
            }
        }
        RiemannCase::CongestedFree => {
            let rho = params.invert_psi(params.v_max() / left.w)?;
            let mid = TrafficState::new(rho, left.w);
            if let Some(w) = first_wave(left, mid, params) {
                waves.push(w);
            }
            if mid != right {
                waves.push(Wave::jump(WaveKind::FreeLinear, mid, right, params.v_max()));
            }
        }
    }
    Ok(WaveFan {
        left,
        right,
        case,
        waves,
    })
}

/// 1-wave joining two states with the same marker.
fn first_wave(left: TrafficState, right: TrafficState, params: &ModelParams) -> Option<Wave> {
    debug_assert_eq!(left.w, right.w);
    if left.rho == right.rho {
        return None;
    }
    // both states satisfy v = w psi here. For nearly equal densities the
    // difference quotient cancels, and the midpoint slope is accurate to
    // O(d rho^2) (exact for quadratic flows)
    let shock_speed = || {
        let d = right.rho - left.rho;
        if d.abs() <= 1e-5 * params.r() {
            return params.lambda1_congested(0.5 * (left.rho + right.rho), left.w);
        }
        let ql = left.rho * params.speed(left);
        let qr = right.rho * params.speed(right);
        (qr - ql) / d
    };
    if right.rho > left.rho {
        return Some(Wave::jump(WaveKind::Shock, left, right, shock_speed()));
    }
    let lo = params.lambda1_congested(left.rho, left.w);
    let hi = params.lambda1_congested(right.rho, right.w);
    if hi - lo <= 1e-13 {
        // flow is affine between the two densities: the fan collapses to a
        // contact moving at the common characteristic speed
        return Some(Wave::jump(WaveKind::Shock, left, right, shock_speed()));
    }
    Some(Wave {
        kind: WaveKind::Rarefaction,
        left,
        right,
        speed_lo: lo,
        speed_hi: hi,
    })
}

/// State inside a 1-rarefaction with marker `w` travelling at speed `xi`.
pub fn rarefaction_state(w: f64, xi: f64, params: &ModelParams) -> Result<TrafficState> {
    let lo = params.rho_bar();
    let hi = params.r();
    let fastest = params.lambda1_congested(lo, w);
    let slowest = params.lambda1_congested(hi, w);
    if !(xi >= slowest && xi <= fastest) {
        return Err(Error::Domain(format!(
            "speed {xi} is outside the first-family range [{slowest}, {fastest}] for w={w}"
        )));
    }
    Ok(TrafficState::new(
        rarefaction_density(w, xi, lo, hi, params),
        w,
    ))
}

/// Solves `w (rho psi)'(rho) = xi` on `[rho_lo, rho_hi]`; the left-hand side
/// is non-increasing in `rho`.
fn rarefaction_density(w: f64, xi: f64, rho_lo: f64, rho_hi: f64, params: &ModelParams) -> f64 {
    let (mut lo, mut hi) = (rho_lo, rho_hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if params.lambda1_congested(mid, w) > xi {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let err = |r: f64| (params.lambda1_congested(r, w) - xi).abs();
    if err(lo) <= err(hi) {
        lo
    } else {
        hi
    }
}

/// Value of the self-similar solution at `x / t = xi`. Right-continuous at
/// discontinuities.
pub fn evaluate(fan: &WaveFan, xi: f64, params: &ModelParams) -> TrafficState {
    let mut state = fan.left;
    for wave in &fan.waves {
        if xi < wave.speed_lo {
            return state;
        }
        if wave.kind == WaveKind::Rarefaction && xi < wave.speed_hi {
            if xi == wave.speed_lo {
                return wave.left;
            }
            let rho = rarefaction_density(wave.left.w, xi, wave.right.rho, wave.left.rho, params);
            return TrafficState::new(rho, wave.left.w);
        }
        state = wave.right;
    }
    state
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConsistencyReport {
    pub c1: bool,
    pub c2: bool,
    /// Whether the hypotheses of each condition held (otherwise the
    /// condition is vacuously true).
    pub c1_applies: bool,
    pub c2_applies: bool,
}

fn close(a: TrafficState, b: TrafficState) -> bool {
    (a.rho - b.rho).abs() <= CONSISTENCY_TOL && (a.w - b.w).abs() <= CONSISTENCY_TOL
}

/// Checks the juxtaposition (C1) and restriction (C2) properties of the
/// solver for the triple `left, mid, right` and the point `x_bar`, at `t = 1`.
pub fn check_consistency(
    left: TrafficState,
    mid: TrafficState,
    right: TrafficState,
    params: &ModelParams,
    x_bar: f64,
) -> Result<ConsistencyReport> {
    let full = solve(left, right, params)?;
    let first = solve(left, mid, params)?;
    let second = solve(mid, right, params)?;

    let lo = params.min_wave_speed().min(x_bar) - 1.0;
    let hi = params.v_max().max(x_bar) + 1.0;
    let step = (hi - lo) / (CONSISTENCY_GRID - 1) as f64;
    let grid = || {
        (0..CONSISTENCY_GRID)
            .map(|k| lo + step * k as f64)
            .chain([x_bar])
    };
    let at = |fan: &WaveFan, x: f64| evaluate(fan, x, params);

    let c1_applies = close(at(&first, x_bar), mid) && close(at(&second, x_bar), mid);
    let c1 = !c1_applies
        || grid().all(|x| {
            let pasted = if x < x_bar {
                at(&first, x)
            } else {
                at(&second, x)
            };
            close(pasted, at(&full, x))
        });

    let c2_applies = close(at(&full, x_bar), mid);
    let c2 = !c2_applies
        || grid().all(|x| {
            let expect_first = if x <= x_bar { at(&full, x) } else { mid };
            let expect_second = if x < x_bar { mid } else { at(&full, x) };
            close(at(&first, x), expect_first) && close(at(&second, x), expect_second)
        });

    Ok(ConsistencyReport {
        c1,
        c2,
        c1_applies,
        c2_applies,
    })
}
