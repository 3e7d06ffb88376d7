//! Particle discretization of a macroscopic datum, reconstruction of density
//! and marker fields from car positions, and the weak-form residual used to
//! watch the particle system converge to the macroscopic one.
//!
//! Everything in here works with normalized densities (`R = 1`); use
//! [`MacroDatum::normalized`] and [`ModelParams::normalized`] first.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ftl::{self, MicroState};
use crate::godunov::{self, CellField, Ghost, GodunovSetup, Piece};
use crate::model::{ModelParams, TrafficState};
use crate::riemann::{evaluate, WaveFan};

/// Number of test functions in the standard battery.
pub const BATTERY_SIZE: usize = 10;

/// Minimum number of time quadrature nodes inside a test function's support.
pub const MIN_TIME_NODES: usize = 20;

/// Piecewise-constant `(rho, w)` supported in `[-L, L]`. Piece `k` covers
/// `[x_start_k, x_start_{k+1})`, the last one ends at `L`; left of the first
/// piece the density is zero and the marker is the first piece's.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroDatum {
    half_length: f64,
    pieces: Vec<Piece>,
}

impl MacroDatum {
    pub fn new(half_length: f64, pieces: Vec<Piece>) -> Result<Self> {
        let bad = |m: String| Err(Error::DatumInconsistent(m));
        if !(half_length > 0.0 && half_length.is_finite()) {
            return bad(format!("half-length must be positive, got {half_length}"));
        }
        if pieces.is_empty() {
            return bad("datum has no pieces".into());
        }
        if pieces
            .iter()
            .any(|p| !(p.x_start.is_finite() && p.rho.is_finite() && p.w.is_finite()))
        {
            return bad("datum contains a non-finite value".into());
        }
        if pieces[0].x_start < -half_length {
            return bad(format!(
                "first piece starts at {} left of -L = {}",
                pieces[0].x_start, -half_length
            ));
        }
        if pieces.windows(2).any(|p| p[1].x_start <= p[0].x_start) {
            return bad("piece starts must be strictly increasing".into());
        }
        if pieces.last().is_some_and(|p| p.x_start >= half_length) {
            return bad(format!(
                "last piece starts at or right of L = {half_length}"
            ));
        }
        if let Some(p) = pieces.iter().find(|p| p.rho < 0.0) {
            return bad(format!("negative density {} at x = {}", p.rho, p.x_start));
        }
        let datum = MacroDatum {
            half_length,
            pieces,
        };
        if !(datum.mass() > 0.0) {
            return bad("datum carries no mass".into());
        }
        Ok(datum)
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    fn end(&self, k: usize) -> f64 {
        self.pieces
            .get(k + 1)
            .map_or(self.half_length, |p| p.x_start)
    }

    /// Densities divided by `r`.
    pub fn normalized(&self, r: f64) -> Self {
        MacroDatum {
            half_length: self.half_length,
            pieces: self
                .pieces
                .iter()
                .map(|p| Piece {
                    rho: p.rho / r,
                    ..*p
                })
                .collect(),
        }
    }

    /// Checks densities against `[0, R]` and markers against `[w_min, w_max]`.
    pub fn check(&self, params: &ModelParams) -> Result<()> {
        for p in &self.pieces {
            if p.rho > params.r() || p.w < params.w_min() || p.w > params.w_max() {
                return Err(Error::DatumInconsistent(format!(
                    "piece at x = {} has (rho, w) = ({}, {}) outside [0,{}]x[{},{}]",
                    p.x_start,
                    p.rho,
                    p.w,
                    params.r(),
                    params.w_min(),
                    params.w_max()
                )));
            }
        }
        Ok(())
    }

    pub fn mass(&self) -> f64 {
        (0..self.pieces.len())
            .map(|k| self.pieces[k].rho * (self.end(k) - self.pieces[k].x_start))
            .sum()
    }

    /// `int_{a}^{b} rho`.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        (0..self.pieces.len())
            .map(|k| {
                let lo = a.max(self.pieces[k].x_start);
                let hi = b.min(self.end(k));
                self.pieces[k].rho * (hi - lo).max(0.0)
            })
            .sum()
    }

    /// Right limit `(rho, w)(x+)`.
    pub fn state_right_of(&self, x: f64) -> TrafficState {
        let k = self.pieces.partition_point(|p| p.x_start <= x);
        if k == 0 {
            return TrafficState::new(0.0, self.pieces[0].w);
        }
        let p = &self.pieces[k - 1];
        if x >= self.half_length {
            TrafficState::new(0.0, p.w)
        } else {
            TrafficState::new(p.rho, p.w)
        }
    }

    /// Largest `p` with `int_{-L}^{p} rho = target`, for `0 <= target < mass`.
    fn inverse_cumulative(&self, target: f64) -> f64 {
        let mut acc = 0.0;
        for (k, p) in self.pieces.iter().enumerate() {
            let piece_mass = p.rho * (self.end(k) - p.x_start);
            if p.rho > 0.0 && acc + piece_mass > target {
                let x = p.x_start + (target - acc) / p.rho;
                return x.min(self.end(k));
            }
            acc += piece_mass;
        }
        self.half_length
    }

    pub fn profile(&self) -> Profile {
        let mut xs = vec![-self.half_length];
        let mut states = Vec::new();
        if self.pieces[0].x_start > -self.half_length {
            xs.push(self.pieces[0].x_start);
            states.push(TrafficState::new(0.0, self.pieces[0].w));
        }
        for (k, p) in self.pieces.iter().enumerate() {
            xs.push(self.end(k));
            states.push(TrafficState::new(p.rho, p.w));
        }
        Profile::Piecewise { xs, states }
    }
}

/// Initial car positions: `l = mass / n`, the leader at `L - l`, and each
/// follower at the largest `p` leaving exactly `l` of mass before the next
/// car. Positions are computed from the cumulative mass measured from `-L`,
/// so round-off does not accumulate along the platoon.
pub fn discretize(datum: &MacroDatum, n: usize, params: &ModelParams) -> Result<MicroState> {
    if n < 2 {
        return Err(Error::Domain(format!(
            "need at least two cars, got n = {n}"
        )));
    }
    datum.check(params)?;
    let mass = datum.mass();
    let l = mass / n as f64;
    let big_l = datum.half_length;
    let tail = datum.mass_between(big_l - l, big_l);
    // round-off in L - l must not reject a support ending exactly there
    if tail > 1e-12 * mass {
        return Err(Error::DatumInconsistent(format!(
            "mass {tail} lies in [L - l, L] = [{}, {big_l}]; widen L",
            big_l - l
        )));
    }
    let mut positions = Vec::with_capacity(n + 1);
    for i in 0..n {
        positions.push(datum.inverse_cumulative(i as f64 * mass / n as f64));
    }
    positions.push(big_l - l);
    let markers = positions
        .iter()
        .map(|&p| datum.state_right_of(p).w)
        .collect();
    MicroState::new(l, positions, markers, params)
}

/// Density `l / (p_{i+1} - p_i)` and marker `w_i` on `[p_i, p_{i+1})`.
pub fn reconstruct(state: &MicroState) -> Profile {
    let l = state.car_length();
    let p = state.positions();
    let states = p
        .windows(2)
        .zip(state.markers())
        .map(|(pair, &w)| TrafficState::new(l / (pair[1] - pair[0]), w))
        .collect();
    Profile::Piecewise {
        xs: p.to_vec(),
        states,
    }
}

/// A state profile at one instant.
#[derive(Debug, Clone)]
pub enum Profile {
    /// `states[k]` on `[xs[k], xs[k+1])`; vacuum outside `[xs[0], xs[last])`.
    Piecewise {
        xs: Vec<f64>,
        states: Vec<TrafficState>,
    },
    /// Self-similar solution `u((x - x0) / t)`; at `t = 0` the Riemann data.
    Fan { fan: WaveFan, x0: f64, t: f64 },
}

impl Profile {
    pub fn from_cells(field: &CellField) -> Self {
        let (a, _) = field.domain();
        let dx = field.dx();
        Profile::Piecewise {
            xs: (0..=field.len()).map(|j| a + dx * j as f64).collect(),
            states: field.states().collect(),
        }
    }

    fn breaks(&self) -> Vec<f64> {
        match self {
            Profile::Piecewise { xs, .. } => xs.clone(),
            Profile::Fan { fan, x0, t } => {
                let mut b = vec![];
                for w in &fan.waves {
                    b.push(x0 + t * w.speed_lo);
                    b.push(x0 + t * w.speed_hi);
                }
                b.sort_by(f64::total_cmp);
                b
            }
        }
    }

    pub fn state(&self, x: f64, params: &ModelParams) -> TrafficState {
        match self {
            Profile::Piecewise { xs, states } => {
                let k = xs.partition_point(|&b| b <= x);
                if k == 0 {
                    TrafficState::new(0.0, states[0].w)
                } else if k == xs.len() {
                    TrafficState::new(0.0, states[states.len() - 1].w)
                } else {
                    states[k - 1]
                }
            }
            Profile::Fan { fan, x0, t } => {
                if *t > 0.0 {
                    evaluate(fan, (x - x0) / t, params)
                } else if x < *x0 {
                    fan.left
                } else {
                    fan.right
                }
            }
        }
    }
}

/// `int |rho_a - rho_b| dx` for two piecewise-constant profiles, exactly.
pub fn l1_distance(a: &Profile, b: &Profile, params: &ModelParams) -> f64 {
    let mut xs = a.breaks();
    xs.extend(b.breaks());
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs.windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            (a.state(mid, params).rho - b.state(mid, params).rho).abs() * (w[1] - w[0])
        })
        .sum()
}

/// `phi(t, x) = a((t - t_c) / tau) * b((x - x_c) / sigma)` with
/// `a(s) = (1 - s^2)^6` and `b(s) = (1 - s^2)^6 cos(kappa s)` on `|s| < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFunction {
    pub t_c: f64,
    pub tau: f64,
    pub x_c: f64,
    pub sigma: f64,
    pub kappa: f64,
}

/// Exponent of `1 - s^2` in the bump profile. The bump is `C^{BUMP_POWER - 1}`
/// across the edge of its support, which bounds how well composite
/// quadrature on panels not aligned with that edge can do.
const BUMP_POWER: i32 = 6;

fn bump(s: f64) -> (f64, f64) {
    if s.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let q = 1.0 - s * s;
    let k = BUMP_POWER;
    (q.powi(k), -2.0 * k as f64 * s * q.powi(k - 1))
}

impl TestFunction {
    pub fn time_support(&self) -> (f64, f64) {
        (self.t_c - self.tau, self.t_c + self.tau)
    }

    pub fn space_support(&self) -> (f64, f64) {
        (self.x_c - self.sigma, self.x_c + self.sigma)
    }

    fn space(&self, x: f64) -> (f64, f64) {
        let s = (x - self.x_c) / self.sigma;
        let (q, dq) = bump(s);
        let (c, sn) = ((self.kappa * s).cos(), (self.kappa * s).sin());
        (q * c, (dq * c - self.kappa * q * sn) / self.sigma)
    }

    fn time(&self, t: f64) -> (f64, f64) {
        let (q, dq) = bump((t - self.t_c) / self.tau);
        (q, dq / self.tau)
    }

    pub fn value(&self, t: f64, x: f64) -> f64 {
        self.time(t).0 * self.space(x).0
    }

    /// `(d/dt phi, d/dx phi)`.
    pub fn gradient(&self, t: f64, x: f64) -> (f64, f64) {
        let (a, da) = self.time(t);
        let (b, db) = self.space(x);
        (da * b, a * db)
    }
}

/// Ten bumps with random centres and widths, deterministic in `seed`. Time
/// centres fall in `[0, T/2]` so that some bumps see the initial datum; every
/// support ends before `T` and stays inside `[x_lo, x_hi]`.
pub fn test_battery(seed: u64, t_final: f64, x_lo: f64, x_hi: f64) -> Vec<TestFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = 0.5 * (x_hi - x_lo);
    (0..BATTERY_SIZE)
        .map(|_| {
            let t_c = rng.gen_range(0.0..=0.5 * t_final);
            let tau = rng.gen_range(0.2 * t_final..0.45 * t_final);
            let sigma = rng.gen_range(0.15 * half..0.35 * half);
            let x_c = rng.gen_range(x_lo + sigma..x_hi - sigma);
            let kappa = rng.gen_range(0.0..std::f64::consts::TAU);
            TestFunction {
                t_c,
                tau,
                x_c,
                sigma,
                kappa,
            }
        })
        .collect()
}

const GAUSS_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

/// Composite 4-point Gauss-Legendre nodes and weights on `[a, b]`.
fn gauss_panels(a: f64, b: f64, panels: usize) -> impl Iterator<Item = (f64, f64)> {
    let h = (b - a) / panels as f64;
    (0..panels).flat_map(move |k| {
        let mid = a + h * (k as f64 + 0.5);
        GAUSS_NODES
            .iter()
            .zip(GAUSS_WEIGHTS)
            .map(move |(&z, w)| (mid + 0.5 * h * z, 0.5 * h * w))
    })
}

/// Tensor-product quadrature layout: composite Gauss-Legendre in time over
/// `[0, T]` and in space on every interval between discontinuities of the
/// profile, with panels no wider than `x_panel`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub t_final: f64,
    pub time_panels: usize,
    pub x_panel: f64,
}

impl Quadrature {
    pub fn time_nodes(&self) -> Vec<(f64, f64)> {
        gauss_panels(0.0, self.t_final, self.time_panels).collect()
    }

    /// The same layout with half as many time panels, used to estimate the
    /// time quadrature error.
    pub fn coarse(&self) -> Self {
        Quadrature {
            time_panels: (self.time_panels / 2).max(1),
            ..*self
        }
    }
}

/// `int phi-weighted quantities over x` for one profile: returns
/// `(int u phi_t + f phi_x dx)` (or `int u phi dx` when `initial`).
fn space_integral(
    profile: &Profile,
    phi: &TestFunction,
    t: f64,
    x_panel: f64,
    initial: bool,
    params: &ModelParams,
) -> [f64; 2] {
    let (lo, hi) = phi.space_support();
    let mut cuts: Vec<f64> = profile
        .breaks()
        .into_iter()
        .filter(|&b| b > lo && b < hi)
        .collect();
    cuts.insert(0, lo);
    cuts.push(hi);
    cuts.dedup();
    let mut acc = [0.0; 2];
    for seg in cuts.windows(2) {
        let panels = ((seg[1] - seg[0]) / x_panel).ceil().max(1.0) as usize;
        for (x, w) in gauss_panels(seg[0], seg[1], panels) {
            let s = profile.state(x, params);
            let u = [s.rho, s.eta()];
            if initial {
                let v = phi.value(0.0, x);
                acc[0] += w * u[0] * v;
                acc[1] += w * u[1] * v;
            } else {
                let f = params.flux(s);
                let (pt, px) = phi.gradient(t, x);
                acc[0] += w * (u[0] * pt + f[0] * px);
                acc[1] += w * (u[1] * pt + f[1] * px);
            }
        }
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub rho: f64,
    pub eta: f64,
}

impl Residual {
    pub fn max_abs(&self) -> f64 {
        self.rho.abs().max(self.eta.abs())
    }
}

fn check_resolution(phi: &TestFunction, quad: &Quadrature) -> Result<()> {
    let (a, b) = phi.time_support();
    let inside = quad
        .time_nodes()
        .iter()
        .filter(|(t, _)| *t > a && *t < b)
        .count();
    if inside < MIN_TIME_NODES {
        return Err(Error::UnderResolved(format!(
            "{inside} time nodes inside ({a}, {b}); need {MIN_TIME_NODES}"
        )));
    }
    let wavelength = if phi.kappa > 0.0 {
        std::f64::consts::TAU * phi.sigma / phi.kappa
    } else {
        2.0 * phi.sigma
    };
    if quad.x_panel * 5.0 > wavelength {
        return Err(Error::UnderResolved(format!(
            "space panel {} too coarse for oscillation length {wavelength}",
            quad.x_panel
        )));
    }
    Ok(())
}

/// `int int (u phi_t + f(u) phi_x) dx dt + int u_0 phi(0, x) dx` for
/// `u = (rho, rho w)`, with `profiles[k]` the solution at the `k`-th node of
/// `quad.time_nodes()`.
pub fn weak_residual(
    profiles: &[Profile],
    initial: &Profile,
    phi: &TestFunction,
    quad: &Quadrature,
    params: &ModelParams,
) -> Result<Residual> {
    check_resolution(phi, quad)?;
    let nodes = quad.time_nodes();
    if profiles.len() != nodes.len() {
        return Err(Error::Domain(format!(
            "{} profiles for {} time nodes",
            profiles.len(),
            nodes.len()
        )));
    }
    let mut acc = space_integral(initial, phi, 0.0, quad.x_panel, true, params);
    let (a, b) = phi.time_support();
    for ((t, w), profile) in nodes.iter().zip(profiles) {
        if *t <= a || *t >= b {
            continue;
        }
        let s = space_integral(profile, phi, *t, quad.x_panel, false, params);
        acc[0] += w * s[0];
        acc[1] += w * s[1];
    }
    Ok(Residual {
        rho: acc[0],
        eta: acc[1],
    })
}

/// Residual at the given layout and the difference to the coarse layout as
/// an estimate of the quadrature error.
pub fn weak_residual_with_estimate(
    sample: &mut dyn FnMut(&[f64]) -> Result<Vec<Profile>>,
    initial: &Profile,
    phi: &TestFunction,
    quad: &Quadrature,
    params: &ModelParams,
) -> Result<(Residual, f64)> {
    let fine_t: Vec<f64> = quad.time_nodes().iter().map(|n| n.0).collect();
    let fine = weak_residual(&sample(&fine_t)?, initial, phi, quad, params)?;
    let coarse_q = quad.coarse();
    let coarse_t: Vec<f64> = coarse_q.time_nodes().iter().map(|n| n.0).collect();
    let coarse = weak_residual(&sample(&coarse_t)?, initial, phi, &coarse_q, params)?;
    let err = (fine.rho - coarse.rho)
        .abs()
        .max((fine.eta - coarse.eta).abs());
    Ok((fine, err))
}

/// Profiles of an exact Riemann fan centred at `x0` at the given times.
pub fn fan_profiles(fan: &WaveFan, x0: f64, times: &[f64]) -> Vec<Profile> {
    times
        .iter()
        .map(|&t| Profile::Fan {
            fan: fan.clone(),
            x0,
            t,
        })
        .collect()
}

/// FTL reconstructions at the given times.
pub fn ftl_profiles(
    init: &MicroState,
    t_final: f64,
    times: &[f64],
    params: &ModelParams,
) -> Result<Vec<Profile>> {
    let dt = ftl::suggested_dt(init.car_length(), params);
    let traj = ftl::integrate_with_halving(init, t_final, dt, times, params)?;
    times
        .iter()
        .map(|&t| {
            let k = traj
                .times()
                .iter()
                .position(|&s| s == t)
                .ok_or_else(|| Error::Domain(format!("time {t} outside [0, {t_final}]")))?;
            Ok(reconstruct(&traj.state(k)))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct StudySetup {
    pub datum: MacroDatum,
    pub t_final: f64,
    pub n_list: Vec<usize>,
    pub godunov_cells: usize,
    pub time_panels: usize,
    pub seed: u64,
}

impl StudySetup {
    pub fn new(datum: MacroDatum, t_final: f64, n_list: Vec<usize>) -> Self {
        StudySetup {
            datum,
            t_final,
            n_list,
            godunov_cells: 4000,
            time_panels: 64,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyRow {
    pub n: usize,
    pub l: f64,
    pub residual_rho: f64,
    pub residual_eta: f64,
    /// Largest time-quadrature error estimate over the battery.
    pub quadrature_error: f64,
    pub l1_to_godunov: f64,
    pub runtime_s: f64,
}

/// The datum is given in the units of `params`; both are normalized to
/// `R = 1` before the study. For each `n`: discretize, integrate the FTL system to `T`, reconstruct,
/// and measure the largest weak residual over the test battery and the L1
/// distance of the density at `T` to a fine Godunov solution.
pub fn convergence_study(setup: &StudySetup, params: &ModelParams) -> Result<Vec<StudyRow>> {
    if setup.n_list.len() < 2 || setup.n_list.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::Domain(
            "n_list needs at least two strictly increasing entries".into(),
        ));
    }
    if !(setup.t_final > 0.0) {
        return Err(Error::Domain(format!(
            "final time must be positive, got {}",
            setup.t_final
        )));
    }
    let datum = setup.datum.normalized(params.r());
    let params = params.normalized();
    datum.check(&params)?;
    let big_l = datum.half_length();
    let t_final = setup.t_final;
    let reach = params.v_max() * t_final;
    let battery = test_battery(setup.seed, t_final, -big_l, big_l + reach);
    let quad = Quadrature {
        t_final,
        time_panels: setup.time_panels,
        x_panel: battery
            .iter()
            .map(|phi| phi.sigma / (1.0 + phi.kappa))
            .fold(f64::INFINITY, f64::min)
            / 8.0,
    };

    let margin = 0.25 * big_l + (params.min_wave_speed().abs() * t_final);
    let (a, b) = (-big_l - margin, big_l + reach + margin);
    let mut pieces = vec![Piece {
        x_start: a,
        rho: 0.0,
        w: datum.pieces()[0].w,
    }];
    pieces.extend_from_slice(datum.pieces());
    let reference = godunov::run(
        &GodunovSetup {
            initial: CellField::from_pieces(a, b, setup.godunov_cells, &pieces, Ghost::Outflow),
            t_final,
            snapshot_times: vec![],
            cfl: godunov::DEFAULT_CFL,
        },
        &params,
    )?;
    let reference = Profile::from_cells(reference.final_field());
    let initial = datum.profile();

    let mut rows = Vec::with_capacity(setup.n_list.len());
    for &n in &setup.n_list {
        let clock = Instant::now();
        let init = discretize(&datum, n, &params)?;
        let mut sample = |times: &[f64]| ftl_profiles(&init, t_final, times, &params);
        let (mut r_rho, mut r_eta, mut q_err) = (0.0f64, 0.0f64, 0.0f64);
        for phi in &battery {
            let (r, e) = weak_residual_with_estimate(&mut sample, &initial, phi, &quad, &params)?;
            r_rho = r_rho.max(r.rho.abs());
            r_eta = r_eta.max(r.eta.abs());
            q_err = q_err.max(e);
        }
        let last = ftl_profiles(&init, t_final, &[t_final], &params)?;
        let l1 = l1_distance(&last[0], &reference, &params);
        rows.push(StudyRow {
            n,
            l: init.car_length(),
            residual_rho: r_rho,
            residual_eta: r_eta,
            quadrature_error: q_err,
            l1_to_godunov: l1,
            runtime_s: clock.elapsed().as_secs_f64(),
        });
    }
    Ok(rows)
}
