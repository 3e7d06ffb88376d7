//! Follow-The-Leader particle system.
//!
//! Car `i` sits at `p_i` and drives at `u(l / (p_{i+1} - p_i), w_i)`; the
//! leader `p_{n+1}` drives at `V_max`. Integration is classical RK4 with a
//! fixed step and an a posteriori check on the gaps.

use crate::error::{Error, Result};
use crate::model::{ModelParams, TrafficState};

/// Relative slack on `p_{i+1} - p_i >= l` before a step is rejected.
pub const GAP_TOL: f64 = 1e-9;

/// How many times [`integrate_with_halving`] may halve the step.
pub const MAX_HALVINGS: u32 = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct MicroState {
    l: f64,
    positions: Vec<f64>,
    markers: Vec<f64>,
}

impl MicroState {
    /// `positions` and `markers` include the leader as their last entry.
    pub fn new(
        l: f64,
        positions: Vec<f64>,
        markers: Vec<f64>,
        params: &ModelParams,
    ) -> Result<Self> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::Domain(format!(
                "car length must be positive, got {l}"
            )));
        }
        if positions.len() < 2 {
            return Err(Error::Domain(
                "need at least one follower and a leader".into(),
            ));
        }
        if positions.len() != markers.len() {
            return Err(Error::Domain(format!(
                "{} positions but {} markers",
                positions.len(),
                markers.len()
            )));
        }
        if positions.iter().any(|p| !p.is_finite()) {
            return Err(Error::Domain("non-finite car position".into()));
        }
        for (i, pair) in positions.windows(2).enumerate() {
            if pair[1] - pair[0] < l * (1.0 - GAP_TOL) {
                return Err(Error::Domain(format!(
                    "gap {} between cars {} and {} is shorter than the car length {l}",
                    pair[1] - pair[0],
                    i + 1,
                    i + 2
                )));
            }
        }
        if let Some(&w) = markers
            .iter()
            .find(|&&w| !(w >= params.w_min() && w <= params.w_max()))
        {
            return Err(Error::Domain(format!(
                "marker {w} outside [{}, {}]",
                params.w_min(),
                params.w_max()
            )));
        }
        Ok(MicroState {
            l,
            positions,
            markers,
        })
    }

    /// Number of followers.
    pub fn n(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn car_length(&self) -> f64 {
        self.l
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn markers(&self) -> &[f64] {
        &self.markers
    }

    pub fn min_gap_ratio(&self) -> f64 {
        min_gap_of(&self.positions) / self.l
    }
}

fn min_gap_of(positions: &[f64]) -> f64 {
    positions
        .windows(2)
        .map(|p| p[1] - p[0])
        .fold(f64::INFINITY, f64::min)
}

/// Speed at dimensionless local density `rho`: `V_max` below zero, `0` above
/// one, and the model speed at `rho * R` in between.
pub fn extended_speed(rho: f64, w: f64, params: &ModelParams) -> f64 {
    if rho < 0.0 {
        params.v_max()
    } else if rho > 1.0 {
        0.0
    } else {
        params.speed(TrafficState::new(rho * params.r(), w))
    }
}

fn velocities(l: f64, positions: &[f64], markers: &[f64], params: &ModelParams, out: &mut [f64]) {
    let n = positions.len() - 1;
    for i in 0..n {
        let gap = positions[i + 1] - positions[i];
        out[i] = extended_speed(l / gap, markers[i], params);
    }
    out[n] = params.v_max();
}

pub fn rhs(state: &MicroState, params: &ModelParams) -> Vec<f64> {
    let mut out = vec![0.0; state.positions.len()];
    velocities(state.l, &state.positions, &state.markers, params, &mut out);
    out
}

/// A step size that keeps RK4 well inside its stability region: the
/// headway map `delta -> u(l/delta, w)` has Lipschitz constant at most
/// `w_max * R * max|psi'| / l` on `delta >= l`.
pub fn suggested_dt(l: f64, params: &ModelParams) -> f64 {
    let r = params.r();
    let steepest = (0..=1000)
        .map(|k| params.dpsi(r * k as f64 / 1000.0).abs())
        .fold(0.0, f64::max);
    let lipschitz = params.w_max() * r * steepest / l;
    if lipschitz > 0.0 {
        0.5 / lipschitz
    } else {
        l / params.v_max()
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    l: f64,
    markers: Vec<f64>,
    times: Vec<f64>,
    positions: Vec<Vec<f64>>,
    min_gap_ratio: f64,
    steps: usize,
}

impl Trajectory {
    pub fn car_length(&self) -> f64 {
        self.l
    }

    pub fn markers(&self) -> &[f64] {
        &self.markers
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn positions(&self) -> &[Vec<f64>] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn state(&self, k: usize) -> MicroState {
        MicroState {
            l: self.l,
            positions: self.positions[k].clone(),
            markers: self.markers.clone(),
        }
    }

    pub fn last(&self) -> MicroState {
        self.state(self.len() - 1)
    }

    pub fn velocities(&self, k: usize, params: &ModelParams) -> Vec<f64> {
        let mut out = vec![0.0; self.markers.len()];
        velocities(self.l, &self.positions[k], &self.markers, params, &mut out);
        out
    }
}

/// Smallest `(p_{i+1} - p_i) / l` over every step taken, recorded or not.
pub fn min_gap(trajectory: &Trajectory) -> f64 {
    trajectory.min_gap_ratio
}

struct Rk4 {
    k: [Vec<f64>; 4],
    stage: Vec<f64>,
}

impl Rk4 {
    fn new(len: usize) -> Self {
        Rk4 {
            k: std::array::from_fn(|_| vec![0.0; len]),
            stage: vec![0.0; len],
        }
    }

    fn step(&mut self, l: f64, p: &mut [f64], markers: &[f64], dt: f64, params: &ModelParams) {
        let len = p.len();
        velocities(l, p, markers, params, &mut self.k[0]);
        for (s, c) in [0.5, 0.5, 1.0].into_iter().enumerate() {
            let (done, rest) = self.k.split_at_mut(s + 1);
            for i in 0..len {
                self.stage[i] = p[i] + c * dt * done[s][i];
            }
            velocities(l, &self.stage, markers, params, &mut rest[0]);
        }
        let [k0, k1, k2, k3] = &self.k;
        for (i, p) in p[..len].iter_mut().enumerate() {
            *p += dt / 6.0 * (k0[i] + 2.0 * k1[i] + 2.0 * k2[i] + k3[i]);
        }
    }
}

/// Integrates to `t_final` with step `dt`, recording the state at `t = 0`,
/// at every time in `sample_times` (which the step lands on exactly) and at
/// `t_final`. With `record_all` every step is recorded instead.
fn drive(
    init: &MicroState,
    t_final: f64,
    dt: f64,
    sample_times: &[f64],
    record_all: bool,
    params: &ModelParams,
) -> Result<Trajectory> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain(format!(
            "time step must be positive, got {dt}"
        )));
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::Domain(format!(
            "final time must be non-negative, got {t_final}"
        )));
    }
    let mut stops: Vec<f64> = sample_times
        .iter()
        .copied()
        .filter(|&t| t > 0.0 && t < t_final)
        .collect();
    stops.sort_by(f64::total_cmp);
    stops.dedup();
    stops.push(t_final);

    let l = init.l;
    let floor = l * (1.0 - GAP_TOL);
    let mut p = init.positions.clone();
    let mut rk = Rk4::new(p.len());
    let mut out = Trajectory {
        l,
        markers: init.markers.clone(),
        times: vec![0.0],
        positions: vec![p.clone()],
        min_gap_ratio: min_gap_of(&p) / l,
        steps: 0,
    };
    let mut t = 0.0;
    for &stop in &stops {
        while t < stop {
            let last = t + dt >= stop * (1.0 - 1e-14);
            let h = if last { stop - t } else { dt };
            rk.step(l, &mut p, &init.markers, h, params);
            t = if last { stop } else { t + h };
            out.steps += 1;
            let gap = min_gap_of(&p);
            out.min_gap_ratio = out.min_gap_ratio.min(gap / l);
            if gap < floor {
                return Err(Error::StepTooLarge { t, ratio: gap / l });
            }
            if record_all && !last {
                out.times.push(t);
                out.positions.push(p.clone());
            }
        }
        if stop > 0.0 {
            out.times.push(stop);
            out.positions.push(p.clone());
        }
    }
    Ok(out)
}

/// Fixed-step RK4 recording every step.
pub fn integrate(
    init: &MicroState,
    t_final: f64,
    dt: f64,
    params: &ModelParams,
) -> Result<Trajectory> {
    drive(init, t_final, dt, &[], true, params)
}

/// Fixed-step RK4 recording only `t = 0`, the requested times and `t_final`.
pub fn integrate_sampled(
    init: &MicroState,
    t_final: f64,
    dt: f64,
    sample_times: &[f64],
    params: &ModelParams,
) -> Result<Trajectory> {
    drive(init, t_final, dt, sample_times, false, params)
}

/// [`integrate_sampled`], retried with half the step whenever the gap check
/// fails.
pub fn integrate_with_halving(
    init: &MicroState,
    t_final: f64,
    dt: f64,
    sample_times: &[f64],
    params: &ModelParams,
) -> Result<Trajectory> {
    let mut dt = dt;
    let mut attempt = 0;
    loop {
        match integrate_sampled(init, t_final, dt, sample_times, params) {
            Err(Error::StepTooLarge { .. }) if attempt < MAX_HALVINGS => {
                dt *= 0.5;
                attempt += 1;
            }
            other => return other,
        }
    }
}
