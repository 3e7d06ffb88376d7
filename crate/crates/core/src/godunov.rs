//! First-order Godunov scheme with the exact Riemann solver as numerical flux.

use crate::error::{Error, Result};
use crate::model::{ModelParams, TrafficState};
use crate::riemann::{evaluate, solve};

/// Cells with less density than this keep their previous marker.
pub const VACUUM_DENSITY: f64 = 1e-14;

/// Largest excursion outside the invariant domain that is attributed to
/// round-off and clamped; anything larger aborts the run. Densities are
/// compared directly, markers through `eta`, i.e. `rho * dist(w, [w_min, w_max])`.
pub const DOMAIN_SLACK: f64 = 1e-9;

pub const DEFAULT_CFL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ghost {
    /// Ghost cells copy the boundary cells.
    Outflow,
    Periodic,
}

/// One piece of a piecewise-constant datum, extending from `x_start` to the
/// next piece (or to the end of the domain).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub x_start: f64,
    pub rho: f64,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    a: f64,
    b: f64,
    ghost: Ghost,
    rho: Vec<f64>,
    eta: Vec<f64>,
    marker: Vec<f64>,
}

impl CellField {
    pub fn from_states(a: f64, b: f64, states: &[TrafficState], ghost: Ghost) -> Self {
        assert!(b > a && !states.is_empty(), "empty or degenerate mesh");
        CellField {
            a,
            b,
            ghost,
            rho: states.iter().map(|s| s.rho).collect(),
            eta: states.iter().map(|s| s.eta()).collect(),
            marker: states.iter().map(|s| s.w).collect(),
        }
    }

    /// Exact cell averages of a piecewise-constant datum. Points left of the
    /// first piece take the first piece's value.
    pub fn from_pieces(a: f64, b: f64, cells: usize, pieces: &[Piece], ghost: Ghost) -> Self {
        assert!(!pieces.is_empty(), "datum needs at least one piece");
        let dx = (b - a) / cells as f64;
        let mut rho = vec![0.0; cells];
        let mut eta = vec![0.0; cells];
        let mut marker = vec![pieces[0].w; cells];
        for j in 0..cells {
            let (xl, xr) = (a + dx * j as f64, a + dx * (j + 1) as f64);
            let mut heaviest = 0.0;
            let (mut w_lo, mut w_hi) = (f64::INFINITY, f64::NEG_INFINITY);
            let mut rho_hi: f64 = 0.0;
            for (k, p) in pieces.iter().enumerate() {
                let start = if k == 0 { f64::NEG_INFINITY } else { p.x_start };
                let end = pieces.get(k + 1).map_or(f64::INFINITY, |q| q.x_start);
                let overlap = (xr.min(end) - xl.max(start)).max(0.0);
                if overlap > 0.0 {
                    w_lo = w_lo.min(p.w);
                    w_hi = w_hi.max(p.w);
                    rho_hi = rho_hi.max(p.rho);
                    rho[j] += p.rho * overlap;
                    eta[j] += p.rho * p.w * overlap;
                    if overlap > heaviest {
                        heaviest = overlap;
                        marker[j] = p.w;
                    }
                }
            }
            // averages of the overlapping pieces, up to round-off
            rho[j] = (rho[j] / dx).min(rho_hi);
            eta[j] /= dx;
            if rho[j] >= VACUUM_DENSITY {
                marker[j] = (eta[j] / rho[j]).clamp(w_lo, w_hi);
                eta[j] = rho[j] * marker[j];
            }
        }
        CellField {
            a,
            b,
            ghost,
            rho,
            eta,
            marker,
        }
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn ghost(&self) -> Ghost {
        self.ghost
    }

    pub fn dx(&self) -> f64 {
        (self.b - self.a) / self.len() as f64
    }

    pub fn center(&self, j: usize) -> f64 {
        self.a + self.dx() * (j as f64 + 0.5)
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn state(&self, j: usize) -> TrafficState {
        TrafficState::new(self.rho[j], self.marker[j])
    }

    pub fn states(&self) -> impl Iterator<Item = TrafficState> + '_ {
        (0..self.len()).map(|j| self.state(j))
    }

    pub fn totals(&self) -> [f64; 2] {
        let dx = self.dx();
        [
            self.rho.iter().sum::<f64>() * dx,
            self.eta.iter().sum::<f64>() * dx,
        ]
    }

    /// Piecewise-constant value at `x` (cells are `[x_j, x_{j+1})`); zero
    /// density outside the domain.
    pub fn state_at(&self, x: f64) -> Option<TrafficState> {
        if x < self.a || x >= self.b {
            return None;
        }
        let j = (((x - self.a) / self.dx()) as usize).min(self.len() - 1);
        Some(self.state(j))
    }
}

/// Godunov flux `f(u(0))` where `u` is the exact solution of the Riemann
/// problem between `left` and `right`.
pub fn numerical_flux(
    left: TrafficState,
    right: TrafficState,
    params: &ModelParams,
) -> Result<[f64; 2]> {
    let fan = solve(left, right, params)?;
    Ok(params.flux(evaluate(&fan, 0.0, params)))
}

/// `cfl * dx / max(V_max, max_j |lambda_1(cell_j)|)`.
pub fn cfl_dt(field: &CellField, params: &ModelParams, cfl: f64) -> f64 {
    cfl * field.dx() / max_cell_speed(field, params)
}

fn max_cell_speed(field: &CellField, params: &ModelParams) -> f64 {
    field
        .states()
        .map(|s| params.char_speeds(s).0.abs())
        .fold(params.v_max(), f64::max)
}

/// Fluxes through the `len + 1` faces, left to right, and the largest wave
/// speed seen in the interface fans.
fn face_fluxes(field: &CellField, params: &ModelParams) -> Result<(Vec<[f64; 2]>, f64)> {
    let n = field.len();
    let mut fluxes = Vec::with_capacity(n + 1);
    let mut fastest: f64 = 0.0;
    let mut face = |l: TrafficState, r: TrafficState| -> Result<[f64; 2]> {
        if l == r {
            return Ok(params.flux(l));
        }
        let fan = solve(l, r, params)?;
        for w in &fan.waves {
            fastest = fastest.max(w.speed_lo.abs()).max(w.speed_hi.abs());
        }
        Ok(params.flux(evaluate(&fan, 0.0, params)))
    };
    let left_ghost = match field.ghost {
        Ghost::Outflow => field.state(0),
        Ghost::Periodic => field.state(n - 1),
    };
    fluxes.push(face(left_ghost, field.state(0))?);
    for j in 1..n {
        fluxes.push(face(field.state(j - 1), field.state(j))?);
    }
    match field.ghost {
        Ghost::Outflow => fluxes.push(face(field.state(n - 1), field.state(n - 1))?),
        Ghost::Periodic => fluxes.push(fluxes[0]),
    }
    Ok((fluxes, fastest))
}

fn apply(
    field: &CellField,
    fluxes: &[[f64; 2]],
    dt: f64,
    params: &ModelParams,
) -> Result<CellField> {
    let ratio = dt / field.dx();
    let mut next = field.clone();
    let r = params.r();
    for j in 0..field.len() {
        let mut rho = field.rho[j] - ratio * (fluxes[j + 1][0] - fluxes[j][0]);
        let eta = field.eta[j] - ratio * (fluxes[j + 1][1] - fluxes[j][1]);
        if rho < -DOMAIN_SLACK || rho > r + DOMAIN_SLACK {
            return Err(Error::LeftInvariantDomain {
                cell: j,
                rho,
                w: eta / rho,
            });
        }
        rho = rho.clamp(0.0, r);
        let mut w = field.marker[j];
        if rho >= VACUUM_DENSITY {
            w = eta / rho;
            // measured on eta, since w = eta / rho amplifies round-off near vacuum
            let clamped = w.clamp(params.w_min(), params.w_max());
            if rho * (w - clamped).abs() > DOMAIN_SLACK {
                return Err(Error::LeftInvariantDomain { cell: j, rho, w });
            }
            w = clamped;
        }
        next.rho[j] = rho;
        next.eta[j] = eta;
        next.marker[j] = w;
    }
    Ok(next)
}

/// One conservative update `u_j - dt/dx (F_{j+1/2} - F_{j-1/2})`.
pub fn step(field: &CellField, dt: f64, params: &ModelParams) -> Result<CellField> {
    let limit = cfl_dt(field, params, 1.0);
    if !(dt > 0.0 && dt <= limit) {
        return Err(Error::CflViolation { dt, limit });
    }
    let (fluxes, fastest) = face_fluxes(field, params)?;
    if dt * fastest > field.dx() * (1.0 + 1e-12) {
        return Err(Error::CflViolation {
            dt,
            limit: field.dx() / fastest,
        });
    }
    apply(field, &fluxes, dt, params)
}

#[derive(Debug, Clone)]
pub struct GodunovSetup {
    pub initial: CellField,
    pub t_final: f64,
    pub snapshot_times: Vec<f64>,
    pub cfl: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservationReport {
    pub initial: [f64; 2],
    pub final_totals: [f64; 2],
    /// Time-integrated flux entering through the two ends of the domain.
    pub boundary_inflow: [f64; 2],
    /// `(final - initial - inflow) / |initial|` per component (absolute when
    /// the initial total vanishes).
    pub relative_drift: [f64; 2],
    pub steps: usize,
}

#[derive(Debug, Clone)]
pub struct GodunovRun {
    pub snapshots: Vec<(f64, CellField)>,
    pub report: ConservationReport,
}

impl GodunovRun {
    pub fn final_field(&self) -> &CellField {
        &self.snapshots.last().expect("run records the final time").1
    }
}

/// Advances to `t_final`, stopping exactly on every requested snapshot time.
/// The final state is always recorded last.
pub fn run(setup: &GodunovSetup, params: &ModelParams) -> Result<GodunovRun> {
    if !(setup.cfl > 0.0 && setup.cfl <= 1.0) {
        return Err(Error::Domain(format!(
            "cfl must lie in (0,1], got {}",
            setup.cfl
        )));
    }
    if !(setup.t_final >= 0.0) {
        return Err(Error::Domain(format!(
            "t_final must be non-negative, got {}",
            setup.t_final
        )));
    }
    for s in setup.initial.states() {
        params.check_state(s)?;
    }
    let mut stops: Vec<f64> = setup
        .snapshot_times
        .iter()
        .copied()
        .filter(|&t| t >= 0.0 && t < setup.t_final)
        .collect();
    stops.sort_by(f64::total_cmp);
    stops.dedup();
    stops.push(setup.t_final);

    let mut field = setup.initial.clone();
    let initial = field.totals();
    let mut inflow = [0.0; 2];
    let mut snapshots = Vec::with_capacity(stops.len());
    let mut t = 0.0;
    let mut steps = 0;
    for &stop in &stops {
        while t < stop {
            let (fluxes, fastest) = face_fluxes(&field, params)?;
            let speed = max_cell_speed(&field, params).max(fastest);
            let mut dt = setup.cfl * field.dx() / speed;
            let last = t + dt >= stop;
            if last {
                dt = stop - t;
            }
            field = apply(&field, &fluxes, dt, params)?;
            let n = field.len();
            for c in 0..2 {
                inflow[c] += dt * (fluxes[0][c] - fluxes[n][c]);
            }
            t = if last { stop } else { t + dt };
            steps += 1;
        }
        snapshots.push((stop, field.clone()));
    }

    let final_totals = field.totals();
    let mut relative_drift = [0.0; 2];
    for c in 0..2 {
        let scale = if initial[c].abs() > 0.0 {
            initial[c].abs()
        } else {
            1.0
        };
        relative_drift[c] = (final_totals[c] - initial[c] - inflow[c]) / scale;
    }
    Ok(GodunovRun {
        snapshots,
        report: ConservationReport {
            initial,
            final_totals,
            boundary_inflow: inflow,
            relative_drift,
            steps,
        },
    })
}

/// `int |rho_h - rho_exact|` with the exact cell average approximated by
/// `samples` midpoint values per cell.
pub fn l1_error_rho(field: &CellField, exact_rho: impl Fn(f64) -> f64, samples: usize) -> f64 {
    let dx = field.dx();
    let h = dx / samples as f64;
    (0..field.len())
        .map(|j| {
            let x0 = field.domain().0 + dx * j as f64;
            let avg = (0..samples)
                .map(|k| exact_rho(x0 + h * (k as f64 + 0.5)))
                .sum::<f64>()
                / samples as f64;
            (field.rho[j] - avg).abs() * dx
        })
        .sum()
}
