#![allow(dead_code)]

use proptest::test_runner::{Config, RngSeed};
use rand::Rng;
use twophase::{ModelParams, TrafficState};

pub const SHIPPED_PARAMS: &str = include_str!("../../../../scenarios/reference.params");
pub const SHIPPED_CONVERGE: &str = include_str!("../../../../scenarios/two_phase.converge");

/// Proptest settings with a fixed seed, so every run draws the same cases.
pub fn seeded(cases: u32) -> Config {
    Config {
        cases,
        rng_seed: RngSeed::Fixed(42),
        failure_persistence: None,
        ..Config::default()
    }
}

pub fn s(rho: f64, w: f64) -> TrafficState {
    TrafficState::new(rho, w)
}

/// Random state of the reference configuration, with extra weight on the
/// special densities 0 and R and on the free/congested boundary.
pub fn random_state<R: Rng>(rng: &mut R, params: &ModelParams) -> TrafficState {
    let w = rng.gen_range(params.w_min()..=params.w_max());
    let rho = match rng.gen_range(0..20) {
        0 => 0.0,
        1 => params.r(),
        2 => params.invert_psi(params.v_max() / w).unwrap(),
        _ => rng.gen_range(0.0..=params.r()),
    };
    s(rho, w)
}

pub fn random_congested<R: Rng>(rng: &mut R, params: &ModelParams) -> TrafficState {
    loop {
        let st = s(
            rng.gen_range(0.0..0.98 * params.r()),
            rng.gen_range(params.w_min()..=params.w_max()),
        );
        if params.phase_of(st) == twophase::Phase::Congested {
            return st;
        }
    }
}

pub fn random_free<R: Rng>(rng: &mut R, params: &ModelParams) -> TrafficState {
    loop {
        let st = s(
            rng.gen_range(0.0..params.r()),
            rng.gen_range(params.w_min()..=params.w_max()),
        );
        if params.phase_of(st) == twophase::Phase::Free {
            return st;
        }
    }
}

/// Scalar LWR Godunov scheme for `rho_t + q(rho)_x = 0` with
/// `q(rho) = rho min{V_max, w psi(rho)}` and one fixed marker `w`. The flux
/// is concave, so the Godunov flux is `min(demand(a), supply(b))`.
pub struct ScalarLwr {
    pub w: f64,
    pub v_max: f64,
    pub psi: Box<dyn Fn(f64) -> f64>,
    pub rho_crit: f64,
}

impl ScalarLwr {
    pub fn new(w: f64, v_max: f64, r: f64, psi: impl Fn(f64) -> f64 + 'static) -> Self {
        let mut lwr = ScalarLwr {
            w,
            v_max,
            psi: Box::new(psi),
            rho_crit: 0.0,
        };
        // golden-section search for the maximizer of the concave flux
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (0.0, r);
        for _ in 0..200 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if lwr.q(c) < lwr.q(d) {
                a = c;
            } else {
                b = d;
            }
        }
        lwr.rho_crit = 0.5 * (a + b);
        lwr
    }

    pub fn q(&self, rho: f64) -> f64 {
        rho * self.v_max.min(self.w * (self.psi)(rho))
    }

    pub fn flux(&self, a: f64, b: f64) -> f64 {
        let demand = self.q(a.min(self.rho_crit));
        let supply = self.q(b.max(self.rho_crit));
        demand.min(supply)
    }

    /// One step with outflow (copy) ghosts.
    pub fn step(&self, rho: &[f64], dt: f64, dx: f64) -> Vec<f64> {
        let n = rho.len();
        let cell = |j: isize| rho[j.clamp(0, n as isize - 1) as usize];
        (0..n as isize)
            .map(|j| {
                let fr = self.flux(cell(j), cell(j + 1));
                let fl = self.flux(cell(j - 1), cell(j));
                cell(j) - dt / dx * (fr - fl)
            })
            .collect()
    }
}

/// Plain RK4 for `p_i' = min{V_max, w (1 - l / (p_{i+1} - p_i))}`, zero
/// when the gap is below `l`, with the leader at `V_max` and one marker for
/// everyone. Written without the library's state types.
pub fn scalar_ftl(
    l: f64,
    w: f64,
    v_max: f64,
    mut p: Vec<f64>,
    steps: impl IntoIterator<Item = f64>,
) -> Vec<f64> {
    let speed = |rho: f64| {
        if rho > 1.0 {
            0.0
        } else {
            v_max.min(w * (1.0 - rho))
        }
    };
    let field = |p: &[f64]| -> Vec<f64> {
        let n = p.len();
        (0..n)
            .map(|i| {
                if i + 1 == n {
                    v_max
                } else {
                    speed(l / (p[i + 1] - p[i]))
                }
            })
            .collect()
    };
    let axpy = |p: &[f64], k: &[f64], h: f64| -> Vec<f64> {
        p.iter().zip(k).map(|(a, b)| a + h * b).collect()
    };
    for dt in steps {
        let k1 = field(&p);
        let k2 = field(&axpy(&p, &k1, 0.5 * dt));
        let k3 = field(&axpy(&p, &k2, 0.5 * dt));
        let k4 = field(&axpy(&p, &k3, dt));
        for i in 0..p.len() {
            p[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    p
}

/// A generic Lax solver for 2x2 systems `u_t + f(u)_x = 0` in conserved
/// variables `u = (rho, eta)`. Eigen-structure comes from a finite-difference
/// Jacobian; wave curves are integrated numerically along eigenvectors, and
/// shock curves solve the Rankine-Hugoniot condition directly.
pub struct LaxOracle {
    pub flux: Box<dyn Fn([f64; 2]) -> [f64; 2]>,
}

pub struct LaxSolution {
    pub middle: [f64; 2],
    /// Speeds of the first wave (equal for a shock) and of the second.
    pub first: (f64, f64),
    pub second: f64,
}

impl LaxOracle {
    /// Flux of the congested system, `v = (eta / rho) psi(rho)` with no speed
    /// bound.
    pub fn congested(params: &ModelParams) -> Self {
        let p = params.clone();
        LaxOracle {
            flux: Box::new(move |[rho, eta]| {
                let v = if rho > 0.0 {
                    eta / rho * p.psi(rho)
                } else {
                    0.0
                };
                [rho * v, eta * v]
            }),
        }
    }

    fn jacobian(&self, u: [f64; 2]) -> [[f64; 2]; 2] {
        let h = 1e-6;
        let mut j = [[0.0; 2]; 2];
        for k in 0..2 {
            let mut up = u;
            let mut dn = u;
            up[k] += h;
            dn[k] -= h;
            let (fp, fm) = ((self.flux)(up), (self.flux)(dn));
            for i in 0..2 {
                j[i][k] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        j
    }

    /// Eigenvalues in increasing order.
    pub fn eigenvalues(&self, u: [f64; 2]) -> [f64; 2] {
        let j = self.jacobian(u);
        let tr = j[0][0] + j[1][1];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
        [0.5 * tr - disc, 0.5 * tr + disc]
    }

    /// Slope `d eta / d rho` of the `family`-th eigenvector.
    fn slope(&self, u: [f64; 2], family: usize) -> f64 {
        let j = self.jacobian(u);
        let lambda = self.eigenvalues(u)[family];
        (lambda - j[0][0]) / j[0][1]
    }

    /// Integral curve of `family` from `u` to density `rho`, by RK4.
    pub fn integral_curve(&self, u: [f64; 2], family: usize, rho: f64) -> [f64; 2] {
        let steps = 400;
        let h = (rho - u[0]) / steps as f64;
        let mut cur = u;
        for _ in 0..steps {
            let k1 = self.slope(cur, family);
            let k2 = self.slope([cur[0] + 0.5 * h, cur[1] + 0.5 * h * k1], family);
            let k3 = self.slope([cur[0] + 0.5 * h, cur[1] + 0.5 * h * k2], family);
            let k4 = self.slope([cur[0] + h, cur[1] + h * k3], family);
            cur = [
                cur[0] + h,
                cur[1] + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4),
            ];
        }
        cur
    }

    /// Point of the Hugoniot locus through `u` at density `rho`, on the
    /// branch tangent to `family`, and the shock speed.
    pub fn hugoniot(&self, u: [f64; 2], family: usize, rho: f64) -> ([f64; 2], f64) {
        let fu = (self.flux)(u);
        let g = |eta: f64| {
            let f = (self.flux)([rho, eta]);
            (f[0] - fu[0]) * (eta - u[1]) - (f[1] - fu[1]) * (rho - u[0])
        };
        // start on the integral curve and refine with secant iterations
        let mut a = self.integral_curve(u, family, rho)[1];
        let mut b = a * (1.0 + 1e-6) + 1e-9;
        for _ in 0..100 {
            let (ga, gb) = (g(a), g(b));
            if gb == ga {
                break;
            }
            let c = b - gb * (b - a) / (gb - ga);
            a = b;
            b = c;
            if (b - a).abs() < 1e-15 {
                break;
            }
        }
        let f = (self.flux)([rho, b]);
        let speed = (f[0] - fu[0]) / (rho - u[0]);
        ([rho, b], speed)
    }

    /// Left state joined by a first-family wave to the middle, then a
    /// second-family wave to the right. The middle density is found by
    /// bisection on where the first-family curve from the left crosses the
    /// second-family curve through the right state.
    pub fn solve(&self, left: [f64; 2], right: [f64; 2], rho_max: f64) -> LaxSolution {
        let lambda_l = self.eigenvalues(left)[0];
        let first_curve = |rho: f64| -> [f64; 2] {
            if (rho - left[0]).abs() < 1e-14 {
                return left;
            }
            let raref = self.integral_curve(left, 0, rho);
            if self.eigenvalues(raref)[0] >= lambda_l {
                raref
            } else {
                self.hugoniot(left, 0, rho).0
            }
        };
        let gap = |rho: f64| first_curve(rho)[1] - self.integral_curve(right, 1, rho)[1];
        // the curves are only accurate to ~1e-10, so stay where the gap is
        // well above that; middle densities are never this small
        let (mut lo, mut hi) = (1e-4 * rho_max, rho_max * (1.0 - 1e-9));
        let glo = gap(lo);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if (gap(mid) > 0.0) == (glo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let middle = first_curve(0.5 * (lo + hi));
        let lambda_m = self.eigenvalues(middle)[0];
        let first = if lambda_m >= lambda_l {
            (lambda_l, lambda_m)
        } else {
            let sp = self.hugoniot(left, 0, middle[0]).1;
            (sp, sp)
        };
        LaxSolution {
            middle,
            first,
            second: self.eigenvalues(middle)[1],
        }
    }
}

/// Total variation of `rho` sampled on a grid.
pub fn total_variation(values: &[f64]) -> f64 {
    values.windows(2).map(|p| (p[1] - p[0]).abs()).sum()
}
