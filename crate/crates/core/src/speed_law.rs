//! Speed laws `psi: [0, R] -> [0, 1]`.
//!
//! The built-in law is the affine one, `psi(rho) = 1 - rho / R`. Anything
//! else is supplied as a table of samples and evaluated with a monotone
//! piecewise-cubic Hermite interpolant, so a monotone table yields a
//! monotone law and a constant run of samples yields an exact plateau.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum SpeedLaw {
    Affine { r: f64 },
    Table(MonotoneCubic),
}

impl SpeedLaw {
    pub fn affine(r: f64) -> Self {
        SpeedLaw::Affine { r }
    }

    /// Builds a tabulated law from `(rho, psi)` samples. Abscissae must be
    /// strictly increasing and start at zero; the last one is taken as `R`.
    pub fn from_samples(rho: Vec<f64>, psi: Vec<f64>) -> Result<Self> {
        MonotoneCubic::new(rho, psi).map(SpeedLaw::Table)
    }

    pub fn max_density(&self) -> f64 {
        match self {
            SpeedLaw::Affine { r } => *r,
            SpeedLaw::Table(t) => *t.xs.last().expect("non-empty table"),
        }
    }

    pub fn psi(&self, rho: f64) -> f64 {
        match self {
            SpeedLaw::Affine { r } => 1.0 - rho / r,
            SpeedLaw::Table(t) => t.value(rho),
        }
    }

    pub fn dpsi(&self, rho: f64) -> f64 {
        match self {
            SpeedLaw::Affine { r } => -1.0 / r,
            SpeedLaw::Table(t) => t.derivative(rho),
        }
    }

    /// Derivative of the flow `rho * psi(rho)`.
    pub fn dflow(&self, rho: f64) -> f64 {
        self.psi(rho) + rho * self.dpsi(rho)
    }

    /// Same law expressed on `[0, r_new]`, i.e. `psi_new(s) = psi(s * R / r_new)`.
    pub fn rescaled(&self, r_new: f64) -> Self {
        match self {
            SpeedLaw::Affine { .. } => SpeedLaw::Affine { r: r_new },
            SpeedLaw::Table(t) => {
                let scale = r_new / self.max_density();
                let xs = t.xs.iter().map(|x| x * scale).collect();
                let slopes = t.slopes.iter().map(|m| m / scale).collect();
                SpeedLaw::Table(MonotoneCubic {
                    xs,
                    ys: t.ys.clone(),
                    slopes,
                })
            }
        }
    }
}

/// Piecewise-cubic Hermite interpolant with Fritsch–Carlson style slopes
/// (the PCHIP construction). Outside the knot range the end values are held.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::Domain(format!(
                "speed-law table has {} abscissae but {} values",
                xs.len(),
                ys.len()
            )));
        }
        if xs.len() < 2 {
            return Err(Error::Domain(
                "speed-law table needs at least two rows".into(),
            ));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::Domain(
                "speed-law table contains a non-finite value".into(),
            ));
        }
        if xs[0] != 0.0 {
            return Err(Error::Domain(format!(
                "speed-law table must start at rho=0, found {}",
                xs[0]
            )));
        }
        if xs.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::Domain(
                "speed-law table abscissae must be strictly increasing".into(),
            ));
        }
        let slopes = pchip_slopes(&xs, &ys);
        Ok(MonotoneCubic { xs, ys, slopes })
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.xs, &self.ys)
    }

    fn locate(&self, x: f64) -> usize {
        // index k with xs[k] <= x < xs[k+1], clamped to the last interval
        let k = self.xs.partition_point(|&xk| xk <= x);
        k.saturating_sub(1).min(self.xs.len() - 2)
    }

    pub fn value(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let k = self.locate(x);
        if self.ys[k] == self.ys[k + 1] && self.slopes[k] == 0.0 && self.slopes[k + 1] == 0.0 {
            return self.ys[k];
        }
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let (h00, h10, h01, h11) = hermite_basis(t);
        h00 * self.ys[k]
            + h10 * h * self.slopes[k]
            + h01 * self.ys[k + 1]
            + h11 * h * self.slopes[k + 1]
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x < self.xs[0] || x > self.xs[n - 1] {
            return 0.0;
        }
        let k = self.locate(x);
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let d00 = 6.0 * t * t - 6.0 * t;
        let d10 = 3.0 * t * t - 4.0 * t + 1.0;
        let d01 = -d00;
        let d11 = 3.0 * t * t - 2.0 * t;
        (d00 * self.ys[k] + d01 * self.ys[k + 1]) / h
            + d10 * self.slopes[k]
            + d11 * self.slopes[k + 1]
    }
}

fn hermite_basis(t: f64) -> (f64, f64, f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    (
        2.0 * t3 - 3.0 * t2 + 1.0,
        t3 - 2.0 * t2 + t,
        -2.0 * t3 + 3.0 * t2,
        t3 - t2,
    )
}

fn pchip_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let h: Vec<f64> = xs.windows(2).map(|p| p[1] - p[0]).collect();
    let d: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / h[k]).collect();
    if n == 2 {
        return vec![d[0], d[0]];
    }
    let mut m = vec![0.0; n];
    for k in 1..n - 1 {
        if d[k - 1] * d[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            m[k] = (w1 + w2) / (w1 / d[k - 1] + w2 / d[k]);
        }
    }
    m[0] = end_slope(h[0], h[1], d[0], d[1]);
    m[n - 1] = end_slope(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
    m
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m.signum() != d0.signum() || d0 == 0.0 {
        0.0
    } else if d0.signum() != d1.signum() && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}
