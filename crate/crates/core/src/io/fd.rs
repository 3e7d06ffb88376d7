use super::table::Table;
use crate::model::{ModelParams, Phase, TrafficState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdPoint {
    pub rho: f64,
    pub w: f64,
    pub v: f64,
    pub flow: f64,
    pub phase: Phase,
}

/// Tensor grid over `[0, R] x [w_min, w_max]`, densities in the outer loop.
/// Grid ends are hit exactly.
pub fn fundamental_diagram(params: &ModelParams, rho_count: usize, w_count: usize) -> Vec<FdPoint> {
    assert!(
        rho_count >= 2 && w_count >= 2,
        "grid needs at least two points per axis"
    );
    let r = params.r();
    let (w0, w1) = (params.w_min(), params.w_max());
    let at = |lo: f64, hi: f64, k: usize, count: usize| {
        if k == count - 1 {
            hi
        } else {
            lo + (hi - lo) * k as f64 / (count - 1) as f64
        }
    };
    let mut out = Vec::with_capacity(rho_count * w_count);
    for i in 0..rho_count {
        let rho = at(0.0, r, i, rho_count);
        for j in 0..w_count {
            let w = at(w0, w1, j, w_count);
            let s = TrafficState::new(rho, w);
            let v = params.speed(s);
            out.push(FdPoint {
                rho,
                w,
                v,
                flow: rho * v,
                phase: params.phase_of(s),
            });
        }
    }
    out
}

pub fn fd_table(points: &[FdPoint]) -> Table {
    let mut t = Table::new(&["rho", "w", "v", "flow", "phase"]);
    for p in points {
        t.push(vec![
            p.rho.into(),
            p.w.into(),
            p.v.into(),
            p.flow.into(),
            p.phase.as_str().into(),
        ]);
    }
    t
}
