//! Acceptance suite. Each criterion prints one PASS/FAIL line with its
//! measurements and runtime; the process exits non-zero if any fails.

mod common;

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{random_congested, random_state, s, ScalarLwr};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twophase::ftl::{integrate, suggested_dt, MicroState};
use twophase::godunov::{
    cfl_dt, l1_error_rho, run, step, CellField, Ghost, GodunovSetup, Piece, DEFAULT_CFL,
};
use twophase::io::{fundamental_diagram, parse_scenario, ScenarioKind};
use twophase::micro_macro::{convergence_study, StudySetup};
use twophase::riemann::{check_consistency, evaluate, solve, RiemannCase, WaveFan, WaveKind};
use twophase::{ModelParams, Phase, TrafficState};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn reference() -> ModelParams {
    ModelParams::reference()
}

fn rh_residual(p: &ModelParams, l: TrafficState, r: TrafficState, speed: f64) -> f64 {
    let (fl, fr) = (p.flux(l), p.flux(r));
    let du = [r.rho - l.rho, r.eta() - l.eta()];
    (0..2)
        .map(|k| (speed * du[k] - (fr[k] - fl[k])).abs())
        .fold(0.0, f64::max)
}

/// Middle state of a two-wave fan, if any.
fn middle(fan: &WaveFan) -> Option<TrafficState> {
    (fan.waves.len() == 2).then(|| fan.waves[0].right)
}

fn check_fan(p: &ModelParams, fan: &WaveFan) -> Result<(), String> {
    let (l, r) = (fan.left, fan.right);
    let ctx = || format!("left {l}, right {r}");
    let mut prev = l;
    let mut last = f64::NEG_INFINITY;
    for w in &fan.waves {
        ensure(
            w.left == prev && w.speed_lo <= w.speed_hi && last <= w.speed_lo + 1e-12,
            || format!("waves out of order: {}", ctx()),
        )?;
        if w.is_discontinuity() {
            let res = rh_residual(p, w.left, w.right, w.speed_lo);
            ensure(res <= 1e-10, || {
                format!("Rankine-Hugoniot residual {res:e}: {}", ctx())
            })?;
        }
        prev = w.right;
        last = w.speed_hi;
    }
    ensure(prev == r, || {
        format!("fan does not end at the right state: {}", ctx())
    })?;

    let free = |st: TrafficState| (p.speed(st) - p.v_max()).abs() <= 1e-12;
    let congested = |st: TrafficState| (p.speed(st) - st.w * p.psi(st.rho)).abs() <= 1e-12;
    let states: Vec<_> = fan.states().collect();
    match fan.case {
        RiemannCase::FreeFree => {
            ensure(states.iter().all(|&st| free(st)), || {
                format!("F/F fan leaves F: {}", ctx())
            })?;
            ensure(
                fan.waves.iter().all(|w| w.kind == WaveKind::FreeLinear),
                || format!("F/F fan has a nonlinear wave: {}", ctx()),
            )?;
        }
        RiemannCase::CongestedCongested => {
            ensure(states.iter().all(|&st| congested(st)), || {
                format!("C/C fan leaves C: {}", ctx())
            })?;
            if let Some(m) = middle(fan) {
                let e = (m.w * p.psi(m.rho) - p.speed(r)).abs();
                ensure(m.w == l.w && e <= 1e-10, || {
                    format!("C/C middle {m} off by {e:e}: {}", ctx())
                })?;
            }
        }
        RiemannCase::FreeCongested => {
            let m =
                middle(fan).ok_or_else(|| format!("F/C fan without middle state: {}", ctx()))?;
            let e = (m.w * p.psi(m.rho) - p.speed(r)).abs();
            ensure(congested(m) && m.w == l.w && e <= 1e-10, || {
                format!("F/C middle {m} off by {e:e}: {}", ctx())
            })?;
        }
        RiemannCase::CongestedFree => {
            if let Some(m) = middle(fan) {
                let e = (m.w * p.psi(m.rho) - p.v_max()).abs();
                ensure(m.w == l.w && e <= 1e-10, || {
                    format!("C/F middle {m} off by {e:e}: {}", ctx())
                })?;
            }
        }
    }
    Ok(())
}

fn riemann_catalogue() -> Outcome {
    let p = reference();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut counts = [0usize; 4];
    for _ in 0..10_000 {
        let fan = solve(random_state(&mut rng, &p), random_state(&mut rng, &p), &p)
            .map_err(|e| e.to_string())?;
        check_fan(&p, &fan)?;
        counts[fan.case as usize] += 1;
    }
    Ok(format!(
        "10000 fans, cases F/F {} C/C {} C/F {} F/C {}",
        counts[0], counts[1], counts[2], counts[3]
    ))
}

/// A triple and a point for which the hypothesis of (C1) holds: the fan of
/// `(l, m)` lies left of `x_bar` and the fan of `(m, r)` right of it.
/// Random triples almost never qualify (the first fan ends with a wave at
/// `v(m)` or `V_max`, where the second one starts), so they are built: a
/// 1-wave into `m` followed by a pure contact out of it, or one trivial side.
fn c1_triple(
    rng: &mut ChaCha8Rng,
    p: &ModelParams,
) -> Result<(TrafficState, TrafficState, TrafficState, f64), String> {
    let err = |e: twophase::Error| e.to_string();
    match rng.gen_range(0..3) {
        0 => {
            let m = random_congested(rng, p);
            let l = s(rng.gen_range(0.0..=p.r()), m.w);
            let w_r = rng.gen_range(p.w_min()..=p.w_max());
            let r = s(p.invert_psi(p.speed(m) / w_r).map_err(err)?, w_r);
            let lo = solve(l, m, p)
                .map_err(err)?
                .waves
                .last()
                .map_or(f64::NEG_INFINITY, |w| w.speed_hi);
            let hi = p.speed(m);
            let x = if lo.is_finite() {
                rng.gen_range(lo..hi)
            } else {
                hi - rng.gen_range(0.0..1.0)
            };
            Ok((l, m, r, x))
        }
        1 => {
            let (m, r) = (random_state(rng, p), random_state(rng, p));
            let hi = solve(m, r, p)
                .map_err(err)?
                .waves
                .first()
                .map_or(0.0, |w| w.speed_lo);
            Ok((m, m, r, hi - rng.gen_range(0.0..1.0)))
        }
        _ => {
            let (l, m) = (random_state(rng, p), random_state(rng, p));
            let lo = solve(l, m, p)
                .map_err(err)?
                .waves
                .last()
                .map_or(0.0, |w| w.speed_hi);
            Ok((l, m, m, lo + rng.gen_range(1e-9..1.0)))
        }
    }
}

fn consistency() -> Outcome {
    let p = reference();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut c1, mut c2) = (0, 0);
    for k in 0..10_000 {
        let (l, mid, r, x_bar) = if k % 2 == 0 {
            // a state of the fan itself: (C2) applies
            let (l, r) = (random_state(&mut rng, &p), random_state(&mut rng, &p));
            let x = rng.gen_range(p.min_wave_speed() - 0.5..p.v_max() + 0.5);
            (
                l,
                evaluate(&solve(l, r, &p).map_err(|e| e.to_string())?, x, &p),
                r,
                x,
            )
        } else {
            c1_triple(&mut rng, &p)?
        };
        let rep = check_consistency(l, mid, r, &p, x_bar).map_err(|e| e.to_string())?;
        ensure(rep.c1 && rep.c2, || {
            format!("{rep:?} for {l}, {mid}, {r} at x = {x_bar}")
        })?;
        ensure(k % 2 == 0 || rep.c1_applies, || {
            format!("(C1) does not apply to {l}, {mid}, {r} at x = {x_bar}")
        })?;
        c1 += rep.c1_applies as usize;
        c2 += rep.c2_applies as usize;
    }
    ensure(c2 >= 5000, || format!("(C2) applied to only {c2} triples"))?;
    Ok(format!(
        "10000 triples, zero failures; (C1) applied {c1} times, (C2) {c2} times"
    ))
}

fn qualitative() -> Outcome {
    let p = reference();
    let grid: Vec<TrafficState> = (0..=40)
        .flat_map(|i| (0..=20).map(move |j| s(i as f64 / 40.0, 1.0 + j as f64 / 20.0)))
        .collect();
    for &st in &grid {
        let v = p.speed(st);
        ensure((0.0..=p.v_max()).contains(&v), || {
            format!("speed {v} at {st}")
        })?;
        ensure((v == 0.0) == (st.rho == p.r()), || {
            format!("v = 0 does not match rho = R at {st}")
        })?;
    }
    let mut waves = 0;
    for &l in &grid {
        for &r in &grid {
            for w in solve(l, r, &p).map_err(|e| e.to_string())?.waves {
                let bound = p.speed(w.right) + 1e-10;
                ensure(w.speed_hi <= bound, || {
                    format!("wave {w:?} faster than its right state")
                })?;
                waves += 1;
            }
        }
    }
    Ok(format!(
        "{} grid states, {} pairs, {waves} waves",
        grid.len(),
        grid.len() * grid.len()
    ))
}

fn riemann_error(
    cells: usize,
    l: TrafficState,
    r: TrafficState,
    p: &ModelParams,
) -> Result<f64, String> {
    let t = 0.25;
    let pieces = [
        Piece {
            x_start: -1.0,
            rho: l.rho,
            w: l.w,
        },
        Piece {
            x_start: 0.0,
            rho: r.rho,
            w: r.w,
        },
    ];
    let setup = GodunovSetup {
        initial: CellField::from_pieces(-1.0, 1.0, cells, &pieces, Ghost::Outflow),
        t_final: t,
        snapshot_times: vec![],
        cfl: DEFAULT_CFL,
    };
    let out = run(&setup, p).map_err(|e| e.to_string())?;
    let fan = solve(l, r, p).map_err(|e| e.to_string())?;
    Ok(l1_error_rho(
        out.final_field(),
        |x| evaluate(&fan, x / t, p).rho,
        16,
    ))
}

fn godunov_correctness() -> Outcome {
    let p = reference();
    let mut lines = vec![];
    for (l, r) in [
        (s(0.1, 1.5), s(0.3, 1.2)),
        (s(0.9, 1.0), s(0.8, 1.5)),
        (s(0.2, 1.6), s(0.9, 1.2)),
        (s(0.9, 1.0), s(0.3, 1.6)),
    ] {
        let errs = [100, 200, 400, 800]
            .iter()
            .map(|&n| riemann_error(n, l, r, &p))
            .collect::<Result<Vec<_>, _>>()?;
        ensure(
            errs.windows(2).all(|e| e[1] < e[0]) && errs[3] <= 0.5 * errs[0],
            || format!("{l} | {r}: errors {errs:?}"),
        )?;
        lines.push(format!("{:.2e}->{:.2e}", errs[0], errs[3]));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let states: Vec<_> = (0..200).map(|_| random_state(&mut rng, &p)).collect();
    let mut f = CellField::from_states(0.0, 1.0, &states, Ghost::Periodic);
    let before = f.totals();
    for _ in 0..10_000 {
        f = step(&f, cfl_dt(&f, &p, DEFAULT_CFL), &p).map_err(|e| e.to_string())?;
    }
    let after = f.totals();
    let drift = (0..2)
        .map(|c| ((after[c] - before[c]) / before[c]).abs())
        .fold(0.0, f64::max);
    ensure(drift <= 1e-12, || format!("periodic drift {drift:e}"))?;
    Ok(format!(
        "L1 at N=100->800: {}; periodic drift {drift:.1e} over 10000 steps",
        lines.join(", ")
    ))
}

fn lwr_reduction() -> Outcome {
    let w = 1.5;
    let p = reference().with_marker_range(w, w);
    let lwr = ScalarLwr::new(w, p.v_max(), p.r(), |rho| 1.0 - rho);
    let piece = |x_start, rho| Piece { x_start, rho, w };
    let scenarios = [
        vec![piece(-1.0, 0.2), piece(-0.3, 0.9), piece(0.4, 0.05)],
        vec![piece(-1.0, 0.95), piece(0.0, 0.1)],
        vec![
            piece(-1.0, 0.0),
            piece(-0.5, 0.6),
            piece(0.2, 1.0),
            piece(0.5, 0.3),
        ],
    ];
    let mut worst: f64 = 0.0;
    for (k, pieces) in scenarios.iter().enumerate() {
        let mut field = CellField::from_pieces(-1.0, 1.0, 200, pieces, Ghost::Outflow);
        let mut scalar = field.rho().to_vec();
        let dx = field.dx();
        for n in 0..300 {
            let dt = cfl_dt(&field, &p, DEFAULT_CFL);
            field = step(&field, dt, &p).map_err(|e| e.to_string())?;
            scalar = lwr.step(&scalar, dt, dx);
            for (a, b) in field.rho().iter().zip(&scalar) {
                let d = (a - b).abs();
                ensure(d <= 1e-12, || {
                    format!("scenario {k}, step {n}: difference {d:e}")
                })?;
                worst = worst.max(d);
            }
        }
    }
    Ok(format!(
        "3 scenarios x 300 steps x 200 cells, max difference {worst:.1e}"
    ))
}

fn ftl_well_posed() -> Outcome {
    let p = reference();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_gap = f64::INFINITY;
    let mut cars = 0;
    for k in 0..100 {
        let n = rng.gen_range(1..=200);
        let l = rng.gen_range(0.2..1.0) / n as f64;
        let mut pos = vec![rng.gen_range(-1.0..0.0)];
        for _ in 0..n {
            let gap = if rng.gen_bool(0.25) {
                l
            } else {
                l * (1.0 + 6.0 * rng.gen::<f64>().powi(2))
            };
            pos.push(pos.last().unwrap() + gap);
        }
        let markers: Vec<f64> = (0..=n)
            .map(|_| rng.gen_range(p.w_min()..=p.w_max()))
            .collect();
        let init = MicroState::new(l, pos, markers.clone(), &p).map_err(|e| e.to_string())?;
        let traj =
            integrate(&init, 5.0, suggested_dt(l, &p), &p).map_err(|e| format!("run {k}: {e}"))?;
        let gap = twophase::ftl::min_gap(&traj);
        ensure(gap >= 1.0 - 1e-9, || {
            format!("run {k}: min gap / l = {gap}")
        })?;
        for i in 0..traj.len() {
            let st = traj.state(i);
            ensure(
                st.markers()
                    .iter()
                    .zip(&markers)
                    .all(|(a, b)| a.to_bits() == b.to_bits()),
                || format!("run {k}: markers changed at step {i}"),
            )?;
            let v = traj.velocities(i, &p);
            ensure(v.iter().all(|&v| (0.0..=p.v_max()).contains(&v)), || {
                format!("run {k}: velocity outside [0, V_max] at step {i}")
            })?;
        }
        worst_gap = worst_gap.min(gap);
        cars += n;
    }
    Ok(format!(
        "100 runs, {cars} followers, smallest min gap / l = {worst_gap:.12}"
    ))
}

fn micro_macro_limit() -> Outcome {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/two_phase.converge");
    let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let scenario = parse_scenario(&text, path.parent()).map_err(|e| e.to_string())?;
    let ScenarioKind::Converge(spec) = scenario.kind else {
        return Err("shipped scenario is not a convergence study".into());
    };
    let setup = StudySetup {
        godunov_cells: spec.godunov_cells,
        time_panels: spec.time_panels,
        ..StudySetup::new(spec.datum, spec.t_final, spec.n_list)
    };
    ensure(
        setup.n_list == [50, 100, 200, 400] && setup.godunov_cells == 4000,
        || {
            format!(
                "unexpected shipped study {:?} with {} cells",
                setup.n_list, setup.godunov_cells
            )
        },
    )?;
    let rows = convergence_study(&setup, &scenario.params).map_err(|e| e.to_string())?;
    for pair in rows.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        ensure(
            b.residual_rho <= 1.1 * a.residual_rho && b.residual_eta <= 1.1 * a.residual_eta,
            || format!("residual grows from n={} to n={}: {rows:?}", a.n, b.n),
        )?;
    }
    let (first, last) = (rows[0], rows[rows.len() - 1]);
    let drop = 1.0 - last.l1_to_godunov / first.l1_to_godunov;
    ensure(drop >= 0.3, || {
        format!("L1 distance drops by only {:.0}%", 100.0 * drop)
    })?;
    let residuals: Vec<String> = rows
        .iter()
        .map(|r| format!("{:.2e}", r.residual_rho.max(r.residual_eta)))
        .collect();
    Ok(format!(
        "residuals {}; L1 {:.3e} -> {:.3e} (-{:.0}%)",
        residuals.join(", "),
        first.l1_to_godunov,
        last.l1_to_godunov,
        100.0 * drop
    ))
}

fn fundamental_diagram_shape() -> Outcome {
    let p = reference();
    let points = fundamental_diagram(&p, 101, 41);
    let spread = |pts: Vec<f64>| {
        let (lo, hi) = pts
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                (a.min(v), b.max(v))
            });
        hi - lo
    };
    let mut free_columns = 0;
    let mut worst: f64 = 0.0;
    for k in 0..101 {
        let rho = points[k * 41].rho;
        let free: Vec<f64> = points
            .iter()
            .filter(|pt| pt.rho == rho && pt.phase == Phase::Free)
            .map(|pt| pt.flow)
            .collect();
        if free.len() >= 2 {
            free_columns += 1;
            worst = worst.max(spread(free));
        }
    }
    ensure(free_columns > 10 && worst <= 1e-12, || {
        format!("free wedge spread {worst:e} over {free_columns} columns")
    })?;
    let at = points
        .iter()
        .filter(|pt| pt.rho == 0.6)
        .map(|pt| pt.flow)
        .collect::<Vec<_>>();
    ensure(at.len() == 41, || {
        format!("{} samples at rho = 0.6", at.len())
    })?;
    let wide = spread(at);
    let need = 0.05 * p.r() * p.v_max();
    ensure(wide >= need, || {
        format!("spread {wide} at rho = 0.6 below {need}")
    })?;
    Ok(format!(
        "free wedge spread {worst:.1e} over {free_columns} columns; spread {wide:.3} at rho = 0.6"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        (
            "Riemann catalogue",
            riemann_catalogue,
            Duration::from_secs(10),
        ),
        ("consistency C1/C2", consistency, Duration::from_secs(60)),
        ("qualitative properties", qualitative, Duration::MAX),
        (
            "Godunov correctness",
            godunov_correctness,
            Duration::from_secs(120),
        ),
        ("LWR reduction", lwr_reduction, Duration::MAX),
        (
            "FTL well-posedness",
            ftl_well_posed,
            Duration::from_secs(60),
        ),
        (
            "micro-macro limit",
            micro_macro_limit,
            Duration::from_secs(300),
        ),
        (
            "fundamental diagram",
            fundamental_diagram_shape,
            Duration::MAX,
        ),
    ];
    let mut failed = 0;
    for (k, (name, check, budget)) in criteria.into_iter().enumerate() {
        let clock = Instant::now();
        let outcome = check();
        let took = clock.elapsed();
        let outcome = match outcome {
            Ok(detail) if took >= budget => {
                Err(format!("{detail}; took {took:.1?}, budget {budget:?}"))
            }
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS {}. {name}: {detail} [{took:.2?}]", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {}. {name}: {why} [{took:.2?}]", k + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} of 8 criteria failed");
        ExitCode::FAILURE
    }
}
