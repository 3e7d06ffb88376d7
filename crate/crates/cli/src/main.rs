use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use twophase::ftl::{self, MicroState};
use twophase::godunov::{self, CellField, GodunovSetup};
use twophase::io::{
    emit_csv, fd_table, fundamental_diagram, parse_params, parse_params_unchecked,
    parse_scenario_with, Cell, FtlSource, Scenario, ScenarioKind, Table,
};
use twophase::micro_macro::{self, StudySetup};
use twophase::riemann;
use twophase::{ModelParams, TrafficState};

#[derive(Parser)]
#[command(name = "twophase", version, about = "Two-phase traffic flow solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Parameter file (`R`, `w_min`, `w_max`, `v_max`, `psi`).
    #[arg(long, value_name = "FILE")]
    params: Option<PathBuf>,
    /// Scenario file.
    #[arg(long, value_name = "FILE")]
    scenario: Option<PathBuf>,
    /// Directory for CSV output; created if missing.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Seed for randomized batteries.
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Check the parameter hypotheses.
    Validate(Common),
    /// Solve a Riemann problem exactly and sample the fan.
    Riemann(Common),
    /// Run the Godunov scheme.
    Godunov(Common),
    /// Integrate the Follow-The-Leader system.
    Ftl(Common),
    /// Particle-to-continuum convergence study.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Write zero in the runtime column so repeated runs are byte-identical.
        #[arg(long)]
        no_timing: bool,
    },
    /// Sample the fundamental diagram.
    Fd {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 101)]
        rho_count: usize,
        #[arg(long, default_value_t = 11)]
        w_count: usize,
    },
}

enum Failure {
    /// Bad input: unreadable or invalid parameters and scenarios.
    Invalid(String),
    Runtime(String),
}

impl From<twophase::Error> for Failure {
    fn from(e: twophase::Error) -> Self {
        match e {
            twophase::Error::Parse(p) => Failure::Invalid(p.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate(c) => validate(&c),
        Command::Riemann(c) => riemann_cmd(&c),
        Command::Godunov(c) => godunov_cmd(&c),
        Command::Ftl(c) => ftl_cmd(&c),
        Command::Converge { common, no_timing } => converge_cmd(&common, no_timing),
        Command::Fd {
            common,
            rho_count,
            w_count,
        } => fd_cmd(&common, rho_count, w_count),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::Invalid(format!("cannot read {}: {e}", path.display())))
}

fn dir_of(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

fn invalid(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Invalid(format!("{}:\n{e}", path.display()))
}

fn load_params(path: &Path, checked: bool) -> Result<ModelParams, Failure> {
    let text = read(path)?;
    let dir = dir_of(path);
    let parsed = if checked {
        parse_params(&text, Some(&dir))
    } else {
        parse_params_unchecked(&text, Some(&dir))
    };
    parsed.map_err(|e| invalid(path, e))
}

fn load_scenario(c: &Common, expected: &str) -> Result<Scenario, Failure> {
    let Some(path) = &c.scenario else {
        return Err(Failure::Invalid(format!(
            "`{expected}` needs --scenario FILE"
        )));
    };
    let params = match &c.params {
        Some(p) => Some(load_params(p, expected != "validate")?),
        None => None,
    };
    let text = read(path)?;
    let scenario = parse_scenario_with(&text, Some(&dir_of(path)), params.as_ref())
        .map_err(|e| invalid(path, e))?;
    if scenario.kind.name() != expected {
        return Err(invalid(
            path,
            format!(
                "scenario kind is `{}`, expected `{expected}`",
                scenario.kind.name()
            ),
        ));
    }
    Ok(scenario)
}

fn out_file(c: &Common, name: &str) -> Result<PathBuf, Failure> {
    fs::create_dir_all(&c.out)
        .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", c.out.display())))?;
    Ok(c.out.join(name))
}

fn write(c: &Common, name: &str, table: &Table) -> Outcome {
    let path = out_file(c, name)?;
    let bytes = emit_csv(table, &path)?;
    println!("wrote {} ({bytes} bytes)", path.display());
    Ok(())
}

fn validate(c: &Common) -> Outcome {
    let params = match (&c.params, &c.scenario) {
        (Some(p), _) => load_params(p, false)?,
        (None, Some(_)) => load_scenario(c, "validate")?.params,
        (None, None) => {
            return Err(Failure::Invalid(
                "`validate` needs --params or --scenario".into(),
            ))
        }
    };
    let report = params.validate();
    let crit = params.critical_densities();
    println!("rho_bar = {}", crit.rho_bar);
    println!("rho_star = {}", crit.rho_star);
    println!("capacity_drop = {}", crit.capacity_drop);
    if report.is_valid() {
        println!("all hypotheses hold");
        Ok(())
    } else {
        for v in &report.violations {
            println!("violated {v}");
        }
        Err(Failure::Invalid(format!(
            "{} hypothesis violation(s)",
            report.violations.len()
        )))
    }
}

fn state_row(x: f64, s: TrafficState, params: &ModelParams) -> Vec<Cell> {
    vec![
        x.into(),
        s.rho.into(),
        s.w.into(),
        params.speed(s).into(),
        s.eta().into(),
    ]
}

const PROFILE_COLUMNS: [&str; 5] = ["x", "rho", "w", "v", "eta"];

fn riemann_cmd(c: &Common) -> Outcome {
    let scenario = load_scenario(c, "riemann")?;
    let ScenarioKind::Riemann(spec) = &scenario.kind else {
        unreachable!("kind checked on load")
    };
    let params = &scenario.params;
    let fan = riemann::solve(spec.left, spec.right, params)?;
    println!("case: {:?}", fan.case);
    let mut waves = Table::new(&[
        "kind",
        "left_rho",
        "left_w",
        "right_rho",
        "right_w",
        "speed_lo",
        "speed_hi",
    ]);
    for w in &fan.waves {
        println!(
            "  {} from {} to {} at speeds [{}, {}]",
            w.kind, w.left, w.right, w.speed_lo, w.speed_hi
        );
        waves.push(vec![
            w.kind.as_str().into(),
            w.left.rho.into(),
            w.left.w.into(),
            w.right.rho.into(),
            w.right.w.into(),
            w.speed_lo.into(),
            w.speed_hi.into(),
        ]);
    }
    write(c, "waves.csv", &waves)?;

    let (a, b) = spec
        .xi_range
        .unwrap_or((params.min_wave_speed() - 1.0, params.v_max() + 1.0));
    let mut profile = Table::new(&["xi", "rho", "w", "v", "eta"]);
    for k in 0..spec.samples {
        let xi = a + (b - a) * k as f64 / (spec.samples - 1) as f64;
        let s = riemann::evaluate(&fan, xi, params);
        profile.push(state_row(xi, s, params));
    }
    write(c, "profile.csv", &profile)
}

fn godunov_cmd(c: &Common) -> Outcome {
    let scenario = load_scenario(c, "godunov")?;
    let ScenarioKind::Godunov(spec) = &scenario.kind else {
        unreachable!("kind checked on load")
    };
    let params = &scenario.params;
    let (a, b) = spec.domain;
    let setup = GodunovSetup {
        initial: CellField::from_pieces(a, b, spec.cells, &spec.initial, spec.ghost),
        t_final: spec.t_final,
        snapshot_times: spec.snapshot_times.clone(),
        cfl: spec.cfl,
    };
    let run = godunov::run(&setup, params)?;
    let mut index = Table::new(&["snapshot", "t", "file"]);
    for (k, (t, field)) in run.snapshots.iter().enumerate() {
        let name = format!("snapshot_{k:03}.csv");
        let mut table = Table::new(&PROFILE_COLUMNS);
        for (j, s) in field.states().enumerate() {
            table.push(state_row(field.center(j), s, params));
        }
        write(c, &name, &table)?;
        index.push(vec![k.into(), (*t).into(), name.as_str().into()]);
    }
    write(c, "snapshots.csv", &index)?;

    let r = &run.report;
    let mut cons = Table::new(&[
        "quantity",
        "initial",
        "final",
        "boundary_inflow",
        "relative_drift",
    ]);
    for (c_idx, name) in ["rho", "eta"].into_iter().enumerate() {
        cons.push(vec![
            name.into(),
            r.initial[c_idx].into(),
            r.final_totals[c_idx].into(),
            r.boundary_inflow[c_idx].into(),
            r.relative_drift[c_idx].into(),
        ]);
    }
    println!(
        "{} steps; relative drift rho {:e}, eta {:e}",
        r.steps, r.relative_drift[0], r.relative_drift[1]
    );
    write(c, "conservation.csv", &cons)
}

fn ftl_cmd(c: &Common) -> Outcome {
    let scenario = load_scenario(c, "ftl")?;
    let ScenarioKind::Ftl(spec) = &scenario.kind else {
        unreachable!("kind checked on load")
    };
    // a macroscopic datum is discretized in normalized densities
    let (init, params) = match &spec.source {
        FtlSource::Cars {
            l,
            positions,
            markers,
        } => (
            MicroState::new(*l, positions.clone(), markers.clone(), &scenario.params)?,
            scenario.params.clone(),
        ),
        FtlSource::Datum { datum, n } => {
            let params = scenario.params.normalized();
            let datum = datum.normalized(scenario.params.r());
            (micro_macro::discretize(&datum, *n, &params)?, params)
        }
    };
    let times: Vec<f64> = if spec.output_times.is_empty() {
        (0..=10).map(|k| spec.t_final * k as f64 / 10.0).collect()
    } else {
        spec.output_times.clone()
    };
    let dt = spec
        .dt
        .unwrap_or_else(|| ftl::suggested_dt(init.car_length(), &params));
    let traj = ftl::integrate_with_halving(&init, spec.t_final, dt, &times, &params)?;
    let mut table = Table::new(&["t", "i", "p", "w", "v"]);
    for k in 0..traj.len() {
        let t = traj.times()[k];
        if t != 0.0 && t != spec.t_final && !times.contains(&t) {
            continue;
        }
        let v = traj.velocities(k, &params);
        for (i, (&p, &w)) in traj.positions()[k].iter().zip(traj.markers()).enumerate() {
            table.push(vec![
                t.into(),
                (i + 1).into(),
                p.into(),
                w.into(),
                v[i].into(),
            ]);
        }
    }
    println!(
        "{} cars, l = {}, {} steps, min gap / l = {}",
        init.n() + 1,
        init.car_length(),
        traj.steps(),
        ftl::min_gap(&traj)
    );
    write(c, "trajectory.csv", &table)
}

fn converge_cmd(c: &Common, no_timing: bool) -> Outcome {
    let scenario = load_scenario(c, "converge")?;
    let ScenarioKind::Converge(spec) = &scenario.kind else {
        unreachable!("kind checked on load")
    };
    let setup = StudySetup {
        datum: spec.datum.clone(),
        t_final: spec.t_final,
        n_list: spec.n_list.clone(),
        godunov_cells: spec.godunov_cells,
        time_panels: spec.time_panels,
        seed: c.seed,
    };
    let rows = micro_macro::convergence_study(&setup, &scenario.params)?;
    let mut table = Table::new(&[
        "n",
        "l",
        "residual_rho",
        "residual_eta",
        "l1_to_godunov",
        "runtime_s",
    ]);
    for r in &rows {
        println!(
            "n = {:>5}  residual = ({:.3e}, {:.3e})  quadrature ~ {:.1e}  L1 = {:.4e}",
            r.n, r.residual_rho, r.residual_eta, r.quadrature_error, r.l1_to_godunov
        );
        let runtime = if no_timing { 0.0 } else { r.runtime_s };
        table.push(vec![
            r.n.into(),
            r.l.into(),
            r.residual_rho.into(),
            r.residual_eta.into(),
            r.l1_to_godunov.into(),
            runtime.into(),
        ]);
    }
    write(c, "convergence.csv", &table)
}

fn fd_cmd(c: &Common, rho_count: usize, w_count: usize) -> Outcome {
    let (params, rho_count, w_count) = match (&c.scenario, &c.params) {
        (Some(_), _) => {
            let scenario = load_scenario(c, "fd")?;
            let ScenarioKind::FundamentalDiagram { rho_count, w_count } = scenario.kind else {
                unreachable!("kind checked on load")
            };
            (scenario.params, rho_count, w_count)
        }
        (None, Some(p)) => (load_params(p, true)?, rho_count, w_count),
        (None, None) => return Err(Failure::Invalid("`fd` needs --params or --scenario".into())),
    };
    if rho_count < 2 || w_count < 2 {
        return Err(Failure::Invalid(
            "sampling counts must be at least 2".into(),
        ));
    }
    let points = fundamental_diagram(&params, rho_count, w_count);
    write(c, "fd.csv", &fd_table(&points))
}
