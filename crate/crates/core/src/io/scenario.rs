//! Scenario files. Every scenario names its `kind` and either embeds the
//! parameter keys or points at a parameter file with `params = FILE`.
//!
//! ```text
//! kind = godunov
//! params = reference.params
//! domain = -1, 1
//! N = 400
//! t_final = 0.25
//! snapshot_times = 0.1, 0.2
//! ghost = outflow
//! initial = -1 0.9 1.0; 0 0.8 1.5     # x_start rho w; ...
//! ```

use std::path::Path;

use super::fields::{count, counts, fixed, number, numbers, triples, Fields};
use super::params::{parse_params, parse_params_unchecked, read_params};
use super::{ParseError, ParseErrors};
use crate::godunov::{Ghost, Piece};
use crate::micro_macro::MacroDatum;
use crate::model::{ModelParams, TrafficState};

#[derive(Debug, Clone)]
pub struct Scenario {
    pub params: ModelParams,
    pub kind: ScenarioKind,
}

#[derive(Debug, Clone)]
pub enum ScenarioKind {
    Validate,
    Riemann(RiemannSpec),
    Godunov(GodunovSpec),
    Ftl(FtlSpec),
    Converge(ConvergeSpec),
    FundamentalDiagram { rho_count: usize, w_count: usize },
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Validate => "validate",
            ScenarioKind::Riemann(_) => "riemann",
            ScenarioKind::Godunov(_) => "godunov",
            ScenarioKind::Ftl(_) => "ftl",
            ScenarioKind::Converge(_) => "converge",
            ScenarioKind::FundamentalDiagram { .. } => "fd",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiemannSpec {
    pub left: TrafficState,
    pub right: TrafficState,
    /// Sampling window in `xi = x / t`; `None` means
    /// `[min wave speed - 1, V_max + 1]`.
    pub xi_range: Option<(f64, f64)>,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GodunovSpec {
    pub domain: (f64, f64),
    pub cells: usize,
    pub t_final: f64,
    pub snapshot_times: Vec<f64>,
    pub ghost: Ghost,
    pub cfl: f64,
    pub initial: Vec<Piece>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FtlSource {
    Cars {
        l: f64,
        positions: Vec<f64>,
        markers: Vec<f64>,
    },
    Datum {
        datum: MacroDatum,
        n: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FtlSpec {
    pub source: FtlSource,
    pub t_final: f64,
    pub dt: Option<f64>,
    pub output_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeSpec {
    pub datum: MacroDatum,
    pub t_final: f64,
    pub n_list: Vec<usize>,
    pub godunov_cells: usize,
    pub time_panels: usize,
}

fn positive(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be positive, got {v}"))
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("must be non-negative, got {v}"))
    }
}

fn at_least(min: usize) -> impl Fn(&str) -> Result<usize, String> {
    move |s| {
        let v = count(s)?;
        if v >= min {
            Ok(v)
        } else {
            Err(format!("must be at least {min}, got {v}"))
        }
    }
}

fn state(s: &str) -> Result<TrafficState, String> {
    let [rho, w] = fixed::<2>(s)?;
    Ok(TrafficState::new(rho, w))
}

fn pieces(s: &str) -> Result<Vec<Piece>, String> {
    let t = triples(s)?;
    if t.is_empty() {
        return Err("no pieces given".into());
    }
    let pieces: Vec<Piece> = t
        .into_iter()
        .map(|[x_start, rho, w]| Piece { x_start, rho, w })
        .collect();
    if pieces.windows(2).any(|p| p[1].x_start <= p[0].x_start) {
        return Err("piece starts must be strictly increasing".into());
    }
    Ok(pieces)
}

fn times(s: &str) -> Result<Vec<f64>, String> {
    let v = numbers(s)?;
    if let Some(t) = v.iter().find(|&&t| t < 0.0) {
        return Err(format!("negative time {t}"));
    }
    Ok(v)
}

fn check_states<'a>(
    fields: &mut Fields<'a>,
    key: &str,
    params: &ModelParams,
    states: &[TrafficState],
) {
    for s in states {
        if let Err(e) = params.check_state(*s) {
            let line = fields.line_of(key);
            fields.error(line, format!("`{key}`: {e}"));
        }
    }
}

fn datum<'a>(fields: &mut Fields<'a>, params: Option<&ModelParams>) -> Option<MacroDatum> {
    let half = fields.req("L", positive);
    let pieces = fields.req("datum", pieces)?;
    let line = fields.line_of("datum");
    if let Some(p) = params {
        let states: Vec<_> = pieces
            .iter()
            .map(|q| TrafficState::new(q.rho, q.w))
            .collect();
        check_states(fields, "datum", p, &states);
    }
    match MacroDatum::new(half?, pieces) {
        Ok(d) => Some(d),
        Err(e) => {
            fields.error(line, format!("`datum`: {e}"));
            None
        }
    }
}

/// Cars as CSV with header `p,w`, leader last.
pub fn parse_cars(text: &str) -> Result<(Vec<f64>, Vec<f64>), ParseErrors> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| ParseErrors::single(1, e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["p", "w"] {
        return Err(ParseErrors::single(1, "expected header `p,w`"));
    }
    let (mut ps, mut ws, mut errors) = (Vec::new(), Vec::new(), Vec::new());
    for record in reader.records() {
        match record {
            Ok(r) => {
                let line = r.position().map_or(0, |p| p.line() as usize);
                match (number(&r[0]), number(&r[1])) {
                    (Ok(p), Ok(w)) => {
                        ps.push(p);
                        ws.push(w);
                    }
                    (Err(m), _) | (_, Err(m)) => errors.push(ParseError::new(line, m)),
                }
            }
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line() as usize);
                errors.push(ParseError::new(line, e.to_string()));
            }
        }
    }
    if !errors.is_empty() {
        return Err(ParseErrors(errors));
    }
    if ps.len() < 2 {
        return Err(ParseErrors::single(
            0,
            "need at least one follower and a leader",
        ));
    }
    Ok((ps, ws))
}

/// Parses a scenario. File references (`params`, `psi`, `cars`) are
/// resolved against `base`; with `base = None` they are errors.
pub fn parse_scenario(text: &str, base: Option<&Path>) -> Result<Scenario, ParseErrors> {
    parse_scenario_with(text, base, None)
}

/// Like [`parse_scenario`], but with the parameters supplied by the caller;
/// the scenario must then not carry parameter keys of its own.
pub fn parse_scenario_with(
    text: &str,
    base: Option<&Path>,
    given: Option<&ModelParams>,
) -> Result<Scenario, ParseErrors> {
    let mut fields = Fields::parse(text);
    let kind = fields.req("kind", |s| match s {
        "validate" | "riemann" | "godunov" | "ftl" | "converge" | "fd" => Ok(s.to_string()),
        other => Err(format!(
            "unknown kind `{other}` (expected validate, riemann, godunov, ftl, converge or fd)"
        )),
    });
    let check = kind.as_deref() != Some("validate");
    let params = if let Some(p) = given {
        for k in ["params", "R", "w_min", "w_max", "v_max", "psi"] {
            if fields.has(k) {
                let line = fields.line_of(k);
                fields.error(
                    line,
                    format!("`{k}` conflicts with the parameters given separately"),
                );
            }
        }
        if check {
            for v in &p.validate().violations {
                fields.error(0, format!("parameters violate {v}"));
            }
        }
        Some(p.clone())
    } else if fields.has("params") {
        let line = fields.line_of("params");
        let inline = ["R", "w_min", "w_max", "v_max", "psi"]
            .into_iter()
            .filter(|k| fields.has(k))
            .collect::<Vec<_>>();
        if !inline.is_empty() {
            fields.error(
                line,
                format!(
                    "`params` file given together with inline keys {}",
                    inline.join(", ")
                ),
            );
        }
        fields.file("params", base).and_then(|(path, text)| {
            let dir = path.parent().map(Path::to_path_buf);
            let parsed = if check {
                parse_params(&text, dir.as_deref())
            } else {
                parse_params_unchecked(&text, dir.as_deref())
            };
            match parsed {
                Ok(p) => Some(p),
                Err(errs) => {
                    for e in errs.0 {
                        fields.error(line, format!("{}: {e}", path.display()));
                    }
                    None
                }
            }
        })
    } else {
        read_params(&mut fields, base, check)
    };

    let kind = match kind.as_deref() {
        Some("validate") => Some(ScenarioKind::Validate),
        Some("riemann") => riemann(&mut fields, params.as_ref()),
        Some("godunov") => godunov(&mut fields, params.as_ref()),
        Some("ftl") => ftl(&mut fields, params.as_ref(), base),
        Some("converge") => converge(&mut fields, params.as_ref()),
        Some("fd") => {
            let rho_count = fields.req("rho_count", at_least(2));
            let w_count = fields.req("w_count", at_least(2));
            Some(ScenarioKind::FundamentalDiagram {
                rho_count: rho_count.unwrap_or(2),
                w_count: w_count.unwrap_or(2),
            })
        }
        _ => None,
    };
    fields.finish()?;
    Ok(Scenario {
        params: params.expect("no errors recorded"),
        kind: kind.expect("no errors recorded"),
    })
}

fn riemann<'a>(fields: &mut Fields<'a>, params: Option<&ModelParams>) -> Option<ScenarioKind> {
    let left = fields.req("left", state);
    let right = fields.req("right", state);
    let xi_range = fields.opt("xi_range", |s| {
        let [a, b] = fixed::<2>(s)?;
        if a < b {
            Ok((a, b))
        } else {
            Err(format!("empty range [{a}, {b}]"))
        }
    });
    let samples = fields.opt("samples", at_least(2)).unwrap_or(401);
    let (left, right) = (left?, right?);
    if let Some(p) = params {
        check_states(fields, "left", p, &[left]);
        check_states(fields, "right", p, &[right]);
    }
    Some(ScenarioKind::Riemann(RiemannSpec {
        left,
        right,
        xi_range,
        samples,
    }))
}

fn godunov<'a>(fields: &mut Fields<'a>, params: Option<&ModelParams>) -> Option<ScenarioKind> {
    let domain = fields.req("domain", |s| {
        let [a, b] = fixed::<2>(s)?;
        if a < b {
            Ok((a, b))
        } else {
            Err(format!("empty domain [{a}, {b}]"))
        }
    });
    let cells = fields.req("N", at_least(1));
    let t_final = fields.req("t_final", non_negative);
    let snapshot_times = fields.opt("snapshot_times", times).unwrap_or_default();
    let ghost = fields
        .opt("ghost", |s| match s {
            "outflow" => Ok(Ghost::Outflow),
            "periodic" => Ok(Ghost::Periodic),
            other => Err(format!(
                "unknown ghost policy `{other}` (expected outflow or periodic)"
            )),
        })
        .unwrap_or(Ghost::Outflow);
    let cfl = fields
        .opt("cfl", |s| {
            let v = number(s)?;
            if v > 0.0 && v <= 1.0 {
                Ok(v)
            } else {
                Err(format!("must lie in (0, 1], got {v}"))
            }
        })
        .unwrap_or(crate::godunov::DEFAULT_CFL);
    let initial = fields.req("initial", pieces)?;
    if let Some(p) = params {
        let states: Vec<_> = initial
            .iter()
            .map(|q| TrafficState::new(q.rho, q.w))
            .collect();
        check_states(fields, "initial", p, &states);
    }
    Some(ScenarioKind::Godunov(GodunovSpec {
        domain: domain?,
        cells: cells?,
        t_final: t_final?,
        snapshot_times,
        ghost,
        cfl,
        initial,
    }))
}

fn ftl<'a>(
    fields: &mut Fields<'a>,
    params: Option<&ModelParams>,
    base: Option<&Path>,
) -> Option<ScenarioKind> {
    let t_final = fields.req("t_final", non_negative);
    let dt = fields.opt("dt", positive);
    let output_times = fields.opt("output_times", times).unwrap_or_default();
    let source = if fields.has("cars") {
        let line = fields.line_of("cars");
        for k in ["datum", "L", "n"] {
            if fields.has(k) {
                fields.error(
                    fields.line_of(k),
                    format!("`{k}` cannot be combined with `cars`"),
                );
            }
        }
        let l = fields.req("l", positive);
        let cars = fields
            .file("cars", base)
            .and_then(|(path, text)| match parse_cars(&text) {
                Ok(c) => Some(c),
                Err(errs) => {
                    for e in errs.0 {
                        fields.error(line, format!("{}: {e}", path.display()));
                    }
                    None
                }
            });
        let (positions, markers) = cars?;
        Some(FtlSource::Cars {
            l: l?,
            positions,
            markers,
        })
    } else {
        let n = fields.req("n", at_least(2));
        let datum = datum(fields, params);
        Some(FtlSource::Datum {
            datum: datum?,
            n: n?,
        })
    };
    Some(ScenarioKind::Ftl(FtlSpec {
        source: source?,
        t_final: t_final?,
        dt,
        output_times,
    }))
}

fn converge<'a>(fields: &mut Fields<'a>, params: Option<&ModelParams>) -> Option<ScenarioKind> {
    let t_final = fields.req("t_final", positive);
    let n_list = fields.req("n_list", |s| {
        let v = counts(s)?;
        if v.len() < 2 || v.windows(2).any(|p| p[1] <= p[0]) || v[0] < 2 {
            Err("need at least two strictly increasing counts, each at least 2".into())
        } else {
            Ok(v)
        }
    });
    let godunov_cells = fields.opt("godunov_cells", at_least(1)).unwrap_or(4000);
    let time_panels = fields.opt("time_panels", at_least(1)).unwrap_or(64);
    let datum = datum(fields, params);
    Some(ScenarioKind::Converge(ConvergeSpec {
        datum: datum?,
        t_final: t_final?,
        n_list: n_list?,
        godunov_cells,
        time_panels,
    }))
}
