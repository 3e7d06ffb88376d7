//! Parameter files:
//!
//! ```text
//! R = 1          # maximal density
//! w_min = 1
//! w_max = 2
//! v_max = 0.8
//! psi = affine   # or a CSV file with columns rho,psi
//! ```

use std::path::Path;

use super::fields::{number, Fields};
use super::{ParseError, ParseErrors};
use crate::model::ModelParams;
use crate::speed_law::SpeedLaw;

/// Parses and checks every model hypothesis; violations become errors.
pub fn parse_params(text: &str, base: Option<&Path>) -> Result<ModelParams, ParseErrors> {
    let mut fields = Fields::parse(text);
    let params = read_params(&mut fields, base, true);
    fields.finish()?;
    Ok(params.expect("no errors recorded"))
}

/// Parses without checking the hypotheses.
pub fn parse_params_unchecked(text: &str, base: Option<&Path>) -> Result<ModelParams, ParseErrors> {
    let mut fields = Fields::parse(text);
    let params = read_params(&mut fields, base, false);
    fields.finish()?;
    Ok(params.expect("no errors recorded"))
}

pub(crate) fn read_params<'a>(
    fields: &mut Fields<'a>,
    base: Option<&Path>,
    check: bool,
) -> Option<ModelParams> {
    let r = fields.opt("R", number);
    let w_min = fields.req("w_min", number);
    let w_max = fields.req("w_max", number);
    let v_max = fields.req("v_max", number);
    let law = match fields.opt("psi", |s| Ok(s.to_string())).as_deref() {
        None | Some("affine") => match r {
            Some(r) => Some(SpeedLaw::affine(r)),
            None => {
                if !fields.has("R") {
                    fields.error(0, "missing required key `R`");
                }
                None
            }
        },
        Some(_) => {
            let line = fields.line_of("psi");
            fields
                .file("psi", base)
                .and_then(|(path, text)| match parse_psi_table(&text) {
                    Ok(law) => {
                        if let Some(r) = r {
                            if law.max_density() != r {
                                fields.error(
                                    line,
                                    format!(
                                        "table {} ends at rho={} but R={r}",
                                        path.display(),
                                        law.max_density()
                                    ),
                                );
                                return None;
                            }
                        }
                        Some(law)
                    }
                    Err(errs) => {
                        for e in errs.0 {
                            fields.error(line, format!("{}: {e}", path.display()));
                        }
                        None
                    }
                })
        }
    };
    let params = ModelParams::new(law?, w_min?, w_max?, v_max?);
    if check {
        let report = params.validate();
        if !report.is_valid() {
            for v in &report.violations {
                fields.error(0, format!("parameters violate {v}"));
            }
            return None;
        }
    }
    Some(params)
}

/// A speed-law table: CSV with header `rho,psi`.
pub fn parse_psi_table(text: &str) -> Result<SpeedLaw, ParseErrors> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| ParseErrors::single(1, e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["rho", "psi"] {
        return Err(ParseErrors::single(1, "expected header `rho,psi`"));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut errors = Vec::new();
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line() as usize);
                errors.push(ParseError::new(line, e.to_string()));
                continue;
            }
        };
        let line = record.position().map_or(0, |p| p.line() as usize);
        match (number(&record[0]), number(&record[1])) {
            (Ok(x), Ok(y)) => {
                xs.push(x);
                ys.push(y);
            }
            (Err(m), _) | (_, Err(m)) => errors.push(ParseError::new(line, m)),
        }
    }
    if !errors.is_empty() {
        return Err(ParseErrors(errors));
    }
    SpeedLaw::from_samples(xs, ys).map_err(|e| ParseErrors::single(0, e.to_string()))
}
