//! Text formats: parameter and scenario files, CSV tables, and the
//! fundamental-diagram sampler that feeds them.

mod fd;
mod fields;
mod params;
mod scenario;
mod table;

use std::fmt;

pub use fd::{fd_table, fundamental_diagram, FdPoint};
pub use params::{parse_params, parse_params_unchecked, parse_psi_table};
pub use scenario::{
    parse_cars, parse_scenario, parse_scenario_with, ConvergeSpec, FtlSource, FtlSpec, GodunovSpec,
    RiemannSpec, Scenario, ScenarioKind,
};
pub use table::{emit_csv, write_csv, Cell, Table};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    /// 1-based line number, or 0 when the error concerns the whole input.
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            message: message.into(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.message)
        } else {
            write!(f, "line {}: {}", self.line, self.message)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParseErrors(pub Vec<ParseError>);

impl ParseErrors {
    pub fn single(line: usize, message: impl Into<String>) -> Self {
        ParseErrors(vec![ParseError::new(line, message)])
    }

    pub fn iter(&self) -> impl Iterator<Item = &ParseError> {
        self.0.iter()
    }
}

impl fmt::Display for ParseErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseErrors {}
