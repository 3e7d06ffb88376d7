// `!(x > 0.0)` is how NaN gets rejected alongside non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod ftl;
pub mod godunov;
pub mod io;
pub mod micro_macro;
pub mod model;
pub mod riemann;
pub mod speed_law;

pub use error::{Error, Result};
pub use model::{ModelParams, Phase, TrafficState};
pub use speed_law::SpeedLaw;
