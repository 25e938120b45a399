//! Domain types: functions, margins, copulas and sample batches.

mod batch;
mod copula;
mod function;
mod margin;

pub use batch::{Provenance, SampleBatch};
pub use copula::{BoundViolation, CopulaGrid, CopulaSet, CopulaSpec};
pub use function::{FnSpec, FunctionSpec, Scaled};
pub use margin::{EmpiricalMargin, MarginalModel};

use crate::error::{check_unit_open, Result};

/// `G(x, y)` of a pairwise copula, checked for `x, y` in (0, 1).
pub fn copula_cdf(spec: &CopulaSpec, x: f64, y: f64) -> Result<f64> {
    spec.cdf(x, y)
}

/// `inf { x : F(x) >= t }` for `t` in (0, 1).
pub fn quantile_inverse(margin: &MarginalModel, t: f64) -> Result<f64> {
    check_unit_open("t", t)?;
    margin.quantile(t)
}
