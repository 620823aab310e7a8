//! The spread of a multiset of stalk values.
//!
//! Spread is the scalar disagreement measure everything else is built on:
//! given the values `Y = {x_1, …, x_n}` that arrive at a face along its
//! different attachment paths, the spread is the square root of the trace of
//! their covariance matrix,
//!
//! ```text
//! δ(Y) = sqrt( Σ_i ‖x_i − x̄‖² / d )
//! ```
//!
//! with `d = n − 1` (sample estimator, the default) or `d = n` (population).
//! Under the [`SpreadConvention::MeanTrace`] convention the trace is further
//! divided by `n`, which turns δ into a root-mean deviation instead of a
//! root-total deviation. The two conventions order multisets identically —
//! they differ by the factor `√n` — but the absolute thresholds they produce
//! differ, so the choice is carried explicitly in [`SpreadOptions`] rather
//! than hidden in a global.
//!
//! If all values are bit-for-bit identical the spread is exactly `0.0`, not
//! merely tiny: "zero iff all values are equal" is a postcondition that
//! downstream consistency checks rely on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which functional form of the spread to compute.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpreadConvention {
    /// `sqrt(trace Σ)` — the default.
    #[default]
    Trace,
    /// `sqrt(trace Σ / n)`: the trace is additionally divided by the
    /// multiset size. Equal to [`Self::Trace`] divided by `√n`.
    MeanTrace,
}

/// Divisor used in the covariance trace.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceEstimator {
    /// Divide squared deviations by `n − 1` — the default.
    #[default]
    Sample,
    /// Divide squared deviations by `n`.
    Population,
}

/// Spread configuration, carried by a sheaf and by topology config files.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpreadOptions {
    pub convention: SpreadConvention,
    pub estimator: CovarianceEstimator,
}

/// Spread of a multiset of equal-dimensional values.
///
/// Errors when fewer than two values are supplied or when the values do not
/// all share one dimension. Returns exactly `0.0` when all values are
/// bit-identical.
pub fn spread(values: &[Vec<f64>], options: SpreadOptions) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::SpreadTooFew { got: n });
    }
    let dim = values[0].len();
    for (i, v) in values.iter().enumerate() {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                context: format!("spread value {i}"),
                expected: dim,
                got: v.len(),
            });
        }
    }
    if values.iter().all(|v| v == &values[0]) {
        return Ok(0.0);
    }
    let nf = n as f64;
    let mut mean = vec![0.0; dim];
    for v in values {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= nf;
    }
    let mut ss = 0.0;
    for v in values {
        for (m, x) in mean.iter().zip(v) {
            let d = x - m;
            ss += d * d;
        }
    }
    let divisor = match options.estimator {
        CovarianceEstimator::Sample => nf - 1.0,
        CovarianceEstimator::Population => nf,
    };
    let mut trace = ss / divisor;
    if options.convention == SpreadConvention::MeanTrace {
        trace /= nf;
    }
    Ok(trace.sqrt())
}
