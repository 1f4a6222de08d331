//! Pick-freeze estimators of closed Sobol indices.
//!
//! All four estimators are ratios of empirical (1/N) moments. `S`, `T` and the
//! full-information variant are translation invariant; they are evaluated on
//! data shifted by the empirical mean of `y`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{Design, PickFreezeSample};
use crate::special::mean;

/// Relative threshold below which an empirical variance is treated as zero.
pub const DEGENERATE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimatorKind {
    /// Covariance ratio using only `(Y, Y^u)`.
    S,
    /// Pooled first and second moments over all replications.
    T,
    /// Pooled mean in the numerator too.
    FullInfo,
    /// Uncentered ratio for centered outputs, `k = 1`.
    TildeS,
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::S => "S",
            Self::T => "T",
            Self::FullInfo => "full",
            Self::TildeS => "tilde",
        })
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "S" | "s" => Ok(Self::S),
            "T" | "t" => Ok(Self::T),
            "full" | "full-info" => Ok(Self::FullInfo),
            "tilde" | "tilde-S" => Ok(Self::TildeS),
            other => Err(Error::Config(format!("unknown estimator `{other}`"))),
        }
    }
}

/// Point estimates of the closed indices of a design.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexEstimate {
    pub values: Vec<f64>,
    pub estimator: EstimatorKind,
    pub n: usize,
    pub design: Design,
}

/// How the centered-case estimator removes the output mean.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum MeanMode {
    Known(f64),
    #[default]
    Estimated,
}

/// Per-row pooled moments `Z_i` and `M_i` over `(Y_i, Y_i^{u_1}, ..., Y_i^{u_k})`.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledStats {
    pub z: Vec<f64>,
    pub m: Vec<f64>,
}

impl PooledStats {
    pub fn from_sample(sample: &PickFreezeSample) -> Self {
        Self::from_columns(sample.y(), sample.columns(), 0.0)
    }

    pub(crate) fn from_columns(y: &[f64], cols: &[Vec<f64>], shift: f64) -> Self {
        let k1 = (cols.len() + 1) as f64;
        let (z, m) = (0..y.len())
            .map(|i| {
                let y0 = y[i] - shift;
                let (s, q) = cols.iter().fold((y0, y0 * y0), |(s, q), c| {
                    let v = c[i] - shift;
                    (s + v, q + v * v)
                });
                (s / k1, q / k1)
            })
            .unzip();
        Self { z, m }
    }
}

pub(crate) fn check_variance(var: f64, second_moment: f64, what: &str) -> Result<()> {
    if !(var > DEGENERATE_RTOL * second_moment) || !var.is_finite() {
        Err(Error::Degenerate(format!(
            "{what} has empirical variance {var:e}; the output looks constant"
        )))
    } else {
        Ok(())
    }
}

fn shifted(x: &[f64], c: f64) -> Vec<f64> {
    x.iter().map(|v| v - c).collect()
}

fn dot_mean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64
}

fn estimate(sample: &PickFreezeSample, estimator: EstimatorKind, values: Vec<f64>) -> IndexEstimate {
    IndexEstimate {
        values,
        estimator,
        n: sample.n(),
        design: sample.design().clone(),
    }
}

/// `S_N`: `(mean(y y_u) - mean(y) mean(y_u)) / (mean(y^2) - mean(y)^2)` per subset.
pub fn estimate_s(sample: &PickFreezeSample) -> Result<IndexEstimate> {
    let c = mean(sample.y());
    let y = shifted(sample.y(), c);
    let ybar = mean(&y);
    let second = dot_mean(&y, &y);
    let var = second - ybar * ybar;
    check_variance(var, second, "y")?;
    let values = sample
        .columns()
        .iter()
        .map(|col| {
            let yu = shifted(col, c);
            (dot_mean(&y, &yu) - ybar * mean(&yu)) / var
        })
        .collect();
    Ok(estimate(sample, EstimatorKind::S, values))
}

/// Pooled denominator, centered `y`, centered columns and the pooled mean.
type PooledParts = (f64, Vec<f64>, Vec<Vec<f64>>, f64);

fn pooled_parts(sample: &PickFreezeSample) -> Result<PooledParts> {
    let c = mean(sample.y());
    let y = shifted(sample.y(), c);
    let cols: Vec<Vec<f64>> = sample.columns().iter().map(|col| shifted(col, c)).collect();
    let pooled = PooledStats::from_columns(&y, &cols, 0.0);
    let zbar = mean(&pooled.z);
    let mbar = mean(&pooled.m);
    let den = mbar - zbar * zbar;
    check_variance(den, mbar, "pooled output")?;
    Ok((den, y, cols, zbar))
}

/// `T_N`: pair-mean centering in the numerator, a denominator shared by all subsets.
pub fn estimate_t(sample: &PickFreezeSample) -> Result<IndexEstimate> {
    let (den, y, cols, _) = pooled_parts(sample)?;
    let values = cols
        .iter()
        .map(|yu| {
            let half = y.iter().zip(yu).map(|(a, b)| a + b).sum::<f64>() / (2 * y.len()) as f64;
            (dot_mean(&y, yu) - half * half) / den
        })
        .collect();
    Ok(estimate(sample, EstimatorKind::T, values))
}

/// Uses the pooled mean `mean(Z)` in the numerator as well.
pub fn estimate_full_info(sample: &PickFreezeSample) -> Result<IndexEstimate> {
    let (den, y, cols, zbar) = pooled_parts(sample)?;
    let values = cols.iter().map(|yu| (dot_mean(&y, yu) - zbar * zbar) / den).collect();
    Ok(estimate(sample, EstimatorKind::FullInfo, values))
}

/// `mean(y y_u) / mean(y^2)` after removing the (known or estimated) mean; `k = 1`.
pub fn estimate_tilde_s(sample: &PickFreezeSample, mean_mode: MeanMode) -> Result<IndexEstimate> {
    if sample.k() != 1 {
        return Err(Error::Design(format!(
            "the centered estimator needs exactly one subset, got {}",
            sample.k()
        )));
    }
    let (y, yu) = centered_pair(sample, mean_mode);
    let second = dot_mean(&y, &y);
    if !(second > 0.0) {
        return Err(Error::Degenerate("mean(y^2) is zero after centering".into()));
    }
    Ok(estimate(
        sample,
        EstimatorKind::TildeS,
        vec![dot_mean(&y, &yu) / second],
    ))
}

pub(crate) fn centered_pair(sample: &PickFreezeSample, mean_mode: MeanMode) -> (Vec<f64>, Vec<f64>) {
    let mu = match mean_mode {
        MeanMode::Known(mu) => mu,
        MeanMode::Estimated => mean(sample.y()),
    };
    (shifted(sample.y(), mu), shifted(sample.y_u(0), mu))
}

/// Dispatches on the estimator tag. The centered estimator uses the estimated mean.
pub fn estimate_with(sample: &PickFreezeSample, kind: EstimatorKind) -> Result<IndexEstimate> {
    match kind {
        EstimatorKind::S => estimate_s(sample),
        EstimatorKind::T => estimate_t(sample),
        EstimatorKind::FullInfo => estimate_full_info(sample),
        EstimatorKind::TildeS => estimate_tilde_s(sample, MeanMode::Estimated),
    }
}
