//! Plug-in asymptotic covariances of the `S` and `T` estimators and the
//! resulting normal confidence intervals.
//!
//! Both matrices are computed from the linearized residuals
//! `R_j = Y Y^{u_j} - s_j W` (with `W = Y^2` for `S`, `W = M^u` for `T`), on data
//! shifted by the empirical mean of `y`:
//! `Gamma_{lj} = Cov(R_l, R_j) / Var(Y)^2`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{check_variance, EstimatorKind, IndexEstimate, PooledStats};
use crate::sampling::PickFreezeSample;
use crate::special::{self, mean, norm_quantile};

/// Dense symmetric covariance matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl CovMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Parameter(
                "covariance matrix must be square and non-empty".into(),
            ));
        }
        let entries: Vec<f64> = rows.into_iter().flatten().collect();
        let m = Self { dim, entries };
        m.check()?;
        Ok(m)
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, diag: f64) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = diag;
        }
        Self { dim, entries }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, l: usize, j: usize) -> f64 {
        self.entries[l * self.dim + j]
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    fn check(&self) -> Result<()> {
        for l in 0..self.dim {
            if self.get(l, l) < 0.0 {
                return Err(Error::Domain(format!("negative variance at ({l},{l})")));
            }
            for j in 0..l {
                let (a, b) = (self.get(l, j), self.get(j, l));
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE) {
                    return Err(Error::Parameter(format!("matrix not symmetric at ({l},{j})")));
                }
            }
        }
        Ok(())
    }

    /// `a Gamma a^t` for a linear form `a`.
    pub fn quadratic_form(&self, a: &[f64]) -> f64 {
        let mut acc = 0.0;
        for l in 0..self.dim {
            for j in 0..self.dim {
                acc += a[l] * self.get(l, j) * a[j];
            }
        }
        acc
    }

    /// `A Gamma A^t` for a matrix `A` given by rows.
    pub fn congruence(&self, a: &[Vec<f64>]) -> CovMatrix {
        let d = a.len();
        let mut entries = vec![0.0; d * d];
        for r in 0..d {
            for s in 0..=r {
                let mut acc = 0.0;
                for l in 0..self.dim {
                    for j in 0..self.dim {
                        acc += a[r][l] * self.get(l, j) * a[s][j];
                    }
                }
                entries[r * d + s] = acc;
                entries[s * d + r] = acc;
            }
        }
        CovMatrix { dim: d, entries }
    }

    /// Lower Cholesky factor, `None` if the matrix is not positive definite.
    pub fn cholesky(&self) -> Option<Vec<Vec<f64>>> {
        let m = nalgebra::DMatrix::from_row_slice(self.dim, self.dim, &self.entries);
        let l = nalgebra::Cholesky::new(m)?.l();
        Some(
            (0..self.dim)
                .map(|i| (0..self.dim).map(|j| l[(i, j)]).collect())
                .collect(),
        )
    }
}

fn residual_covariance(residuals: &[Vec<f64>], var_y: f64) -> CovMatrix {
    let k = residuals.len();
    let centered: Vec<Vec<f64>> = residuals
        .iter()
        .map(|r| {
            let m = mean(r);
            r.iter().map(|v| v - m).collect()
        })
        .collect();
    let n = residuals[0].len() as f64;
    let scale = var_y * var_y;
    let mut entries = vec![0.0; k * k];
    for l in 0..k {
        for j in 0..=l {
            let c = centered[l].iter().zip(&centered[j]).map(|(a, b)| a * b).sum::<f64>() / n / scale;
            entries[l * k + j] = c;
            entries[j * k + l] = c;
        }
    }
    CovMatrix { dim: k, entries }
}

fn check_estimate(sample: &PickFreezeSample, est: &IndexEstimate, kind: EstimatorKind) -> Result<()> {
    if est.estimator != kind {
        return Err(Error::Design(format!(
            "expected a {kind} estimate, got {}",
            est.estimator
        )));
    }
    if est.values.len() != sample.k() || est.n != sample.n() || &est.design != sample.design() {
        return Err(Error::Design("estimate does not belong to this sample".into()));
    }
    Ok(())
}

pub(crate) struct Centered {
    pub y: Vec<f64>,
    pub cols: Vec<Vec<f64>>,
    pub var_y: f64,
}

pub(crate) fn centered(sample: &PickFreezeSample) -> Result<Centered> {
    let c = mean(sample.y());
    let y: Vec<f64> = sample.y().iter().map(|v| v - c).collect();
    let cols = sample
        .columns()
        .iter()
        .map(|col| col.iter().map(|v| v - c).collect())
        .collect();
    let var_y = special::var(&y);
    check_variance(
        var_y,
        y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64 + c * c,
        "y",
    )?;
    Ok(Centered { y, cols, var_y })
}

fn products(c: &Centered) -> Vec<Vec<f64>> {
    c.cols
        .iter()
        .map(|col| c.y.iter().zip(col).map(|(a, b)| a * b).collect())
        .collect()
}

/// Plug-in estimate of the asymptotic covariance of `sqrt(N) (S_N - S)`.
pub fn gamma_s(sample: &PickFreezeSample, s_hat: &IndexEstimate) -> Result<CovMatrix> {
    check_estimate(sample, s_hat, EstimatorKind::S)?;
    let c = centered(sample)?;
    let sq: Vec<f64> = c.y.iter().map(|v| v * v).collect();
    let residuals: Vec<Vec<f64>> = products(&c)
        .into_iter()
        .zip(&s_hat.values)
        .map(|(a, s)| a.iter().zip(&sq).map(|(x, q)| x - s * q).collect())
        .collect();
    Ok(residual_covariance(&residuals, c.var_y))
}

/// Plug-in estimate of the asymptotic covariance of `sqrt(N) (T_N - S)`.
pub fn gamma_t(sample: &PickFreezeSample, t_hat: &IndexEstimate) -> Result<CovMatrix> {
    check_estimate(sample, t_hat, EstimatorKind::T)?;
    let c = centered(sample)?;
    let pooled = PooledStats::from_columns(&c.y, &c.cols, 0.0);
    let residuals: Vec<Vec<f64>> = products(&c)
        .into_iter()
        .zip(&t_hat.values)
        .map(|(a, t)| a.iter().zip(&pooled.m).map(|(x, m)| x - t * m).collect())
        .collect();
    Ok(residual_covariance(&residuals, c.var_y))
}

/// Scalar `Gamma_T` for a single subset written with the pair-specific moments
/// `Var(YY^u) - 2 S Cov(YY^u, Y^2) + S^2/2 (Var(Y^2) + Cov(Y^2, (Y^u)^2))`.
///
/// On finite data `Cov(YY^u, Y^2)` and `Var(Y^2)` are the symmetrized empirical
/// moments over `Y` and `Y^u`, which makes the expression coincide with
/// [`gamma_t`] for `k = 1`.
pub fn gamma_t_single(sample: &PickFreezeSample, t_hat: &IndexEstimate) -> Result<f64> {
    check_estimate(sample, t_hat, EstimatorKind::T)?;
    if sample.k() != 1 {
        return Err(Error::Design("single-subset formula needs k = 1".into()));
    }
    let c = centered(sample)?;
    let a: Vec<f64> = products(&c).remove(0);
    let q: Vec<f64> = c.y.iter().map(|v| v * v).collect();
    let qu: Vec<f64> = c.cols[0].iter().map(|v| v * v).collect();
    let cov = special::cov;
    let cov_a_sq = 0.5 * (cov(&a, &q) + cov(&a, &qu));
    let var_sq = 0.5 * (special::var(&q) + special::var(&qu));
    let s = t_hat.values[0];
    let num = special::var(&a) - 2.0 * s * cov_a_sq + 0.5 * s * s * (var_sq + cov(&q, &qu));
    Ok(num / (c.var_y * c.var_y))
}

/// Closed interval `[low, high]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.high - self.low)
    }
}

/// Normal intervals `est_j +- z_{(1+level)/2} sqrt(Gamma_jj / n)`.
pub fn asymptotic_ci(est: &IndexEstimate, gamma: &CovMatrix, level: f64) -> Result<Vec<Interval>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Parameter(format!("level must lie in (0,1), got {level}")));
    }
    if gamma.dim() != est.values.len() {
        return Err(Error::Design(format!(
            "covariance of dimension {} for {} estimates",
            gamma.dim(),
            est.values.len()
        )));
    }
    let z = norm_quantile(0.5 * (1.0 + level))?;
    est.values
        .iter()
        .zip(gamma.diag())
        .map(|(&v, d)| {
            if d < 0.0 || !d.is_finite() {
                return Err(Error::Domain(format!("invalid asymptotic variance {d}")));
            }
            let h = z * (d / est.n as f64).sqrt();
            Ok(Interval {
                low: v - h,
                high: v + h,
            })
        })
        .collect()
}
