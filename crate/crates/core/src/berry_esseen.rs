//! Finite-sample Berry-Esseen certificate for the centered estimator
//! `mean(Y Y^u) / mean(Y^2)` and the coverage bracket it implies.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{centered_pair, estimate_tilde_s, MeanMode, DEGENERATE_RTOL};
use crate::rng::derive_seed;
use crate::sampling::{generate_pick_freeze, Design, ModelSpec, PickFreezeSample};
use crate::special::{cov, mean, norm_cdf, norm_quantile, var};

/// Berry-Esseen constant for i.i.d. sums.
pub const KAPPA: f64 = 0.42;

/// Rows used for the reference index when none is supplied.
pub const REFERENCE_N: usize = 10_000_000;

/// Replicate intervals scored per sample size in [`coverage_curve`].
pub const COVERAGE_REPS: usize = 500;

/// Plug-in moments entering `B(t)` at one value of `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BEMoments {
    /// Asymptotic variance `Var((Y Y^u - S Y^2) / V)`.
    pub sigma2: f64,
    /// Standardized third absolute moment of `Delta`.
    pub mu3: f64,
    pub nu: f64,
    /// `mean(Y^2)` after centering.
    pub v: f64,
    /// `mean(Y Y^u)` after centering.
    pub c: f64,
    pub s: f64,
    pub t: f64,
    pub n: usize,
}

fn standardized_abs3(x: &[f64]) -> Result<f64> {
    let m = mean(x);
    let v = var(x);
    let scale = x.iter().map(|a| a * a).sum::<f64>() / x.len() as f64;
    if !(v > DEGENERATE_RTOL * scale) {
        return Err(Error::Degenerate(format!("Delta has empirical variance {v:e}")));
    }
    let m3 = x.iter().map(|a| (a - m).abs().powi(3)).sum::<f64>() / x.len() as f64;
    Ok(m3 / v.powf(1.5))
}

/// Empirical third absolute standardized moment; invariant to affine rescaling.
pub fn mu3_of(x: &[f64]) -> Result<f64> {
    standardized_abs3(x)
}

/// Plug-in moments at `t` from a one-subset sample, centered per `mean_mode`.
pub fn be_moments(sample: &PickFreezeSample, t: f64, mean_mode: MeanMode) -> Result<BEMoments> {
    let s = estimate_tilde_s(sample, mean_mode)?.values[0];
    let (y, yu) = centered_pair(sample, mean_mode);
    let n = y.len();
    let nf = n as f64;
    let sq: Vec<f64> = y.iter().map(|a| a * a).collect();
    let prod: Vec<f64> = y.iter().zip(&yu).map(|(a, b)| a * b).collect();
    let v = mean(&sq);
    let c = mean(&prod);
    let lin: Vec<f64> = prod.iter().zip(&sq).map(|(p, q)| (p - s * q) / v).collect();
    let sigma2 = var(&lin);
    let scale = lin.iter().map(|a| a * a).sum::<f64>() / nf + 1.0;
    if !(sigma2 > DEGENERATE_RTOL * scale) {
        return Err(Error::Degenerate(format!(
            "asymptotic variance estimate {sigma2:e}; Y Y^u is proportional to Y^2"
        )));
    }
    let sigma = sigma2.sqrt();
    let shift = t * sigma / nf.sqrt();
    let nu = (shift + 2.0 * s) * var(&sq) - 2.0 * cov(&prod, &sq);
    let delta: Vec<f64> = prod
        .iter()
        .zip(&sq)
        .map(|(p, q)| v / sigma * (p - (s + shift) * q))
        .collect();
    let mu3 = standardized_abs3(&delta)?;
    Ok(BEMoments {
        sigma2,
        mu3,
        nu,
        v,
        c,
        s,
        t,
        n,
    })
}

/// `B(t) = kappa mu3 / sqrt(n) + |Phi(t) - Phi(t / sqrt(1 + t nu / (sigma sqrt(n) V^2)))|`.
pub fn be_bound_b(t: f64, n: usize, m: &BEMoments) -> Result<f64> {
    if n == 0 {
        return Err(Error::Parameter("n must be positive".into()));
    }
    let root_n = (n as f64).sqrt();
    let radicand = 1.0 + t * m.nu / (m.sigma2.sqrt() * root_n * m.v * m.v);
    if !(radicand > 0.0) {
        return Err(Error::Domain(format!(
            "bound unavailable at t = {t}: 1 + t nu / (sigma sqrt(n) V^2) = {radicand}"
        )));
    }
    Ok(KAPPA * m.mu3 / root_n + (norm_cdf(t) - norm_cdf(t / radicand.sqrt())).abs())
}

/// Lower and upper bounds on `P(|S~ - S| <= y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bracket {
    pub y: f64,
    pub z: f64,
    /// `Phi(z) - Phi(-z)`
    pub nominal: f64,
    pub b_plus: f64,
    pub b_minus: f64,
    pub low: f64,
    pub high: f64,
}

/// Bracket from moments evaluated at `t = +z` and `t = -z`, `z = sqrt(n) y / sigma`.
pub fn coverage_bracket(y: f64, n: usize, plus: &BEMoments, minus: &BEMoments) -> Result<Bracket> {
    if !(y > 0.0) {
        return Err(Error::Parameter(format!("y must be positive, got {y}")));
    }
    let z = (n as f64).sqrt() * y / plus.sigma2.sqrt();
    let nominal = norm_cdf(z) - norm_cdf(-z);
    let b_plus = be_bound_b(z, n, plus)?;
    let b_minus = be_bound_b(-z, n, minus)?;
    Ok(Bracket {
        y,
        z,
        nominal,
        b_plus,
        b_minus,
        low: (nominal - b_plus - b_minus).max(0.0),
        high: (nominal + b_plus + b_minus).min(1.0),
    })
}

/// Everything [`coverage_bracket`] needs, estimated from one sample, for the
/// interval of half-width `y = z_{(1+level)/2} sigma / sqrt(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleBracket {
    pub bracket: Bracket,
    pub plus: BEMoments,
    pub minus: BEMoments,
}

pub fn bracket_for_level(sample: &PickFreezeSample, level: f64, mean_mode: MeanMode) -> Result<SampleBracket> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Parameter(format!("level must lie in (0,1), got {level}")));
    }
    let n = sample.n();
    let z = norm_quantile(0.5 * (1.0 + level))?;
    let plus = be_moments(sample, z, mean_mode)?;
    let minus = be_moments(sample, -z, mean_mode)?;
    let y = z * plus.sigma2.sqrt() / (n as f64).sqrt();
    Ok(SampleBracket {
        bracket: coverage_bracket(y, n, &plus, &minus)?,
        plus,
        minus,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverageRow {
    pub n: usize,
    pub low: f64,
    pub high: f64,
    pub empirical_coverage: f64,
    pub coverage_stderr: f64,
    pub mu3: f64,
    pub sigma2: f64,
    pub y: f64,
}

fn interval_covers(sample: &PickFreezeSample, z: f64, mean_mode: MeanMode, reference: f64) -> Result<bool> {
    let m = be_moments(sample, 0.0, mean_mode)?;
    let half = z * m.sigma2.sqrt() / (sample.n() as f64).sqrt();
    Ok((m.s - reference).abs() <= half)
}

/// Bracket and empirical coverage of the `level` interval for each `n`.
///
/// For `n = ns[i]` the bracket sample uses `derive_seed(seed, 2 i)` and the
/// `r`-th coverage replicate `derive_seed(derive_seed(seed, 2 i + 1), r)`.
/// Without a `reference`, the index is estimated once from [`REFERENCE_N`]
/// rows with seed `derive_seed(seed, u64::MAX)`.
#[allow(clippy::too_many_arguments)]
pub fn coverage_curve(
    model: &ModelSpec,
    u: &[usize],
    ns: &[usize],
    level: f64,
    mean_mode: MeanMode,
    reference: Option<f64>,
    reps: usize,
    seed: u64,
) -> Result<Vec<CoverageRow>> {
    let design = Design::new(vec![u.to_vec()])?;
    design.validate_for(model.dim())?;
    if reps == 0 {
        return Err(Error::Parameter("reps must be at least 1".into()));
    }
    let reference = match reference {
        Some(r) => r,
        None => {
            let big = generate_pick_freeze(model, &design, REFERENCE_N, derive_seed(seed, u64::MAX))?;
            estimate_tilde_s(&big, mean_mode)?.values[0]
        }
    };
    let z = norm_quantile(0.5 * (1.0 + level))?;
    ns.iter()
        .enumerate()
        .map(|(i, &n)| {
            let i = i as u64;
            let sample = generate_pick_freeze(model, &design, n, derive_seed(seed, 2 * i))?;
            let b = bracket_for_level(&sample, level, mean_mode)?;
            let rep_seed = derive_seed(seed, 2 * i + 1);
            let hits = (0..reps as u64)
                .into_par_iter()
                .map(|r| {
                    let s = generate_pick_freeze(model, &design, n, derive_seed(rep_seed, r))?;
                    interval_covers(&s, z, mean_mode, reference)
                })
                .collect::<Result<Vec<bool>>>()?;
            let cover = hits.iter().filter(|&&h| h).count() as f64 / reps as f64;
            Ok(CoverageRow {
                n,
                low: b.bracket.low,
                high: b.bracket.high,
                empirical_coverage: cover,
                coverage_stderr: (cover * (1.0 - cover) / reps as f64).sqrt(),
                mu3: b.plus.mu3,
                sigma2: b.plus.sigma2,
                y: b.bracket.y,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ishigami_model;

    fn ishigami_sample(n: usize, seed: u64) -> PickFreezeSample {
        let m = ishigami_model(true);
        generate_pick_freeze(&m.spec, &Design::new(vec![vec![1]]).unwrap(), n, seed).unwrap()
    }

    #[test]
    fn degenerate_when_copies_are_identical() {
        let y: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let s = PickFreezeSample::from_columns(y.clone(), vec![y], Design::new(vec![vec![1]]).unwrap()).unwrap();
        assert!(matches!(
            be_moments(&s, 0.0, MeanMode::Known(0.0)),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn moments_at_zero_and_bound_arithmetic() {
        let s = ishigami_sample(5000, 4);
        let m = be_moments(&s, 0.0, MeanMode::Known(0.0)).unwrap();
        let (y, yu) = centered_pair(&s, MeanMode::Known(0.0));
        let sq: Vec<f64> = y.iter().map(|a| a * a).collect();
        let prod: Vec<f64> = y.iter().zip(&yu).map(|(a, b)| a * b).collect();
        let nu0 = 2.0 * m.s * var(&sq) - 2.0 * cov(&prod, &sq);
        assert!((m.nu - nu0).abs() < 1e-12 * nu0.abs().max(1.0));
        assert!(m.mu3 >= 1.0 - 1e-9);
        assert_eq!(be_bound_b(0.0, m.n, &m).unwrap(), KAPPA * m.mu3 / (m.n as f64).sqrt());
        let two = BEMoments { mu3: 2.0, ..m };
        assert!((be_bound_b(0.0, 10_000, &two).unwrap() - 0.0084).abs() < 1e-15);
        let far = be_bound_b(1.0, 100_000_000, &m).unwrap();
        assert!(far < 1e-3);
    }

    #[test]
    fn radicand_domain_error() {
        let m = BEMoments {
            sigma2: 1.0,
            mu3: 1.5,
            nu: -10.0,
            v: 1.0,
            c: 0.3,
            s: 0.3,
            t: 5.0,
            n: 4,
        };
        assert!(matches!(be_bound_b(5.0, 4, &m), Err(Error::Domain(_))));
    }

    #[test]
    fn zero_corrections_collapse_the_bracket() {
        let m = BEMoments {
            sigma2: 1.0,
            mu3: 0.0,
            nu: 0.0,
            v: 1.0,
            c: 0.3,
            s: 0.3,
            t: 0.0,
            n: 100,
        };
        let b = coverage_bracket(0.196, 100, &m, &m).unwrap();
        assert!((b.z - 1.96).abs() < 1e-12);
        assert_eq!(b.low, b.nominal);
        assert_eq!(b.high, b.nominal);
    }

    #[test]
    fn bracket_orders_and_asymmetry() {
        let s = ishigami_sample(20_000, 12);
        let b = bracket_for_level(&s, 0.95, MeanMode::Known(0.0)).unwrap();
        let br = b.bracket;
        assert!((br.z - 1.959963984540054).abs() < 1e-12);
        assert!((br.nominal - 0.95).abs() < 1e-12);
        assert!(0.0 <= br.low && br.low <= br.nominal && br.nominal <= br.high && br.high <= 1.0);
        assert!(br.b_plus != br.b_minus);
        assert!((b.plus.sigma2 - b.minus.sigma2).abs() < 1e-15);
    }

    #[test]
    fn mu3_is_scale_invariant() {
        let s = ishigami_sample(3000, 5);
        let m = be_moments(&s, 1.5, MeanMode::Known(0.0)).unwrap();
        let (y, yu) = centered_pair(&s, MeanMode::Known(0.0));
        let shift = 1.5 * m.sigma2.sqrt() / (m.n as f64).sqrt();
        // same Delta without the sigma^{-1} V factor, as in the proof's normalization
        let raw: Vec<f64> = y.iter().zip(&yu).map(|(a, b)| a * b - (m.s + shift) * a * a).collect();
        assert!((mu3_of(&raw).unwrap() - m.mu3).abs() < 1e-12 * m.mu3);
        let scaled: Vec<f64> = raw.iter().map(|x| -7.5 * x + 3.0).collect();
        assert!((mu3_of(&scaled).unwrap() - m.mu3).abs() < 1e-10 * m.mu3);
    }

    #[test]
    fn coverage_curve_small() {
        let m = ishigami_model(true);
        let reference = m.known_index(&[1]).unwrap();
        let rows = coverage_curve(
            &m.spec,
            &[1],
            &[1000, 4000],
            0.95,
            MeanMode::Known(0.0),
            Some(reference),
            100,
            3,
        )
        .unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.low <= r.high));
        assert!(rows[1].high - rows[1].low < rows[0].high - rows[0].low);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let again = pool
            .install(|| {
                coverage_curve(
                    &m.spec,
                    &[1],
                    &[1000, 4000],
                    0.95,
                    MeanMode::Known(0.0),
                    Some(reference),
                    100,
                    3,
                )
            })
            .unwrap();
        assert_eq!(rows, again);
    }
}
