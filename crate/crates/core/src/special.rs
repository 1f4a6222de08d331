//! Standard-normal distribution function and quantile, plus small moment helpers.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Standard normal distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

// Acklam's rational approximation, refined by one Halley step on erfc.
const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];

/// Quantile of the standard normal law, `p` in (0, 1).
pub fn norm_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Parameter(format!("normal quantile needs p in (0,1), got {p}")));
    }
    const P_LOW: f64 = 0.02425;
    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let e = norm_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    Ok(x - u / (1.0 + x * u / 2.0))
}

/// Upper-`alpha` quantile of a chi-square law with `dof` degrees of freedom.
pub fn chi2_upper_quantile(alpha: f64, dof: usize) -> Result<f64> {
    check_alpha(alpha)?;
    if dof == 0 {
        return Err(Error::Parameter("chi-square needs dof >= 1".into()));
    }
    if dof == 2 {
        // exponential law with mean 2
        return Ok(-2.0 * alpha.ln());
    }
    let law = ChiSquared::new(dof as f64).map_err(|e| Error::Parameter(e.to_string()))?;
    Ok(law.inverse_cdf(1.0 - alpha))
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("alpha must lie in (0,1), got {alpha}")))
    }
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Empirical covariance with 1/N normalization.
pub(crate) fn cov(x: &[f64], y: &[f64]) -> f64 {
    let mx = mean(x);
    let my = mean(y);
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / x.len() as f64
}

pub(crate) fn var(x: &[f64]) -> f64 {
    cov(x, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::Normal;

    #[test]
    fn cdf_landmarks() {
        assert_eq!(norm_cdf(0.0), 0.5);
        assert!((norm_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-12);
    }

    #[test]
    fn quantile_matches_series_inversion() {
        let reference = Normal::standard();
        for &p in &[
            1e-10,
            1e-4,
            0.01,
            0.02425,
            0.05,
            0.3,
            0.5,
            0.8,
            0.95,
            0.975,
            0.999,
            1.0 - 1e-9,
        ] {
            let q = norm_quantile(p).unwrap();
            assert!((q - reference.inverse_cdf(p)).abs() < 1e-8, "p={p}");
            assert!((norm_cdf(q) - p).abs() < 1e-12 * p.max(1e-3) / 1e-3);
        }
        assert_eq!(norm_quantile(0.5).unwrap(), 0.0);
        assert!((norm_quantile(0.95).unwrap() - 1.644_853_626_951_472).abs() < 1e-12);
    }

    #[test]
    fn quantile_rejects_bad_p() {
        assert!(norm_quantile(0.0).is_err());
        assert!(norm_quantile(1.0).is_err());
        assert!(norm_quantile(f64::NAN).is_err());
    }

    #[test]
    fn chi2_two_dof_is_exponential() {
        for &a in &[0.5, 0.1, 0.05, 0.01] {
            assert_eq!(chi2_upper_quantile(a, 2).unwrap(), -2.0 * f64::ln(a));
        }
        // three degrees of freedom: cdf is 2*Phi(sqrt x) - 1 - sqrt(2x/pi) exp(-x/2)
        let q = chi2_upper_quantile(0.05, 3).unwrap();
        let cdf = 2.0 * norm_cdf(q.sqrt()) - 1.0 - (2.0 * q / std::f64::consts::PI).sqrt() * (-q / 2.0).exp();
        assert!((cdf - 0.95).abs() < 1e-9);
    }
}
