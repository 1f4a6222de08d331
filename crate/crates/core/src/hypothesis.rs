//! Asymptotic tests of nullity and equality of closed indices.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{gamma_s, gamma_t, CovMatrix};
use crate::error::{Error, Result};
use crate::estimators::{estimate_s, estimate_t, EstimatorKind, IndexEstimate};
use crate::models::example1_gamma;
use crate::rng::derive_seed;
use crate::sampling::{generate_pick_freeze, Design, ModelSpec, PickFreezeSample};
use crate::special::{check_alpha, chi2_upper_quantile, norm_quantile};

/// Draws used when a threshold comes from simulating the null Gaussian.
pub const NULL_DRAWS: usize = 100_000;

/// `H0: S^{u_j} = 0 for all j and S^{v_i} = S^{w_i} for all i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestProblem {
    u: Vec<Vec<usize>>,
    v: Vec<Vec<usize>>,
    w: Vec<Vec<usize>>,
}

impl TestProblem {
    pub fn new(u: Vec<Vec<usize>>, v: Vec<Vec<usize>>, w: Vec<Vec<usize>>) -> Result<Self> {
        if v.len() != w.len() {
            return Err(Error::Design(format!(
                "v has {} subsets but w has {}",
                v.len(),
                w.len()
            )));
        }
        if u.is_empty() && v.is_empty() {
            return Err(Error::Design("a test needs at least one subset".into()));
        }
        // normalizes each subset and rejects empty ones or index 0
        let norm = |s: Vec<Vec<usize>>| -> Result<Vec<Vec<usize>>> {
            if s.is_empty() {
                Ok(s)
            } else {
                Ok(Design::new(s)?.into())
            }
        };
        Ok(Self {
            u: norm(u)?,
            v: norm(v)?,
            w: norm(w)?,
        })
    }

    /// Only nullity constraints.
    pub fn nullity(u: Vec<Vec<usize>>) -> Result<Self> {
        Self::new(u, Vec::new(), Vec::new())
    }

    pub fn k(&self) -> usize {
        self.u.len()
    }

    pub fn l(&self) -> usize {
        self.v.len()
    }

    pub fn dim(&self) -> usize {
        self.k() + self.l()
    }

    pub fn u(&self) -> &[Vec<usize>] {
        &self.u
    }

    pub fn v(&self) -> &[Vec<usize>] {
        &self.v
    }

    pub fn w(&self) -> &[Vec<usize>] {
        &self.w
    }

    /// `u ++ v ++ w`, the columns a sample must provide.
    pub fn combined_design(&self) -> Design {
        Design::new(self.u.iter().chain(&self.v).chain(&self.w).cloned().collect()).expect("validated on construction")
    }

    /// Maps estimates on [`Self::combined_design`] to `(S^u, S^v - S^w)`.
    pub fn stacking_matrix(&self) -> Vec<Vec<f64>> {
        let (k, l) = (self.k(), self.l());
        let width = k + 2 * l;
        (0..k + l)
            .map(|r| {
                let mut row = vec![0.0; width];
                if r < k {
                    row[r] = 1.0;
                } else {
                    row[r] += 1.0;
                    row[r + l] -= 1.0;
                }
                row
            })
            .collect()
    }
}

/// `G_N` together with its plug-in covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct JointStatistic {
    /// `sqrt(N) (S^u, S^v - S^w)`.
    pub gn: Vec<f64>,
    pub gamma: CovMatrix,
    /// The per-subset estimates on `u ++ v ++ w`.
    pub estimate: IndexEstimate,
}

fn column_of(design: &Design, subset: &[usize]) -> Result<usize> {
    design
        .subsets()
        .iter()
        .position(|s| s == subset)
        .ok_or_else(|| Error::Design(format!("the sample has no column for subset {subset:?}")))
}

/// Builds `G_N` from a sample holding a column for every subset of the problem.
///
/// When a subset occurs several times in the sample design the first column is
/// used, so `v_i = w_i` gives an identically zero coordinate.
pub fn build_gn(sample: &PickFreezeSample, problem: &TestProblem, estimator: EstimatorKind) -> Result<JointStatistic> {
    let combined = problem.combined_design();
    let cols = combined
        .subsets()
        .iter()
        .map(|s| column_of(sample.design(), s))
        .collect::<Result<Vec<_>>>()?;
    let sub = sample.select(&cols)?;
    let (est, gamma) = match estimator {
        EstimatorKind::S => {
            let e = estimate_s(&sub)?;
            let g = gamma_s(&sub, &e)?;
            (e, g)
        }
        EstimatorKind::T => {
            let e = estimate_t(&sub)?;
            let g = gamma_t(&sub, &e)?;
            (e, g)
        }
        other => {
            return Err(Error::Parameter(format!(
                "tests need the S or T estimator, got {other}"
            )))
        }
    };
    let a = problem.stacking_matrix();
    let root_n = (sub.n() as f64).sqrt();
    let gn = a
        .iter()
        .map(|row| root_n * row.iter().zip(&est.values).map(|(c, s)| c * s).sum::<f64>())
        .collect();
    Ok(JointStatistic {
        gn,
        gamma: gamma.congruence(&a),
        estimate: est,
    })
}

/// Test statistic families on `g = G_N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum StatKind {
    /// `sum g_i`
    T1,
    /// `sum |g_i|`
    T2,
    /// `|sum g_i|`
    T3,
    /// `sum g_i^2`
    T4,
    /// `max |g_i|`
    T5,
    /// `A g / sqrt(A Gamma A^t)`
    Linear(Vec<f64>),
}

impl StatKind {
    pub fn tag(&self) -> &'static str {
        match self {
            StatKind::T1 => "t1",
            StatKind::T2 => "t2",
            StatKind::T3 => "t3",
            StatKind::T4 => "t4",
            StatKind::T5 => "t5",
            StatKind::Linear(_) => "linear",
        }
    }

    /// Raw statistic, without the normalization of the linear form.
    pub fn evaluate(&self, g: &[f64]) -> Result<f64> {
        Ok(match self {
            StatKind::T1 => g.iter().sum(),
            StatKind::T2 => g.iter().map(|x| x.abs()).sum(),
            StatKind::T3 => g.iter().sum::<f64>().abs(),
            StatKind::T4 => g.iter().map(|x| x * x).sum(),
            StatKind::T5 => g.iter().fold(0.0, |m, x| m.max(x.abs())),
            StatKind::Linear(a) => {
                check_len(a.len(), g.len())?;
                a.iter().zip(g).map(|(c, x)| c * x).sum()
            }
        })
    }
}

impl fmt::Display for StatKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatKind::Linear(a) => {
                let coef: Vec<String> = a.iter().map(|c| c.to_string()).collect();
                write!(f, "linear({})", coef.join(","))
            }
            other => f.write_str(other.tag()),
        }
    }
}

impl FromStr for StatKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "t1" => Ok(StatKind::T1),
            "t2" => Ok(StatKind::T2),
            "t3" => Ok(StatKind::T3),
            "t4" => Ok(StatKind::T4),
            "t5" => Ok(StatKind::T5),
            _ => Err(Error::Config(format!("unknown statistic `{s}` (t1..t5 or linear)"))),
        }
    }
}

fn check_len(a: usize, g: usize) -> Result<()> {
    if a == g {
        Ok(())
    } else {
        Err(Error::Design(format!(
            "coefficients of length {a} for a statistic of dimension {g}"
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub threshold: f64,
    pub alpha: f64,
    pub reject: bool,
    pub statistic_kind: StatKind,
}

impl TestResult {
    fn new(statistic: f64, threshold: f64, alpha: f64, statistic_kind: StatKind) -> Self {
        Self {
            statistic,
            threshold,
            alpha,
            reject: statistic > threshold,
            statistic_kind,
        }
    }
}

fn linear_sd(a: &[f64], gamma: &CovMatrix) -> Result<f64> {
    check_len(a.len(), gamma.dim())?;
    let q = gamma.quadratic_form(a);
    if !(q > 0.0) {
        return Err(Error::Degenerate(format!("A Gamma A^t = {q:e} is not positive")));
    }
    Ok(q.sqrt())
}

/// One-sided test of `A G_N` against the upper `alpha` normal quantile.
pub fn test_linear(a: &[f64], gn: &[f64], gamma: &CovMatrix, alpha: f64) -> Result<TestResult> {
    test_one_sided(a, gn, gamma, 0.0, 1, alpha)
}

/// Tests `A S <= shift` through `(A G_N - sqrt(n) shift) / sqrt(A Gamma A^t)`.
pub fn test_one_sided(
    a: &[f64],
    gn: &[f64],
    gamma: &CovMatrix,
    shift: f64,
    n: usize,
    alpha: f64,
) -> Result<TestResult> {
    check_alpha(alpha)?;
    check_len(a.len(), gn.len())?;
    let sd = linear_sd(a, gamma)?;
    let kind = StatKind::Linear(a.to_vec());
    let stat = (kind.evaluate(gn)? - (n as f64).sqrt() * shift) / sd;
    Ok(TestResult::new(stat, norm_quantile(1.0 - alpha)?, alpha, kind))
}

/// Threshold of `kind` in dimension `d` when the null covariance is `sigma0^2 I_d`.
pub fn iid_threshold(kind: &StatKind, d: usize, alpha: f64, sigma0: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if d == 0 {
        return Err(Error::Design("empty statistic".into()));
    }
    if !(sigma0 > 0.0 && sigma0.is_finite()) {
        return Err(Error::Parameter(format!("sigma0 must be positive, got {sigma0}")));
    }
    let df = d as f64;
    Ok(match kind {
        StatKind::T1 => sigma0 * df.sqrt() * norm_quantile(1.0 - alpha)?,
        StatKind::T2 => match d {
            1 => sigma0 * norm_quantile(1.0 - alpha / 2.0)?,
            2 => sigma0 * quantile_abs_sum(alpha)?,
            _ => {
                return Err(Error::Parameter(
                    "t2 has closed thresholds only in dimension 1 or 2; use a simulated null".into(),
                ))
            }
        },
        StatKind::T3 => sigma0 * df.sqrt() * norm_quantile(1.0 - alpha / 2.0)?,
        StatKind::T4 => sigma0 * sigma0 * chi2_upper_quantile(alpha, d)?,
        StatKind::T5 => sigma0 * norm_quantile(0.5 * (1.0 + (1.0 - alpha).powf(1.0 / df)))?,
        StatKind::Linear(_) => return Err(Error::Parameter("use test_linear for linear forms".into())),
    })
}

/// Test of dimension two with null covariance `sigma0^2 I_2`.
pub fn test_k2(kind: &StatKind, gn: &[f64], alpha: f64, sigma0: f64) -> Result<TestResult> {
    if gn.len() != 2 {
        return Err(Error::Design(format!(
            "expected a 2-vector, got dimension {}",
            gn.len()
        )));
    }
    test_iid(kind, gn, alpha, sigma0)
}

/// Test with null covariance `sigma0^2 I_d`.
pub fn test_iid(kind: &StatKind, gn: &[f64], alpha: f64, sigma0: f64) -> Result<TestResult> {
    if let StatKind::Linear(a) = kind {
        let gamma = CovMatrix::scaled_identity(gn.len(), sigma0 * sigma0);
        return test_linear(a, gn, &gamma, alpha);
    }
    let threshold = iid_threshold(kind, gn.len(), alpha, sigma0)?;
    Ok(TestResult::new(kind.evaluate(gn)?, threshold, alpha, kind.clone()))
}

fn psd_factor(gamma: &CovMatrix) -> Vec<Vec<f64>> {
    if let Some(l) = gamma.cholesky() {
        return l;
    }
    let d = gamma.dim();
    let m = DMatrix::from_fn(d, d, |i, j| gamma.get(i, j));
    let eig = SymmetricEigen::new(m);
    let root = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let f = &eig.eigenvectors * DMatrix::from_diagonal(&root);
    (0..d).map(|i| (0..d).map(|j| f[(i, j)]).collect()).collect()
}

/// Upper `alpha` quantile of `kind` under `N(0, gamma)`, by simulation.
pub fn simulated_threshold(kind: &StatKind, gamma: &CovMatrix, alpha: f64, draws: usize, seed: u64) -> Result<f64> {
    check_alpha(alpha)?;
    if draws == 0 {
        return Err(Error::Parameter("need at least one null draw".into()));
    }
    let d = gamma.dim();
    let l = psd_factor(gamma);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut stats = Vec::with_capacity(draws);
    for _ in 0..draws {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        for (gi, row) in g.iter_mut().zip(&l) {
            *gi = row.iter().zip(&z).map(|(a, b)| a * b).sum();
        }
        stats.push(kind.evaluate(&g)?);
    }
    stats.sort_by(f64::total_cmp);
    let idx = ((1.0 - alpha) * draws as f64).ceil() as usize;
    Ok(stats[idx.clamp(1, draws) - 1])
}

/// Test whose null law is `N(0, gamma)` for a general (plug-in) `gamma`.
///
/// `t1` and linear forms use the exact normal quantile; the other statistics
/// use [`simulated_threshold`] with [`NULL_DRAWS`] draws.
pub fn test_gaussian_null(kind: &StatKind, gn: &[f64], gamma: &CovMatrix, alpha: f64, seed: u64) -> Result<TestResult> {
    check_len(gamma.dim(), gn.len())?;
    match kind {
        StatKind::Linear(a) => test_linear(a, gn, gamma, alpha),
        StatKind::T1 => {
            let ones = vec![1.0; gn.len()];
            let sd = linear_sd(&ones, gamma)?;
            let stat = kind.evaluate(gn)?;
            Ok(TestResult::new(
                stat,
                sd * norm_quantile(1.0 - alpha)?,
                alpha,
                StatKind::T1,
            ))
        }
        _ => {
            let threshold = simulated_threshold(kind, gamma, alpha, NULL_DRAWS, seed)?;
            Ok(TestResult::new(kind.evaluate(gn)?, threshold, alpha, kind.clone()))
        }
    }
}

/// Density of `|N1| + |N2|` for independent standard normals,
/// `(2/sqrt(pi)) exp(-u^2/4) erf(u/2)` on `u >= 0`.
pub fn abs_sum_density(u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    2.0 / std::f64::consts::PI.sqrt() * (-u * u / 4.0).exp() * libm::erf(u / 2.0)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    adaptive(&f, a, b, fa, fm, fb, whole, tol, 50)
}

// beyond this point the remaining mass is below 1e-30
const ABS_SUM_UPPER: f64 = 24.0;

/// Distribution function of `|N1| + |N2|`.
pub fn abs_sum_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let x = x.min(ABS_SUM_UPPER);
    // split at the mode region so the quadrature sees the bulk
    let mid = x.min(3.0);
    let a = integrate(abs_sum_density, 0.0, mid, 1e-13);
    let b = integrate(abs_sum_density, mid, x, 1e-13);
    (a + b).min(1.0)
}

/// Upper `alpha` quantile of `|N1| + |N2|`, by bisection on [`abs_sum_cdf`].
pub fn quantile_abs_sum(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let target = 1.0 - alpha;
    let (mut lo, mut hi) = (0.0, ABS_SUM_UPPER);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if abs_sum_cdf(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// How the null threshold of a replicate is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum NullCov {
    /// Known null covariance `sigma0^2 I`.
    Iid { sigma0: f64 },
    /// Plug-in `Gamma_N` of each replicate.
    PlugIn,
}

/// Everything needed to run one test on fresh data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestSetup {
    pub problem: TestProblem,
    pub estimator: EstimatorKind,
    pub kind: StatKind,
    pub null: NullCov,
    pub alpha: f64,
    /// Tests `A S <= shift` instead of `A S = 0`; linear forms only.
    pub shift: f64,
}

impl TestSetup {
    /// Decision on an already generated sample. `seed` feeds a simulated null
    /// threshold when one is needed.
    pub fn run_on(&self, sample: &PickFreezeSample, seed: u64) -> Result<TestResult> {
        let joint = build_gn(sample, &self.problem, self.estimator)?;
        let d = joint.gn.len();
        match (&self.kind, self.null) {
            (StatKind::Linear(a), NullCov::Iid { sigma0 }) => {
                let gamma = CovMatrix::scaled_identity(d, sigma0 * sigma0);
                test_one_sided(a, &joint.gn, &gamma, self.shift, sample.n(), self.alpha)
            }
            (StatKind::Linear(a), NullCov::PlugIn) => {
                test_one_sided(a, &joint.gn, &joint.gamma, self.shift, sample.n(), self.alpha)
            }
            _ if self.shift != 0.0 => Err(Error::Parameter("a shifted null needs a linear statistic".into())),
            (kind, NullCov::Iid { sigma0 }) => test_iid(kind, &joint.gn, self.alpha, sigma0),
            (kind, NullCov::PlugIn) => test_gaussian_null(kind, &joint.gn, &joint.gamma, self.alpha, seed),
        }
    }

    /// Generates a sample of size `n` from `model` and runs the test.
    pub fn run(&self, model: &ModelSpec, n: usize, seed: u64) -> Result<TestResult> {
        let sample = generate_pick_freeze(model, &self.problem.combined_design(), n, derive_seed(seed, 0))?;
        self.run_on(&sample, derive_seed(seed, 1))
    }
}

/// Monte Carlo rejection frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rate {
    pub rate: f64,
    pub stderr: f64,
    pub reps: usize,
}

impl Rate {
    fn from_count(count: usize, reps: usize) -> Self {
        let rate = count as f64 / reps as f64;
        Self {
            rate,
            stderr: (rate * (1.0 - rate) / reps as f64).sqrt(),
            reps,
        }
    }
}

/// Rejection frequency over `reps` independent datasets. Replicate `r` uses
/// `derive_seed(seed, r)`, so the result does not depend on scheduling.
pub fn rejection_rate(setup: &TestSetup, model: &ModelSpec, n: usize, reps: usize, seed: u64) -> Result<Rate> {
    if reps == 0 {
        return Err(Error::Parameter("reps must be at least 1".into()));
    }
    let decisions = (0..reps as u64)
        .into_par_iter()
        .map(|r| setup.run(model, n, derive_seed(seed, r)).map(|t| t.reject))
        .collect::<Result<Vec<bool>>>()?;
    Ok(Rate::from_count(decisions.iter().filter(|&&d| d).count(), reps))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerRow {
    pub parameter: f64,
    pub n: usize,
    pub power: f64,
    pub mc_stderr: f64,
    pub closed_form_power: Option<f64>,
}

pub type ClosedFormPower<'a> = &'a (dyn Fn(f64, usize) -> Result<f64> + Sync);

/// Rejection frequency over a parameter grid and several sample sizes.
///
/// `family` maps a grid value to a model. The cell `(parameter i, n)` uses seed
/// `derive_seed(derive_seed(seed, i), n)`.
pub fn power_curve<F>(
    family: F,
    setup: &TestSetup,
    grid: &[f64],
    ns: &[usize],
    reps: usize,
    seed: u64,
    closed_form: Option<ClosedFormPower<'_>>,
) -> Result<Vec<PowerRow>>
where
    F: Fn(f64) -> Result<ModelSpec>,
{
    check_alpha(setup.alpha)?;
    let mut rows = Vec::with_capacity(grid.len() * ns.len());
    for (i, &parameter) in grid.iter().enumerate() {
        let model = family(parameter)?;
        let cell = derive_seed(seed, i as u64);
        for &n in ns {
            let rate = rejection_rate(setup, &model, n, reps, derive_seed(cell, n as u64))?;
            rows.push(PowerRow {
                parameter,
                n,
                power: rate.rate,
                mc_stderr: rate.stderr,
                closed_form_power: closed_form.map(|f| f(parameter, n)).transpose()?,
            });
        }
    }
    Ok(rows)
}

/// Limit power of `t1` on the two-input Gaussian example with `u = ({1},{2})`,
/// the `S` estimator and the known null covariance `3 I_2`:
/// `1 - Phi((z - 2 sqrt(N) l1^2) / sqrt(2 (Gamma11 + Gamma12)))`.
pub fn example1_t1_power(lambda1: f64, n: usize, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let z = 6f64.sqrt() * norm_quantile(1.0 - alpha)?;
    let (g11, g12) = example1_gamma(lambda1);
    let sd = (2.0 * (g11 + g12)).sqrt();
    let shift = 2.0 * (n as f64).sqrt() * lambda1 * lambda1;
    Ok(1.0 - crate::special::norm_cdf((z - shift) / sd))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{example1, example2, ishigami_model};
    use rand::SeedableRng;

    #[test]
    fn problem_validation() {
        assert!(TestProblem::new(vec![], vec![], vec![]).is_err());
        assert!(TestProblem::new(vec![vec![1]], vec![vec![1, 2]], vec![]).is_err());
        assert!(TestProblem::new(vec![vec![0]], vec![], vec![]).is_err());
        let p = TestProblem::new(vec![vec![1]], vec![vec![2, 1], vec![1, 3]], vec![vec![2], vec![3]]).unwrap();
        assert_eq!((p.k(), p.l(), p.dim()), (1, 2, 3));
        assert_eq!(p.v()[0], vec![1, 2]);
        assert_eq!(
            p.stacking_matrix(),
            vec![
                vec![1.0, 0.0, 0.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0, -1.0, 0.0],
                vec![0.0, 0.0, 1.0, 0.0, -1.0],
            ]
        );
    }

    #[test]
    fn equal_pairs_give_zero_difference() {
        let m = ishigami_model(false);
        let p = TestProblem::new(vec![vec![3]], vec![vec![1]], vec![vec![1]]).unwrap();
        let s = generate_pick_freeze(&m.spec, &p.combined_design(), 500, 3).unwrap();
        let j = build_gn(&s, &p, EstimatorKind::S).unwrap();
        assert_eq!(j.gn[1], 0.0);
        assert_eq!(j.gamma.get(1, 1), 0.0);
        let missing = TestProblem::nullity(vec![vec![2]]).unwrap();
        assert!(matches!(
            build_gn(&s, &missing, EstimatorKind::S),
            Err(Error::Design(_))
        ));
        assert!(build_gn(&s, &p, EstimatorKind::TildeS).is_err());
    }

    #[test]
    fn linear_thresholds() {
        let g = CovMatrix::identity(1);
        let r = test_linear(&[1.0], &[0.3], &g, 0.5).unwrap();
        assert_eq!(r.threshold, 0.0);
        assert!(r.reject);
        let r = test_linear(&[1.0], &[0.0], &g, 0.5).unwrap();
        assert!(!r.reject, "ties do not reject");
        let r = test_linear(&[2.0], &[1.0], &g, 0.05).unwrap();
        assert!((r.threshold - 1.644854).abs() < 1e-5);
        assert_eq!(r.statistic, 1.0);
        assert!(matches!(
            test_linear(&[0.0], &[1.0], &g, 0.05),
            Err(Error::Degenerate(_))
        ));
        assert!(test_linear(&[1.0, 1.0], &[1.0], &g, 0.05).is_err());
        let shifted = test_one_sided(&[1.0], &[5.0], &g, 0.1, 100, 0.05).unwrap();
        assert!((shifted.statistic - 4.0).abs() < 1e-12);
    }

    #[test]
    fn iid_thresholds() {
        let s0 = 3f64.sqrt();
        let t4 = iid_threshold(&StatKind::T4, 2, 0.05, s0).unwrap();
        assert!((t4 - 17.9744).abs() < 1e-3);
        let t5 = iid_threshold(&StatKind::T5, 2, 0.05, 1.0).unwrap();
        assert!((t5 - 2.236477).abs() < 1e-5);
        assert!((crate::special::norm_cdf(t5) - 0.5 * (1.0 + 0.95f64.sqrt())).abs() < 1e-12);
        let t1 = iid_threshold(&StatKind::T1, 2, 0.05, s0).unwrap();
        assert!((t1 / 6f64.sqrt() - 1.644853626951472).abs() < 1e-12);
        let t3 = iid_threshold(&StatKind::T3, 2, 0.05, 1.0).unwrap();
        assert!((t3 / 2f64.sqrt() - 1.959963984540054).abs() < 1e-12);
        assert!(iid_threshold(&StatKind::T2, 2, 1.0 - 1e-9, 1.0).unwrap() < 1e-3);
        assert!(iid_threshold(&StatKind::T2, 3, 0.05, 1.0).is_err());
        for kind in [StatKind::T1, StatKind::T2, StatKind::T3, StatKind::T4, StatKind::T5] {
            let mut last = f64::INFINITY;
            for alpha in [0.001, 0.01, 0.05, 0.1, 0.3, 0.6, 0.9] {
                let t = iid_threshold(&kind, 2, alpha, 1.0).unwrap();
                assert!(t < last, "{kind} alpha {alpha}");
                last = t;
            }
        }
        assert!(test_k2(&StatKind::T1, &[1.0], 0.05, 1.0).is_err());
        let r = test_k2(&StatKind::T5, &[-3.0, 1.0], 0.05, 1.0).unwrap();
        assert_eq!(r.statistic, 3.0);
        assert!(r.reject);
    }

    #[test]
    fn abs_sum_law() {
        assert_eq!(abs_sum_cdf(0.0), 0.0);
        let mass = integrate(abs_sum_density, 0.0, 3.0, 1e-13) + integrate(abs_sum_density, 3.0, 40.0, 1e-13);
        assert!((mass - 1.0).abs() < 1e-8, "{mass}");
        let median = quantile_abs_sum(0.5).unwrap();
        // median of 10^7 draws of |N1| + |N2|
        assert!((median - 1.48689).abs() < 1e-3, "{median}");
        // independent route: 4 int_0^x phi(a) (Phi(x - a) - 1/2) da
        let x = 2.1;
        let other = 4.0
            * integrate(
                |a| crate::special::norm_pdf(a) * (crate::special::norm_cdf(x - a) - 0.5),
                0.0,
                x,
                1e-13,
            );
        assert!((abs_sum_cdf(x) - other).abs() < 1e-10);
        assert!(quantile_abs_sum(0.0).is_err());
    }

    #[test]
    fn simulated_threshold_matches_closed_form() {
        let gamma = CovMatrix::scaled_identity(2, 3.0);
        let sim = simulated_threshold(&StatKind::T4, &gamma, 0.05, NULL_DRAWS, 5).unwrap();
        let exact = iid_threshold(&StatKind::T4, 2, 0.05, 3f64.sqrt()).unwrap();
        assert!((sim - exact).abs() / exact < 0.03, "{sim} vs {exact}");
        // singular covariance: the eigen fallback still works
        let singular = CovMatrix::from_rows(vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let t3 = simulated_threshold(&StatKind::T3, &singular, 0.05, 20_000, 1).unwrap();
        assert!((t3 - 2.0 * 1.959964).abs() < 0.1, "{t3}");
    }

    #[test]
    fn example1_expected_gn() {
        let l1 = 0.3f64.sqrt();
        let m = example1(l1).unwrap();
        let p = TestProblem::nullity(vec![vec![1], vec![2]]).unwrap();
        let n = 100_000;
        let s = generate_pick_freeze(&m.spec, &p.combined_design(), n, 8).unwrap();
        let j = build_gn(&s, &p, EstimatorKind::S).unwrap();
        for (g, d) in j.gn.iter().zip(j.gamma.diag()) {
            let se = (d / n as f64).sqrt();
            assert!((g / (n as f64).sqrt() - 0.3).abs() < 4.0 * se);
        }
    }

    #[test]
    fn example2_null_covariance_is_identity() {
        let m = example2(0.5f64.sqrt()).unwrap();
        let p = TestProblem::new(vec![vec![1]], vec![vec![1, 2], vec![1, 3]], vec![vec![2], vec![3]]).unwrap();
        let s = generate_pick_freeze(&m.spec, &p.combined_design(), 10_000, 21).unwrap();
        let j = build_gn(&s, &p, EstimatorKind::S).unwrap();
        for l in 0..3 {
            for c in 0..3 {
                let target = if l == c { 1.0 } else { 0.0 };
                // generous: the plug-in has an O(1/sqrt(N)) error with a heavy-tailed constant
                assert!(
                    (j.gamma.get(l, c) - target).abs() < 0.15,
                    "({l},{c}) {}",
                    j.gamma.get(l, c)
                );
            }
        }
    }

    #[test]
    fn closed_form_power_limits() {
        assert!((example1_t1_power(0.0, 1000, 0.05).unwrap() - 0.05).abs() < 1e-12);
        assert!(example1_t1_power(0.3f64.sqrt(), 1000, 0.05).unwrap() > 0.999);
        let a = example1_t1_power(0.1, 100, 0.05).unwrap();
        let b = example1_t1_power(0.1, 1000, 0.05).unwrap();
        assert!(b > a);
    }

    #[test]
    fn rejection_rate_is_deterministic_and_seeded() {
        let m = ishigami_model(false);
        let setup = TestSetup {
            problem: TestProblem::nullity(vec![vec![3]]).unwrap(),
            estimator: EstimatorKind::S,
            kind: StatKind::Linear(vec![1.0]),
            null: NullCov::PlugIn,
            alpha: 0.05,
            shift: 0.0,
        };
        let a = rejection_rate(&setup, &m.spec, 300, 50, 9).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| rejection_rate(&setup, &m.spec, 300, 50, 9)).unwrap();
        assert_eq!(a, b);
        assert!(rejection_rate(&setup, &m.spec, 300, 0, 9).is_err());
        let _ = ChaCha8Rng::seed_from_u64(0);
    }

    #[test]
    fn stat_kind_parsing() {
        assert_eq!("T4".parse::<StatKind>().unwrap(), StatKind::T4);
        assert!("t9".parse::<StatKind>().is_err());
        assert_eq!(StatKind::Linear(vec![1.0, -1.0]).to_string(), "linear(1,-1)");
    }
}
