//! Benchmark models with known indices, and an exact enumeration oracle for
//! models with finitely supported inputs.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_traits::{Num, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::asymptotics::CovMatrix;
use crate::error::{Error, Result};
use crate::sampling::{Design, InputDistribution, ModelSpec};

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    Ishigami { centered: bool },
    Example1 { lambda1: f64 },
    Example2 { lambda1: f64 },
    Breguet(BreguetConstants),
    Discrete,
}

/// A model together with whatever ground truth is known for it.
#[derive(Debug, Clone)]
pub struct AnalyticModel {
    pub kind: ModelKind,
    pub spec: ModelSpec,
    known_indices: BTreeMap<Vec<usize>, f64>,
    /// Known mean of the output, when available.
    pub mean: Option<f64>,
    /// A bound `b` with `|Y| <= b` on the support, when available.
    pub bound: Option<f64>,
    /// Exact asymptotic covariance of the `S` estimator on a design, when known.
    pub known_gamma: Option<(Design, CovMatrix)>,
}

impl AnalyticModel {
    fn new(kind: ModelKind, spec: ModelSpec) -> Self {
        Self {
            kind,
            spec,
            known_indices: BTreeMap::new(),
            mean: None,
            bound: None,
            known_gamma: None,
        }
    }

    /// Exact closed index of a subset (1-based, any order), if known.
    pub fn known_index(&self, subset: &[usize]) -> Option<f64> {
        let mut key = subset.to_vec();
        key.sort_unstable();
        key.dedup();
        self.known_indices.get(&key).copied()
    }

    pub fn known_indices(&self) -> &BTreeMap<Vec<usize>, f64> {
        &self.known_indices
    }
}

const ISHIGAMI_A: f64 = 7.0;
const ISHIGAMI_B: f64 = 0.1;

/// `sin x1 + 7 sin^2 x2 + 0.1 x3^4 sin x1`, minus its mean 7/2 when `centered`.
pub fn ishigami(x1: f64, x2: f64, x3: f64, centered: bool) -> f64 {
    let s2 = x2.sin();
    let y = x1.sin() * (1.0 + ISHIGAMI_B * x3.powi(4)) + ISHIGAMI_A * s2 * s2;
    if centered {
        y - ISHIGAMI_A / 2.0
    } else {
        y
    }
}

/// `b = 8 + 0.1 pi^4`, a bound on `|Y|` for the uncentered Ishigami output.
pub fn ishigami_bound() -> f64 {
    8.0 + ISHIGAMI_B * PI.powi(4)
}

/// Ishigami function with i.i.d. uniform inputs on `[-pi, pi]`.
pub fn ishigami_model(centered: bool) -> AnalyticModel {
    let uniform = InputDistribution::Uniform { a: -PI, b: PI };
    let spec = ModelSpec::new(
        if centered { "ishigami-centered" } else { "ishigami" },
        vec![uniform.clone(), uniform.clone(), uniform],
        move |x| ishigami(x[0], x[1], x[2], centered),
    )
    .expect("valid inputs");
    let (a, b) = (ISHIGAMI_A, ISHIGAMI_B);
    let pi4 = PI.powi(4);
    let pi8 = PI.powi(8);
    // partial variances; E X^4 = pi^4/5 and E X^8 = pi^8/9 for X ~ U(-pi, pi)
    let v1 = 0.5 * (1.0 + b * pi4 / 5.0).powi(2);
    let v2 = a * a / 8.0;
    let v13 = 0.5 * (1.0 + 2.0 * b * pi4 / 5.0 + b * b * pi8 / 9.0);
    let var = v13 + v2;
    let mut m = AnalyticModel::new(ModelKind::Ishigami { centered }, spec);
    for (s, v) in [
        (vec![1], v1),
        (vec![2], v2),
        (vec![3], 0.0),
        (vec![1, 2], v1 + v2),
        (vec![1, 3], v13),
        (vec![2, 3], v2),
        (vec![1, 2, 3], var),
    ] {
        m.known_indices.insert(s, v / var);
    }
    m.mean = Some(if centered { 0.0 } else { a / 2.0 });
    m.bound = Some(if centered {
        ishigami_bound() - a / 2.0
    } else {
        ishigami_bound()
    });
    m
}

fn lambda2(lambda1: f64) -> Result<f64> {
    let r = 1.0 - 2.0 * lambda1 * lambda1;
    if !(r >= -1e-15) || !lambda1.is_finite() {
        return Err(Error::Parameter(format!(
            "need 2 lambda1^2 <= 1, got lambda1 = {lambda1}"
        )));
    }
    Ok(r.max(0.0).sqrt())
}

/// `Y = l1 X1 + l1 X2 + l2 X1 X2`, `X ~ N(0, I_2)`, `2 l1^2 + l2^2 = 1`.
pub fn example1(lambda1: f64) -> Result<AnalyticModel> {
    let l2 = lambda2(lambda1)?;
    let spec = ModelSpec::new("example1", vec![InputDistribution::StandardNormal; 2], move |x| {
        lambda1 * x[0] + lambda1 * x[1] + l2 * x[0] * x[1]
    })?;
    let mut m = AnalyticModel::new(ModelKind::Example1 { lambda1 }, spec);
    let s = lambda1 * lambda1;
    m.known_indices.insert(vec![1], s);
    m.known_indices.insert(vec![2], s);
    m.known_indices.insert(vec![1, 2], 1.0);
    m.mean = Some(0.0);
    let (d, o) = example1_gamma(lambda1);
    m.known_gamma = Some((
        Design::singletons(2)?,
        CovMatrix::from_rows(vec![vec![d, o], vec![o, d]])?,
    ));
    Ok(m)
}

/// Exact `(Gamma(1,1), Gamma(1,2))` of the `S` estimator for `u = ({1},{2})` on
/// [`example1`], obtained by expanding the Gaussian moments.
pub fn example1_gamma(lambda1: f64) -> (f64, f64) {
    let l = lambda1 * lambda1;
    (
        3.0 - 15.0 * l * l + 24.0 * l.powi(3) - 24.0 * l.powi(4),
        -7.0 * l * l + 24.0 * l.powi(3) - 24.0 * l.powi(4),
    )
}

/// Alternative closed form `(3 - 2l - 11l^2 + 24l^3 - 24l^4, -7l^2 + 24l^3 - 24l^4)`
/// with `l = lambda1^2`. Its diagonal disagrees with [`example1_gamma`] unless `l = 0`.
pub fn example1_gamma_stated(lambda1: f64) -> (f64, f64) {
    let l = lambda1 * lambda1;
    (
        3.0 - 2.0 * l - 11.0 * l * l + 24.0 * l.powi(3) - 24.0 * l.powi(4),
        -7.0 * l * l + 24.0 * l.powi(3) - 24.0 * l.powi(4),
    )
}

/// `Y = l1 (X2 + X3) + l2 X1 X2`, `X ~ N(0, I_3)`, `2 l1^2 + l2^2 = 1`.
pub fn example2(lambda1: f64) -> Result<AnalyticModel> {
    let l2 = lambda2(lambda1)?;
    let spec = ModelSpec::new("example2", vec![InputDistribution::StandardNormal; 3], move |x| {
        lambda1 * (x[1] + x[2]) + l2 * x[0] * x[1]
    })?;
    let mut m = AnalyticModel::new(ModelKind::Example2 { lambda1 }, spec);
    let (a, b) = (lambda1 * lambda1, l2 * l2);
    for (s, v) in [
        (vec![1], 0.0),
        (vec![2], a),
        (vec![3], a),
        (vec![1, 2], a + b),
        (vec![1, 3], a),
        (vec![2, 3], 2.0 * a),
        (vec![1, 2, 3], 1.0),
    ] {
        m.known_indices.insert(s, v);
    }
    m.mean = Some(0.0);
    Ok(m)
}

/// Fixed quantities of the fuel-mass model. The defaults are illustrative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BreguetConstants {
    /// kg
    pub m_empty: f64,
    /// kg
    pub m_pload: f64,
    /// m/s^2
    pub g: f64,
    /// km
    pub ra: f64,
}

impl Default for BreguetConstants {
    fn default() -> Self {
        Self {
            m_empty: 42_600.0,
            m_pload: 19_900.0,
            g: 9.81,
            ra: 3_000.0,
        }
    }
}

/// Fuel mass `(M_empty + M_pload) (exp(SFC g Ra / (V F) 1e-3) - 1)`.
pub fn breguet(v: f64, f: f64, sfc: f64, c: &BreguetConstants) -> Result<f64> {
    if !(v > 0.0 && f > 0.0) {
        return Err(Error::Parameter(format!(
            "cruise speed and lift-to-drag ratio must be positive, got V={v}, F={f}"
        )));
    }
    Ok(breguet_unchecked(v, f, sfc, c))
}

fn breguet_unchecked(v: f64, f: f64, sfc: f64, c: &BreguetConstants) -> f64 {
    (c.m_empty + c.m_pload) * (sfc * c.g * c.ra / (v * f) * 1e-3).exp_m1()
}

/// Default input laws of the fuel-mass model, in the order (V, F, SFC).
pub fn breguet_inputs() -> Vec<InputDistribution> {
    vec![
        InputDistribution::Uniform { a: 226.0, b: 234.0 },
        InputDistribution::Beta {
            alpha: 7.0,
            beta: 2.0,
            a: 18.7,
            b: 19.05,
        },
        InputDistribution::ShiftedExponential {
            theta1: 17.23,
            theta2: 3.45,
        },
    ]
}

pub fn breguet_model(constants: BreguetConstants, inputs: Option<Vec<InputDistribution>>) -> Result<AnalyticModel> {
    let inputs = inputs.unwrap_or_else(breguet_inputs);
    if inputs.len() != 3 {
        return Err(Error::Parameter("the fuel-mass model has 3 inputs (V, F, SFC)".into()));
    }
    let spec = ModelSpec::new("breguet", inputs, move |x| {
        breguet_unchecked(x[0], x[1], x[2], &constants)
    })?;
    Ok(AnalyticModel::new(ModelKind::Breguet(constants), spec))
}

/// Independent inputs with finite supports and an output table.
///
/// Input `i` takes the category values `0..probs[i].len()`; `values` is the
/// output table in row-major order (last input fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteTable<T> {
    pub probs: Vec<Vec<T>>,
    pub values: Vec<T>,
}

/// Largest support the oracle agrees to enumerate.
pub const MAX_SUPPORT: usize = 1_000_000;

impl<T> DiscreteTable<T> {
    pub fn shape(&self) -> Vec<usize> {
        self.probs.iter().map(|p| p.len()).collect()
    }

    fn validate_shape(&self) -> Result<usize> {
        if self.probs.is_empty() || self.probs.iter().any(|p| p.is_empty()) {
            return Err(Error::Parameter("every input needs a non-empty support".into()));
        }
        let size = self
            .probs
            .iter()
            .try_fold(1usize, |acc, p| acc.checked_mul(p.len()))
            .filter(|&s| s <= MAX_SUPPORT)
            .ok_or_else(|| Error::Parameter(format!("support larger than {MAX_SUPPORT} tuples")))?;
        if size != self.values.len() {
            return Err(Error::Parameter(format!(
                "value table has {} entries, support has {size}",
                self.values.len()
            )));
        }
        Ok(size)
    }

    fn flat_index(shape: &[usize], idx: &[usize]) -> usize {
        idx.iter().zip(shape).fold(0, |acc, (i, s)| acc * s + i)
    }
}

impl<T: ToPrimitive + Clone> DiscreteTable<T> {
    /// Sampling model over category indices.
    pub fn to_model(&self) -> Result<ModelSpec> {
        self.validate_shape()?;
        let conv = |v: &T| {
            v.to_f64()
                .ok_or_else(|| Error::Parameter("value not representable".into()))
        };
        let inputs = self
            .probs
            .iter()
            .map(|p| {
                Ok(InputDistribution::Categorical {
                    probs: p.iter().map(conv).collect::<Result<_>>()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let values: Vec<f64> = self.values.iter().map(conv).collect::<Result<_>>()?;
        let shape = self.shape();
        ModelSpec::new("discrete", inputs, move |x| {
            let idx: Vec<usize> = x.iter().map(|v| *v as usize).collect();
            values[Self::flat_index(&shape, &idx)]
        })
    }
}

/// Sampling model for a float table, with every closed index filled in by
/// enumeration when there are at most 12 inputs.
pub fn discrete_model(table: &DiscreteTable<f64>) -> Result<AnalyticModel> {
    for p in &table.probs {
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter(format!("probabilities sum to {total}, not 1")));
        }
    }
    let spec = table.to_model()?;
    let mut m = AnalyticModel::new(ModelKind::Discrete, spec);
    let p = table.probs.len();
    if p <= 12 {
        for mask in 1u32..(1 << p) {
            let u: Vec<usize> = (1..=p).filter(|i| mask & (1 << (i - 1)) != 0).collect();
            let r = discrete_oracle(table, &u)?;
            if r.variance > 0.0 {
                m.mean = Some(r.mean);
                m.known_indices.insert(u, r.index());
            }
        }
    }
    let (lo, hi) = table
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    m.bound = Some(lo.abs().max(hi.abs()));
    Ok(m)
}

/// Both sides of `Var(E(Y | X_u)) = Cov(Y, Y^u)` computed by enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult<T> {
    pub mean: T,
    pub variance: T,
    /// `Var(E(Y | X_u))`, by grouping on the coordinates in `u`.
    pub var_cond_exp: T,
    /// `Cov(Y, Y^u)`, by enumerating pairs `(x, x')` that agree on `u`.
    pub cov_pick_freeze: T,
}

impl<T: Num + Clone> OracleResult<T> {
    pub fn index(&self) -> T {
        self.var_cond_exp.clone() / self.variance.clone()
    }
}

fn unravel(mut flat: usize, shape: &[usize], out: &mut [usize]) {
    for (o, s) in out.iter_mut().zip(shape).rev() {
        *o = flat % s;
        flat /= s;
    }
}

/// Exact closed-index ingredients of `u` (1-based) for a finite table.
pub fn discrete_oracle<T: Num + Clone>(table: &DiscreteTable<T>, u: &[usize]) -> Result<OracleResult<T>> {
    let size = table.validate_shape()?;
    let shape = table.shape();
    let p = shape.len();
    if u.is_empty() || u.iter().any(|&i| i == 0 || i > p) {
        return Err(Error::Design(format!(
            "subset {u:?} is not a non-empty subset of 1..{p}"
        )));
    }
    let frozen: Vec<bool> = (1..=p).map(|i| u.contains(&i)).collect();
    let prob = |idx: &[usize], mask: Option<bool>| {
        idx.iter().enumerate().fold(T::one(), |acc, (i, &v)| match mask {
            Some(m) if frozen[i] != m => acc,
            _ => acc * table.probs[i][v].clone(),
        })
    };
    let mut idx = vec![0; p];
    let mut mean = T::zero();
    let mut second = T::zero();
    for flat in 0..size {
        unravel(flat, &shape, &mut idx);
        let w = prob(&idx, None);
        let f = table.values[flat].clone();
        mean = mean + w.clone() * f.clone();
        second = second + w * f.clone() * f;
    }
    let variance = second - mean.clone() * mean.clone();

    // group by the frozen coordinates
    let u_shape: Vec<usize> = (0..p).filter(|&i| frozen[i]).map(|i| shape[i]).collect();
    let free_shape: Vec<usize> = (0..p).filter(|&i| !frozen[i]).map(|i| shape[i]).collect();
    let u_size: usize = u_shape.iter().product();
    let free_size: usize = free_shape.iter().product();
    let mut cond = vec![T::zero(); u_size];
    let mut u_prob = vec![T::zero(); u_size];
    let mut free_idx = vec![0; free_shape.len()];
    let mut u_idx = vec![0; u_shape.len()];
    for (g, slot) in cond.iter_mut().enumerate() {
        unravel(g, &u_shape, &mut u_idx);
        for h in 0..free_size {
            unravel(h, &free_shape, &mut free_idx);
            let (mut a, mut b) = (0, 0);
            for (i, v) in idx.iter_mut().enumerate() {
                if frozen[i] {
                    *v = u_idx[a];
                    a += 1;
                } else {
                    *v = free_idx[b];
                    b += 1;
                }
            }
            let flat = DiscreteTable::<T>::flat_index(&shape, &idx);
            *slot = slot.clone() + prob(&idx, Some(false)) * table.values[flat].clone();
        }
        u_prob[g] = prob(&idx, Some(true));
    }
    let var_cond_exp = cond
        .iter()
        .zip(&u_prob)
        .fold(T::zero(), |acc, (c, w)| acc + w.clone() * c.clone() * c.clone())
        - mean.clone() * mean.clone();

    // pairs (x, x') sharing the coordinates in u
    if size.saturating_mul(free_size) > 100_000_000 {
        return Err(Error::Parameter("too many pick-freeze pairs to enumerate".into()));
    }
    let mut cross = T::zero();
    let mut other = vec![0; p];
    for flat in 0..size {
        unravel(flat, &shape, &mut idx);
        let w = prob(&idx, None);
        let f = table.values[flat].clone();
        for h in 0..free_size {
            unravel(h, &free_shape, &mut free_idx);
            let mut b = 0;
            for i in 0..p {
                other[i] = if frozen[i] {
                    idx[i]
                } else {
                    b += 1;
                    free_idx[b - 1]
                };
            }
            let w2 = prob(&other, Some(false));
            let f2 = table.values[DiscreteTable::<T>::flat_index(&shape, &other)].clone();
            cross = cross + w.clone() * w2 * f.clone() * f2;
        }
    }
    let cov_pick_freeze = cross - mean.clone() * mean.clone();
    Ok(OracleResult {
        mean,
        variance,
        var_cond_exp,
        cov_pick_freeze,
    })
}
