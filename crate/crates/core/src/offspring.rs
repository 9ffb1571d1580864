//! Offspring generating polynomials.
//!
//! A branching particle that dies is replaced by `n` copies of itself with
//! probability `a_n`, so the offspring law is encoded by
//! `G(u) = a_0 + a_1 u + ... + a_d u^d` with non-negative coefficients
//! summing to one.
//!
//! Criticality is decided by the mean offspring number `G'(1)`. Reading the
//! classification off `G'(0) = a_1` instead would make the supercritical
//! class empty for every probabilistic `G`, and would label the binary
//! split/die model `(1 + u^2)/2` subcritical even though it is the standard
//! critical example.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on `sum(a_n) = 1`.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Tolerance on `G'(1) = 1` for the critical label.
pub const CRITICAL_TOLERANCE: f64 = 1e-12;

pub const DEFAULT_EXTINCTION_TOL: f64 = 1e-12;
pub const DEFAULT_EXTINCTION_MAX_ITER: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OffspringError {
    #[error("offspring polynomial needs at least one coefficient")]
    Empty,
    #[error("coefficient a_{0} is not finite")]
    NonFinite(usize),
    #[error("NegativeCoefficient: a_{0} = {1} < 0")]
    NegativeCoefficient(usize, f64),
    #[error("SumNotOne: coefficients sum to {0}")]
    SumNotOne(f64),
    #[error("NoConvergence: fixed-point iteration did not settle within {0} iterations")]
    NoConvergence(usize),
    #[error("NotDecomposable: {0}")]
    NotDecomposable(String),
}

/// Probability generating function of a finite offspring law.
///
/// Serializes as a JSON array indexed by offspring count, e.g. `[0.5, 0.0, 0.5]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct OffspringPolynomial {
    coeffs: Vec<f64>,
}

impl OffspringPolynomial {
    /// Validates `coeffs` and strips trailing zeros.
    pub fn new(coeffs: impl Into<Vec<f64>>) -> Result<Self, OffspringError> {
        let mut coeffs = coeffs.into();
        if coeffs.is_empty() {
            return Err(OffspringError::Empty);
        }
        for (n, &a) in coeffs.iter().enumerate() {
            if !a.is_finite() {
                return Err(OffspringError::NonFinite(n));
            }
            if a < 0.0 {
                return Err(OffspringError::NegativeCoefficient(n, a));
            }
        }
        let sum: f64 = coeffs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(OffspringError::SumNotOne(sum));
        }
        while coeffs.len() > 1 && coeffs[coeffs.len() - 1] == 0.0 {
            coeffs.pop();
        }
        Ok(Self { coeffs })
    }

    /// Die or split in two with equal probability: `G(u) = (1 + u^2) / 2`.
    pub fn binary() -> Self {
        Self {
            coeffs: vec![0.5, 0.0, 0.5],
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `G(u)` by Horner's rule.
    pub fn evaluate(&self, u: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &a| acc * u + a)
    }

    /// `G'(u)`.
    pub fn derivative(&self, u: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (n, &a)| acc * u + n as f64 * a)
    }

    /// Mean number of offspring, `G'(1) = sum(n a_n)`.
    pub fn mean_offspring(&self) -> f64 {
        self.derivative(1.0)
    }

    pub fn classify(&self) -> Criticality {
        Criticality::from_mean(self.mean_offspring())
    }

    /// Least fixed point of `G` on `[0, 1]` with the default tolerance.
    pub fn extinction(&self) -> Result<f64, OffspringError> {
        self.extinction_probability(DEFAULT_EXTINCTION_TOL, DEFAULT_EXTINCTION_MAX_ITER)
    }

    /// Least fixed point of `G(q) = q` on `[0, 1]`.
    ///
    /// Iterates Newton's method on `h(q) = G(q) - q` from `q = 0`. `h` is
    /// convex with `h(0) = a_0 >= 0`, so the iterates increase monotonically
    /// to the least root, like the functional iteration `q <- G(q)` but
    /// without its sublinear crawl in the critical case. `h` is evaluated in
    /// the deflated form `(q - 1) K(q)` so that the double root at 1 in the
    /// critical case does not drown in cancellation.
    pub fn extinction_probability(&self, tol: f64, max_iter: usize) -> Result<f64, OffspringError> {
        let a0 = self.coeffs[0];
        if a0 == 0.0 {
            return Ok(0.0);
        }
        let deflated = self.deflated();
        let mut q = 0.0_f64;
        for _ in 0..max_iter {
            let k = eval_poly(&deflated, q);
            let dk = eval_poly_derivative(&deflated, q);
            let h = (q - 1.0) * k;
            let dh = k + (q - 1.0) * dk;
            if h <= 0.0 || dh >= 0.0 {
                // Rounding put us at (or past) the root.
                return Ok(q.min(1.0));
            }
            let next = (q - h / dh).min(1.0);
            if (next - q).abs() < tol {
                // No root of K between here and 1 means the root is 1 itself.
                if 1.0 - next < 10.0 * tol && eval_poly(&deflated, next.min(1.0)) <= 0.0 {
                    return Ok(1.0);
                }
                return Ok(next);
            }
            q = next;
        }
        Err(OffspringError::NoConvergence(max_iter))
    }

    /// Coefficients of `K(q) = (G(q) - q) / (q - 1)`, exact up to rounding
    /// because `G(1) = 1`.
    fn deflated(&self) -> Vec<f64> {
        let mut h = self.coeffs.clone();
        if h.len() < 2 {
            h.resize(2, 0.0);
        }
        h[1] -= 1.0;
        // Synthetic division by (q - 1), highest degree first.
        let d = h.len() - 1;
        let mut k = vec![0.0; d];
        let mut carry = 0.0;
        for n in (1..=d).rev() {
            carry += h[n];
            k[n - 1] = carry;
        }
        k
    }

    /// Samples an offspring count from a uniform variate in `[0, 1)`.
    pub fn sample_count(&self, uniform: f64) -> usize {
        let mut acc = 0.0;
        for (n, &a) in self.coeffs.iter().enumerate() {
            acc += a;
            if uniform < acc {
                return n;
            }
        }
        // Sum may fall a hair short of 1; give the remainder to the top degree.
        self.degree()
    }
}

impl TryFrom<Vec<f64>> for OffspringPolynomial {
    type Error = OffspringError;

    fn try_from(coeffs: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(coeffs)
    }
}

impl From<OffspringPolynomial> for Vec<f64> {
    fn from(g: OffspringPolynomial) -> Self {
        g.coeffs
    }
}

fn eval_poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn eval_poly_derivative(coeffs: &[f64], x: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (n, &a)| acc * x + n as f64 * a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Regime::Subcritical => "Subcritical",
            Regime::Critical => "Critical",
            Regime::Supercritical => "Supercritical",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Criticality {
    pub regime: Regime,
    pub mean_offspring: f64,
}

impl Criticality {
    pub fn from_mean(mean_offspring: f64) -> Self {
        let regime = if (mean_offspring - 1.0).abs() <= CRITICAL_TOLERANCE {
            Regime::Critical
        } else if mean_offspring < 1.0 {
            Regime::Subcritical
        } else {
            Regime::Supercritical
        };
        Self {
            regime,
            mean_offspring,
        }
    }

    /// Critical or subcritical: almost-sure extinction for non-degenerate laws.
    pub fn dies_out(&self) -> bool {
        self.regime != Regime::Supercritical
    }
}

/// Reaction term `F(u) = sum f_n u^n` of `u_t = u_xx / 2 + F(u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactionPolynomial {
    pub coeffs: Vec<f64>,
    /// Branching rate to use; chosen automatically when absent.
    pub lambda: Option<f64>,
}

impl ReactionPolynomial {
    pub fn new(coeffs: impl Into<Vec<f64>>) -> Self {
        Self {
            coeffs: coeffs.into(),
            lambda: None,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn evaluate(&self, u: f64) -> f64 {
        eval_poly(&self.coeffs, u)
    }
}

/// Writes `F(u)` as `lambda (G(u) - u)` with `G` probabilistic.
///
/// Coefficientwise `a_n = f_n / lambda` for `n != 1` and
/// `a_1 = 1 + f_1 / lambda`. Without a supplied rate the smallest `lambda`
/// keeping every `a_n` in `[0, 1]` is used.
pub fn decompose_reaction(
    reaction: &ReactionPolynomial,
) -> Result<(f64, OffspringPolynomial), OffspringError> {
    let f = &reaction.coeffs;
    if f.is_empty() {
        return Err(OffspringError::NotDecomposable(
            "empty reaction polynomial".into(),
        ));
    }
    if let Some(n) = f.iter().position(|c| !c.is_finite()) {
        return Err(OffspringError::NonFinite(n));
    }
    let scale = f.iter().fold(1.0_f64, |m, c| m.max(c.abs()));
    let at_one = reaction.evaluate(1.0);
    if at_one.abs() > SUM_TOLERANCE * scale {
        return Err(OffspringError::NotDecomposable(format!(
            "F(1) = {at_one} but G(1) = 1 forces F(1) = 0"
        )));
    }
    let f1 = f.get(1).copied().unwrap_or(0.0);
    if f1 > 0.0 {
        return Err(OffspringError::NotDecomposable(format!(
            "linear coefficient f_1 = {f1} > 0"
        )));
    }
    for (n, &c) in f.iter().enumerate() {
        if n != 1 && c < 0.0 {
            return Err(OffspringError::NotDecomposable(format!(
                "coefficient f_{n} = {c} < 0"
            )));
        }
    }
    let lambda = match reaction.lambda {
        Some(l) => {
            if !(l > 0.0) || l < -f1 {
                return Err(OffspringError::NotDecomposable(format!(
                    "rate {l} must be positive and at least -f_1 = {}",
                    -f1
                )));
            }
            l
        }
        None => {
            let top = f
                .iter()
                .enumerate()
                .filter(|&(n, _)| n != 1)
                .fold(-f1, |m, (_, &c)| m.max(c));
            if top <= 0.0 {
                return Err(OffspringError::NotDecomposable(
                    "zero reaction needs an explicit rate".into(),
                ));
            }
            top
        }
    };
    let mut a: Vec<f64> = f.iter().map(|c| c / lambda).collect();
    if a.len() < 2 {
        a.resize(2, 0.0);
    }
    a[1] += 1.0;
    // f_1 / lambda + 1 can round to a tiny negative.
    if a[1] < 0.0 && a[1] > -SUM_TOLERANCE {
        a[1] = 0.0;
    }
    Ok((lambda, OffspringPolynomial::new(a)?))
}

/// Coefficients of `lambda (G(u) - u)`.
pub fn recompose_reaction(lambda: f64, g: &OffspringPolynomial) -> Vec<f64> {
    let mut f: Vec<f64> = g.coeffs().iter().map(|a| lambda * a).collect();
    if f.len() < 2 {
        f.resize(2, 0.0);
    }
    f[1] -= lambda;
    f
}
