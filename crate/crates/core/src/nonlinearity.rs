//! Polynomial nonlinearities `g(s) = alpha s^gamma`, `f(s) = lambda s^sigma`
//! and the derived scalar functions used by the phase/amplitude systems.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Real polynomial in ascending-power coefficient form.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn monomial(coeff: f64, power: u32) -> Self {
        let mut coeffs = vec![0.0; power as usize + 1];
        coeffs[power as usize] = coeff;
        Self::new(coeffs)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// Horner evaluation.
    pub fn eval(&self, s: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c)
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() == 1 {
            return Self::new(vec![0.0]);
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    /// Antiderivative vanishing at zero.
    pub fn antiderivative(&self) -> Self {
        let mut out = vec![0.0];
        out.extend(self.coeffs.iter().enumerate().map(|(k, &c)| c / (k + 1) as f64));
        Self::new(out)
    }

    /// `p(s) / s`, assuming `p(0) = 0`.
    pub fn divided_by_argument(&self) -> Self {
        debug_assert_eq!(self.coeffs[0], 0.0);
        if self.coeffs.len() == 1 {
            return Self::new(vec![0.0]);
        }
        Self::new(self.coeffs[1..].to_vec())
    }

    /// `s * p(s)`.
    pub fn times_argument(&self) -> Self {
        let mut out = vec![0.0];
        out.extend_from_slice(&self.coeffs);
        Self::new(out)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(self.coeffs.iter().map(|v| v * c).collect())
    }

    pub fn sub(&self, other: &Polynomial) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        Self::new(
            (0..len)
                .map(|k| self.coeffs.get(k).unwrap_or(&0.0) - other.coeffs.get(k).unwrap_or(&0.0))
                .collect(),
        )
    }
}

/// `(alpha, gamma, lambda, sigma)` together with every derived polynomial.
#[derive(Clone, Debug, PartialEq)]
pub struct NonlinearitySpec {
    alpha: f64,
    gamma: u32,
    lambda: f64,
    sigma: u32,
    g: Polynomial,
    g_prime: Polynomial,
    g_second: Polynomial,
    f: Polynomial,
    f_prime: Polynomial,
    h: Polynomial,
    q: Polynomial,
}

impl NonlinearitySpec {
    pub fn new(alpha: f64, gamma: u32, lambda: f64, sigma: u32) -> Result<Self> {
        if gamma < 1 || sigma < 1 {
            return Err(Error::InvalidExponent { gamma, sigma });
        }
        let g = Polynomial::monomial(alpha, gamma);
        let f = Polynomial::monomial(lambda, sigma);
        let g_prime = g.derivative();
        // Q(rho) = rho g(rho) - (1/2) int_0^rho g
        let q = g.times_argument().sub(&g.antiderivative().scaled(0.5));
        Ok(Self {
            alpha,
            gamma,
            lambda,
            sigma,
            g_second: g_prime.derivative(),
            h: g.divided_by_argument(),
            f_prime: f.derivative(),
            g_prime,
            g,
            f,
            q,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> u32 {
        self.gamma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn sigma(&self) -> u32 {
        self.sigma
    }

    // Unchecked evaluations for solver inner loops, where the argument is
    // always a squared modulus.

    pub fn g(&self, s: f64) -> f64 {
        self.g.eval(s)
    }

    pub fn g_prime(&self, s: f64) -> f64 {
        self.g_prime.eval(s)
    }

    pub fn g_second(&self, s: f64) -> f64 {
        self.g_second.eval(s)
    }

    pub fn f(&self, s: f64) -> f64 {
        self.f.eval(s)
    }

    pub fn f_prime(&self, s: f64) -> f64 {
        self.f_prime.eval(s)
    }

    /// `g(s) / s` in polynomial form, finite at zero.
    pub fn h(&self, s: f64) -> f64 {
        self.h.eval(s)
    }

    pub fn q(&self, rho: f64) -> f64 {
        self.q.eval(rho)
    }

    pub fn eval_g(&self, s: f64) -> Result<f64> {
        check(s).map(|s| self.g(s))
    }

    pub fn eval_g_prime(&self, s: f64) -> Result<f64> {
        check(s).map(|s| self.g_prime(s))
    }

    pub fn eval_g_second(&self, s: f64) -> Result<f64> {
        check(s).map(|s| self.g_second(s))
    }

    pub fn eval_f(&self, s: f64) -> Result<f64> {
        check(s).map(|s| self.f(s))
    }

    pub fn eval_f_prime(&self, s: f64) -> Result<f64> {
        check(s).map(|s| self.f_prime(s))
    }

    pub fn eval_h(&self, s: f64) -> Result<f64> {
        check(s).map(|s| self.h(s))
    }

    pub fn eval_q(&self, rho: f64) -> Result<f64> {
        check(rho).map(|r| self.q(r))
    }

    /// `g(|a + delta|^2) - g(|a|^2) - 2 g'(|a|^2) Re(conj(a) delta)`.
    pub fn taylor_remainder_g(&self, a: Complex64, delta: Complex64) -> f64 {
        let base = a.norm_sqr();
        self.g((a + delta).norm_sqr()) - self.g(base) - 2.0 * self.g_prime(base) * (a.conj() * delta).re
    }
}

fn check(s: f64) -> Result<f64> {
    if s < 0.0 || s.is_nan() {
        Err(Error::NegativeArgument(s))
    } else {
        Ok(s)
    }
}
