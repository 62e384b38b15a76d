use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical and variational parameters of
/// `eps^{2 alpha} (-Δ)_ρ^α u + u = λ u^q + u^{2*_α - 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProblemParams {
    pub n: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub q: f64,
    pub eps: f64,
}

impl Default for ProblemParams {
    fn default() -> Self {
        Self::desk_default()
    }
}

impl ProblemParams {
    pub fn new(n: usize, alpha: f64, lambda: f64, q: f64, eps: f64) -> Result<Self> {
        let params = ProblemParams {
            n,
            alpha,
            lambda,
            q,
            eps,
        };
        params.validate()?;
        Ok(params)
    }

    /// Desk-scale default: n = 1, α = 0.4 (so 2*_α = 10), λ = 10, q = 3, ε = 1.
    pub fn desk_default() -> Self {
        ProblemParams {
            n: 1,
            alpha: 0.4,
            lambda: 10.0,
            q: 3.0,
            eps: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::validation("n", "dimension must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::validation("alpha", format!("{} is not in (0, 1)", self.alpha)));
        }
        if 2.0 * self.alpha >= self.n as f64 {
            return Err(Error::validation(
                "alpha",
                format!("2 alpha = {} must be below n = {}", 2.0 * self.alpha, self.n),
            ));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::validation("lambda", format!("{} must be positive", self.lambda)));
        }
        let upper = self.crit_exp() - 1.0;
        if !(self.q > 1.0 && self.q < upper) {
            return Err(Error::validation(
                "q",
                format!("{} is not in (1, {upper})", self.q),
            ));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::validation("eps", format!("{} must be positive", self.eps)));
        }
        Ok(())
    }

    /// Critical Sobolev exponent 2n / (n - 2α).
    pub fn crit_exp(&self) -> f64 {
        crit_exp(self.n, self.alpha)
    }

    /// `α / n`, equal to `1/2 - 1/2*_α`.
    pub fn nehari_coefficient(&self) -> f64 {
        self.alpha / self.n as f64
    }

    /// Energy threshold `(α/n) S^{n/(2α)}` for a given Sobolev constant.
    pub fn critical_level(&self, sobolev: f64) -> f64 {
        self.nehari_coefficient() * sobolev.powf(self.n as f64 / (2.0 * self.alpha))
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }
}

pub fn crit_exp(n: usize, alpha: f64) -> f64 {
    let n = n as f64;
    2.0 * n / (n - 2.0 * alpha)
}

/// Measure of the unit sphere `S^{n-1}`, with the counting convention `|S^0| = 2`.
pub fn sphere_measure(n: usize) -> Result<f64> {
    match n {
        0 => Err(Error::domain("sphere measure needs n >= 1")),
        1 => Ok(2.0),
        2 => Ok(2.0 * PI),
        // |S^{n+1}| = 2π/n |S^{n-1}|
        _ => Ok(2.0 * PI / (n - 2) as f64 * sphere_measure(n - 2)?),
    }
}
