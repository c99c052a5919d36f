//! Model parameters shared by every solver in the crate.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("sigma2 must be positive (got {0})")]
    Sigma2(f64),
    #[error("m must lie in (-1,1) (got {0})")]
    Mean(f64),
    #[error("beta must be nonnegative (got {0})")]
    Beta(f64),
    #[error("alpha must be positive (got {0})")]
    Alpha(f64),
    #[error("gamma must be at least 1 (got {0})")]
    Gamma(f64),
}

/// The tuple `(sigma2, m, beta, alpha, gamma)` of the drift–diffusion model
///
/// `df/dt = d/dw [ (w - m) J(f) + sigma2 d/dw (H f) ]`, with `H(w) = (1 - w^2)^gamma`
/// and `J(f) = f (1 + beta (H f)^alpha)`.
///
/// `beta = 0` is the linear model `J(f) = f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    sigma2: f64,
    m: f64,
    beta: f64,
    alpha: f64,
    gamma: f64,
}

impl ModelParams {
    pub fn new(sigma2: f64, m: f64, beta: f64, alpha: f64, gamma: f64) -> Result<Self, ParamError> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(ParamError::Sigma2(sigma2));
        }
        if !(m > -1.0 && m < 1.0) {
            return Err(ParamError::Mean(m));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(ParamError::Beta(beta));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(ParamError::Alpha(alpha));
        }
        if !(gamma >= 1.0 && gamma.is_finite()) {
            return Err(ParamError::Gamma(gamma));
        }
        Ok(Self {
            sigma2,
            m,
            beta,
            alpha,
            gamma,
        })
    }

    /// Linear model with `H(w) = 1 - w^2`.
    pub fn linear(sigma2: f64, m: f64) -> Result<Self, ParamError> {
        Self::new(sigma2, m, 0.0, 1.0, 1.0)
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn is_linear(&self) -> bool {
        self.beta == 0.0
    }

    /// `Some(k)` when gamma is an integer.
    pub fn integer_gamma(&self) -> Option<u32> {
        if self.gamma.fract() == 0.0 && self.gamma <= f64::from(u32::MAX) {
            Some(self.gamma as u32)
        } else {
            None
        }
    }

    pub fn with_sigma2(self, sigma2: f64) -> Result<Self, ParamError> {
        Self::new(sigma2, self.m, self.beta, self.alpha, self.gamma)
    }

    pub fn with_m(self, m: f64) -> Result<Self, ParamError> {
        Self::new(self.sigma2, m, self.beta, self.alpha, self.gamma)
    }

    pub fn with_beta(self, beta: f64) -> Result<Self, ParamError> {
        Self::new(self.sigma2, self.m, beta, self.alpha, self.gamma)
    }

    pub fn with_alpha(self, alpha: f64) -> Result<Self, ParamError> {
        Self::new(self.sigma2, self.m, self.beta, alpha, self.gamma)
    }

    pub fn with_gamma(self, gamma: f64) -> Result<Self, ParamError> {
        Self::new(self.sigma2, self.m, self.beta, self.alpha, gamma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_each_constraint() {
        assert_eq!(ModelParams::new(0.0, 0.0, 1.0, 3.0, 1.0), Err(ParamError::Sigma2(0.0)));
        assert_eq!(ModelParams::new(0.1, 1.0, 1.0, 3.0, 1.0), Err(ParamError::Mean(1.0)));
        assert_eq!(ModelParams::new(0.1, -1.5, 1.0, 3.0, 1.0), Err(ParamError::Mean(-1.5)));
        assert_eq!(ModelParams::new(0.1, 0.0, -1.0, 3.0, 1.0), Err(ParamError::Beta(-1.0)));
        assert_eq!(ModelParams::new(0.1, 0.0, 1.0, 0.0, 1.0), Err(ParamError::Alpha(0.0)));
        assert_eq!(ModelParams::new(0.1, 0.0, 1.0, 3.0, 0.5), Err(ParamError::Gamma(0.5)));
        assert!(ModelParams::new(f64::NAN, 0.0, 1.0, 3.0, 1.0).is_err());
    }

    #[test]
    fn integer_gamma_detection() {
        let p = ModelParams::new(0.1, 0.0, 1.0, 3.0, 10.0).unwrap();
        assert_eq!(p.integer_gamma(), Some(10));
        assert_eq!(p.with_gamma(2.5).unwrap().integer_gamma(), None);
        assert!(ModelParams::linear(0.025, 0.0).unwrap().is_linear());
    }
}
