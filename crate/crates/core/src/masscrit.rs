//! Closed-form blow-up analysis for the superlinear model: inequality constants,
//! energy bounds, the supercritical mass threshold and the blow-up time bound.
//!
//! With `K = c_alpha d_alpha + d_alpha^{-2}` and `eta = (alpha - 2)/2`, the energy obeys
//! `E' <= 2 sigma2 - Lambda / E^eta` once `Psi(mu) < 0`, where
//! `Lambda = 2 beta mu^alpha (1 - E0)^{3 alpha gamma / 2} / K^{3 alpha / 2}`.
//! Powers are taken in log form, since `(1 - E0)^{3 alpha gamma / 2}` underflows for large `gamma`.

use thiserror::Error;

use crate::grid::DensityField;
use crate::params::ModelParams;
use crate::stationary::{self, beta_exponents, StationaryError};

/// Constant of the weighted Nash inequality, `3^3 / 2^5`.
pub const NASH_CONSTANT: f64 = 27.0 / 32.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MasscritError {
    #[error("threshold requires alpha > 2 (got {0}); the subcritical regime has no blow-up threshold")]
    Subcritical(f64),
    #[error("energy must lie in (0, 1) (got {0})")]
    Energy(f64),
    #[error("mass must be nonnegative (got {0})")]
    Mass(f64),
    #[error("the linear model (beta = 0) has no mass threshold")]
    LinearModel,
    #[error("hypothesis violated: {0}")]
    Hypothesis(&'static str),
    #[error(transparent)]
    Stationary(#[from] StationaryError),
}

/// `(c_alpha, d_alpha)` for `alpha > 2`.
pub fn alpha_constants(alpha: f64) -> Result<(f64, f64), MasscritError> {
    if !(alpha > 2.0 && alpha.is_finite()) {
        return Err(MasscritError::Subcritical(alpha));
    }
    let c = (2.0 * alpha / (alpha - 2.0)).powf(alpha / (alpha + 1.0));
    let d = (2.0 * (alpha + 1.0) / (c * (alpha - 2.0))).cbrt();
    Ok((c, d))
}

/// `ln K^{3 alpha / 2}`.
fn ln_k_power(alpha: f64) -> Result<f64, MasscritError> {
    let (c, d) = alpha_constants(alpha)?;
    Ok(1.5 * alpha * (c * d + d.powi(-2)).ln())
}

fn check_energy(e: f64) -> Result<(), MasscritError> {
    if e > 0.0 && e < 1.0 {
        Ok(())
    } else {
        Err(MasscritError::Energy(e))
    }
}

fn check_mass(mu: f64) -> Result<(), MasscritError> {
    if mu >= 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(MasscritError::Mass(mu))
    }
}

/// Lower bound on `E` for any density of mass `mu` with `int f^2 = l2sq`:
/// `(2 sqrt 2)^4 mu^4 / (5^5 l2sq^2)`.
pub fn energy_floor(mu: f64, l2sq: f64) -> f64 {
    64.0 * mu.powi(4) / (3125.0 * l2sq * l2sq)
}

/// Lower bound on `int w^2 H^alpha f^{alpha+1}` in terms of mass and energy.
pub fn nonlinear_lower_bound(params: &ModelParams, mu: f64, e: f64) -> Result<f64, MasscritError> {
    check_energy(e)?;
    check_mass(mu)?;
    let a = params.alpha();
    let ln_k = ln_k_power(a)?;
    let eta = (a - 2.0) / 2.0;
    Ok(((a + 1.0) * mu.ln() + 1.5 * a * params.gamma() * (-e).ln_1p() - ln_k - eta * e.ln()).exp())
}

/// `(Lambda, eta)`.
pub fn lambda_eta(params: &ModelParams, mu: f64, e0: f64) -> Result<(f64, f64), MasscritError> {
    check_energy(e0)?;
    check_mass(mu)?;
    let a = params.alpha();
    let ln_k = ln_k_power(a)?;
    let ln_lambda = std::f64::consts::LN_2 + params.beta().ln() + a * mu.ln()
        + 1.5 * a * params.gamma() * (-e0).ln_1p()
        - ln_k;
    Ok((ln_lambda.exp(), (a - 2.0) / 2.0))
}

/// `Psi(mu) = 2 sigma2 - Lambda / E0^eta`.
pub fn psi(params: &ModelParams, mu: f64, e0: f64) -> Result<f64, MasscritError> {
    let (lambda, eta) = lambda_eta(params, mu, e0)?;
    Ok(2.0 * params.sigma2() - lambda * e0.powf(-eta))
}

/// Mass `mu_gamma` above which `Psi < 0`.
pub fn mass_threshold(params: &ModelParams, e0: f64) -> Result<f64, MasscritError> {
    check_energy(e0)?;
    let a = params.alpha();
    let ln_k = ln_k_power(a)?;
    if params.is_linear() {
        return Err(MasscritError::LinearModel);
    }
    let eta = (a - 2.0) / 2.0;
    let ln_mu_a = params.sigma2().ln() + ln_k + eta * e0.ln()
        - params.beta().ln()
        - 1.5 * a * params.gamma() * (-e0).ln_1p();
    Ok((ln_mu_a / a).exp())
}

/// Time by which the energy bound reaches zero, or `None` if `Lambda <= 2 sigma2 E0^eta`.
pub fn blowup_time_bound(params: &ModelParams, mu: f64, e0: f64) -> Result<Option<f64>, MasscritError> {
    let (lambda, eta) = lambda_eta(params, mu, e0)?;
    let gap = lambda - 2.0 * params.sigma2() * e0.powf(eta);
    Ok((gap > 0.0).then(|| e0.powf(eta + 1.0) / ((eta + 1.0) * gap)))
}

/// `E0 < (Lambda / (2 sigma2))^{1/eta}`.
pub fn small_energy_check(params: &ModelParams, mu: f64, e0: f64) -> Result<bool, MasscritError> {
    let (lambda, eta) = lambda_eta(params, mu, e0)?;
    Ok(e0.ln() < (lambda / (2.0 * params.sigma2())).ln() / eta)
}

fn check_linear_model(params: &ModelParams) -> Result<(), MasscritError> {
    if !params.is_linear() {
        return Err(MasscritError::Hypothesis("linear model (beta = 0) required"));
    }
    if params.gamma() != 1.0 {
        return Err(MasscritError::Hypothesis("H(w) = 1 - w^2 (gamma = 1) required"));
    }
    Ok(())
}

/// Uniform-in-time bound on `int f^2` for the linear model with `m = 0`, `sigma2 <= 1/2`.
pub fn l2_uniform_bound(params: &ModelParams, mu: f64, l2sq0: f64) -> Result<f64, MasscritError> {
    check_linear_model(params)?;
    if params.m() != 0.0 {
        return Err(MasscritError::Hypothesis("m = 0 required"));
    }
    let s2 = params.sigma2();
    if s2 > 0.5 {
        return Err(MasscritError::Hypothesis("sigma2 <= 1/2 required"));
    }
    check_mass(mu)?;
    let second = (NASH_CONSTANT * mu.powi(4) * (1.0 - 2.0 * s2) / (2.0 * s2)).sqrt();
    Ok(l2sq0.max(second))
}

/// Growth bound `l2sq0 e^{(1 - 2 sigma2) t}` for the linear model.
pub fn gronwall_bound(params: &ModelParams, l2sq0: f64, t: f64) -> Result<f64, MasscritError> {
    check_linear_model(params)?;
    Ok(l2sq0 * ((1.0 - 2.0 * params.sigma2()) * t).exp())
}

/// Terms of the Nash-type inequality `(int f^2)^3 <= C_N int (1 - w^2) f'^2 (int f)^4` on a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NashTerms {
    pub lhs: f64,
    /// Right-hand side without the constant: `int (1 - w^2) f'^2 (int f)^4`.
    pub dirichlet_mass4: f64,
}

impl NashTerms {
    /// Smallest constant for which the inequality holds on this density.
    pub fn required_constant(&self) -> f64 {
        self.lhs / self.dirichlet_mass4
    }
}

/// Midpoint sums with central-difference gradients (one-sided at the two end cells).
pub fn nash_terms(field: &DensityField) -> NashTerms {
    let grid = field.grid();
    let h = grid.cell_width();
    let f = field.values();
    let n = f.len();
    let mut dirichlet = 0.0;
    for (i, &w) in grid.centers().iter().enumerate() {
        let df = match (i, n) {
            (_, 1) => 0.0,
            (0, _) => (f[1] - f[0]) / h,
            (i, n) if i == n - 1 => (f[i] - f[i - 1]) / h,
            (i, _) => (f[i + 1] - f[i - 1]) / (2.0 * h),
        };
        dirichlet += (1.0 - w) * (1.0 + w) * df * df;
    }
    let l2: f64 = h * f.iter().map(|v| v * v).sum::<f64>();
    NashTerms {
        lhs: l2.powi(3),
        dirichlet_mass4: h * dirichlet * field.mass().powi(4),
    }
}

/// All threshold quantities for one `(params, E0, mu)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    pub params: ModelParams,
    pub e0: f64,
    pub mu: Option<f64>,
    pub a: f64,
    pub b: f64,
    pub c_bar: f64,
    /// Mass of the critical steady state; `None` when `tol` was not supplied.
    pub critical_mass: Option<f64>,
    pub c_alpha: f64,
    pub d_alpha: f64,
    pub eta: f64,
    pub mu_threshold: f64,
    pub lambda: Option<f64>,
    pub psi: Option<f64>,
    /// Present iff `Psi(mu) < 0`.
    pub t_bar: Option<f64>,
    pub small_energy_ok: Option<bool>,
}

impl ThresholdReport {
    /// Builds the report; mass-dependent fields are `None` when `mu` is.
    pub fn new(
        params: ModelParams,
        e0: f64,
        mu: Option<f64>,
        critical_mass_tol: Option<f64>,
    ) -> Result<Self, MasscritError> {
        let (c_alpha, d_alpha) = alpha_constants(params.alpha())?;
        let mu_threshold = mass_threshold(&params, e0)?;
        let exps = beta_exponents(&params);
        let c_bar = stationary::c_bar(&params)?;
        let critical_mass = critical_mass_tol
            .map(|tol| stationary::critical_mass(&params, tol))
            .transpose()?;
        let (mut lambda, mut psi_v, mut t_bar, mut small) = (None, None, None, None);
        if let Some(mu) = mu {
            lambda = Some(lambda_eta(&params, mu, e0)?.0);
            psi_v = Some(psi(&params, mu, e0)?);
            t_bar = blowup_time_bound(&params, mu, e0)?;
            small = Some(small_energy_check(&params, mu, e0)?);
        }
        Ok(Self {
            params,
            e0,
            mu,
            a: exps.a,
            b: exps.b,
            c_bar,
            critical_mass,
            c_alpha,
            d_alpha,
            eta: (params.alpha() - 2.0) / 2.0,
            mu_threshold,
            lambda,
            psi: psi_v,
            t_bar,
            small_energy_ok: small,
        })
    }
}
