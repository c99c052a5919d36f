//! Closed-form steady states, the critical constant and the critical mass.
//!
//! Writing `g = H f`, the zero-flux condition `(w - m) f (1 + beta g^alpha) + sigma2 g' = 0`
//! integrates to
//!
//! ```text
//! f_C(w) = C e^{-V(w)/sigma2} / ( H(w) (1 - beta C^alpha e^{-alpha V(w)/sigma2})^{1/alpha} ),
//! V'(w) = (w - m) / (1 - w^2)^gamma.
//! ```
//!
//! `V` attains its minimum at `w = m`, so the denominator stays positive exactly when
//! `C <= C_bar = beta^{-1/alpha} e^{V(m)/sigma2}`. For `gamma = 1` we fix the additive
//! constant so that `e^{-V/sigma2} = (1 + w)^{a+1} (1 - w)^{b+1}`.
//!
//! Everything is evaluated in log form around `w = m`: with `u = w - m` and the gap
//! `D(u) = V(m + u) - V(m) >= 0`,
//!
//! ```text
//! ln f = ln C - V(m)/sigma2 - D/sigma2 - ln H - (1/alpha) ln(1 - e^{-alpha (D/sigma2 - ln(C/C_bar))}).
//! ```
//!
//! `D` is computed without cancellation, so the critical profile keeps full relative
//! accuracy as `u -> 0`, where it blows up like `|u|^{-2/alpha}`.

use std::sync::Arc;

use statrs::function::beta::ln_beta;
use thiserror::Error;

use crate::grid::{self, DensityField, Grid, GridError};
use crate::params::ModelParams;
use crate::quadrature::{self, QuadratureError, QuadratureOptions};
use crate::special::{exprel, ln_1p_minus_x_over_sq, ln_one_minus_exp_neg};

/// Relative tolerance for declaring `C = C_bar`.
pub const CRITICAL_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StationaryError {
    #[error("point {0} outside the open interval (-1, 1)")]
    Domain(f64),
    #[error("the linear model (beta = 0) has no critical constant")]
    LinearModel,
    #[error("constant {c} exceeds the critical constant {c_bar}")]
    AboveCritical { c: f64, c_bar: f64 },
    #[error("constant must be positive (got {0})")]
    NonPositiveConstant(f64),
    #[error("the critical profile is singular at w = m = {0}")]
    Singular(f64),
    #[error("{0} requires an integer gamma >= {1} (got {2})")]
    Gamma(&'static str, u32, f64),
    #[error("target mass {target} is not below the critical mass {critical}")]
    AboveCriticalMass { target: f64, critical: f64 },
    #[error("target mass must be positive (got {0})")]
    NonPositiveMass(f64),
    #[error("mass bisection did not converge: last mass {mass} for target {target}")]
    Bisection { mass: f64, target: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaExponents {
    pub a: f64,
    pub b: f64,
}

/// `a = -1 + (1 + m)/(2 sigma2)`, `b = -1 + (1 - m)/(2 sigma2)`.
pub fn beta_exponents(params: &ModelParams) -> BetaExponents {
    let s2 = params.sigma2();
    BetaExponents {
        a: -1.0 + (1.0 + params.m()) / (2.0 * s2),
        b: -1.0 + (1.0 - params.m()) / (2.0 * s2),
    }
}

/// Beta-type equilibrium of the linear model with `H = 1 - w^2`, normalised to mass `mu`.
pub fn beta_equilibrium(params: &ModelParams, mu: f64, w: f64) -> Result<f64, StationaryError> {
    let BetaExponents { a, b } = beta_exponents(params);
    if w.abs() > 1.0 || (w.abs() == 1.0 && (a < 0.0 || b < 0.0)) {
        return Err(StationaryError::Domain(w));
    }
    let ln_norm = (a + b + 1.0) * std::f64::consts::LN_2 + ln_beta(a + 1.0, b + 1.0);
    let term = |e: f64, x: f64| if e == 0.0 { 0.0 } else { e * x.ln_1p() };
    Ok(mu * (term(a, w) + term(b, -w) - ln_norm).exp())
}

/// Primitive of `(1 - w^2)^{-gamma}` vanishing at `w = 0`, by the upward recursion
/// `I_{k+1} = ((2k - 1) I_k + w (1 - w^2)^{-k}) / (2k)` from `I_1 = artanh(w)`.
pub fn i_gamma(gamma: u32, w: f64) -> Result<f64, StationaryError> {
    if gamma == 0 {
        return Err(StationaryError::Gamma("i_gamma", 1, 0.0));
    }
    if !(w.abs() < 1.0) {
        return Err(StationaryError::Domain(w));
    }
    let one_minus = (1.0 - w) * (1.0 + w);
    let mut value = w.atanh();
    let mut pow = one_minus;
    for k in 1..gamma {
        let k = f64::from(k);
        value = ((2.0 * k - 1.0) * value + w / pow) / (2.0 * k);
        pow *= one_minus;
    }
    Ok(value)
}

/// Same primitive for real `gamma`, by quadrature.
fn i_gamma_real(gamma: f64, w: f64) -> Result<f64, StationaryError> {
    if w == 0.0 {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if w > 0.0 { (0.0, w, 1.0) } else { (w, 0.0, -1.0) };
    let opts = QuadratureOptions {
        tol: 1e-14,
        ..QuadratureOptions::default()
    };
    let r = quadrature::integrate(|s| (-grid::ln_weight(gamma, s)).exp(), lo, hi, &[], &opts)?;
    Ok(sign * r.value)
}

/// `V(w) = (1 - w^2)^{1-gamma} / (2 (gamma - 1)) - m I_gamma(w)` for integer `gamma >= 2`.
pub fn potential_v(params: &ModelParams, w: f64) -> Result<f64, StationaryError> {
    let k = params
        .integer_gamma()
        .filter(|&k| k >= 2)
        .ok_or(StationaryError::Gamma("potential_v", 2, params.gamma()))?;
    if !(w.abs() < 1.0) {
        return Err(StationaryError::Domain(w));
    }
    let g = params.gamma();
    let first = (-(g - 1.0) * grid::ln_weight(1.0, w)).exp() / (2.0 * (g - 1.0));
    Ok(first - params.m() * i_gamma(k, w)?)
}

/// `V(m)`, with the additive constant convention of this module.
fn potential_at_mean(params: &ModelParams) -> Result<f64, StationaryError> {
    let m = params.m();
    let g = params.gamma();
    if g == 1.0 {
        return Ok(-0.5 * ((1.0 + m) * m.ln_1p() + (1.0 - m) * (-m).ln_1p()));
    }
    if m == 0.0 {
        return Ok(1.0 / (2.0 * (g - 1.0)));
    }
    match params.integer_gamma() {
        Some(_) => potential_v(params, m),
        None => {
            let first = (-(g - 1.0) * grid::ln_weight(1.0, m)).exp() / (2.0 * (g - 1.0));
            Ok(first - m * i_gamma_real(g, m)?)
        }
    }
}

/// Logarithm of the potential gap `D(u) = V(m + u) - V(m)` for `u != 0`.
///
/// Returns `+inf` where `D` exceeds the floating-point range (the density underflows there).
fn ln_gap(params: &ModelParams, u: f64) -> f64 {
    let m = params.m();
    let g = params.gamma();
    let ln_u2 = 2.0 * u.abs().ln();
    if m == 0.0 {
        // D = -L/2 * exprel(-(gamma - 1) L) with L = ln(1 - u^2).
        let y = u * u;
        let ln_neg_l = if y < 1e-3 {
            ln_u2 + (1.0 - ln_1p_minus_x_over_sq(-y) * y).ln()
        } else {
            (-(-y).ln_1p()).ln()
        };
        let z = -(g - 1.0) * (-y).ln_1p();
        let ln_exprel = if z > 700.0 { z - z.ln() } else { exprel(z).ln() };
        return ln_neg_l - std::f64::consts::LN_2 + ln_exprel;
    }
    if g == 1.0 {
        // D / u^2 = -(q(u/(1+m)) / (1+m) + q(-u/(1-m)) / (1-m)) / 2, q(x) = (ln(1+x) - x)/x^2.
        let ratio = -0.5
            * (ln_1p_minus_x_over_sq(u / (1.0 + m)) / (1.0 + m)
                + ln_1p_minus_x_over_sq(-u / (1.0 - m)) / (1.0 - m));
        return ln_u2 + ratio.ln();
    }
    // D / u^2 = int_0^1 t (1 - (m + u t)^2)^{-gamma} dt.
    let opts = QuadratureOptions {
        tol: 1e-13,
        max_intervals: 400,
    };
    let integrand = |t: f64| t * (-grid::ln_weight(g, m + u * t)).exp();
    match quadrature::integrate(integrand, 0.0, 1.0, &[], &opts) {
        Ok(r) if r.value > 0.0 => ln_u2 + r.value.ln(),
        _ => f64::INFINITY,
    }
}

/// `log(exp(x) + exp(y))`.
fn ln_add_exp(x: f64, y: f64) -> f64 {
    let (hi, lo) = if x > y { (x, y) } else { (y, x) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

/// Steady state with a fixed normalisation constant, evaluated in log form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    params: ModelParams,
    ln_c: f64,
    v_m: f64,
    /// `ln(C / C_bar) <= 0`; `None` for the linear model.
    ln_ratio: Option<f64>,
}

impl SteadyState {
    /// Steady state with constant `c`. For `beta > 0`, `c` may exceed `C_bar` by at
    /// most the relative tolerance [`CRITICAL_RTOL`], and is snapped to `C_bar` within it.
    pub fn new(params: ModelParams, c: f64) -> Result<Self, StationaryError> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(StationaryError::NonPositiveConstant(c));
        }
        Self::from_ln_constant(params, c.ln())
    }

    pub fn from_ln_constant(params: ModelParams, ln_c: f64) -> Result<Self, StationaryError> {
        let v_m = potential_at_mean(&params)?;
        if params.is_linear() {
            return Ok(Self {
                params,
                ln_c,
                v_m,
                ln_ratio: None,
            });
        }
        let ln_c_bar = -params.beta().ln() / params.alpha() + v_m / params.sigma2();
        let mut ln_ratio = ln_c - ln_c_bar;
        if ln_ratio > CRITICAL_RTOL.ln_1p() {
            return Err(StationaryError::AboveCritical {
                c: ln_c.exp(),
                c_bar: ln_c_bar.exp(),
            });
        }
        if ln_ratio.abs() <= CRITICAL_RTOL {
            ln_ratio = 0.0;
        }
        Ok(Self {
            params,
            ln_c: ln_ratio + ln_c_bar,
            v_m,
            ln_ratio: Some(ln_ratio),
        })
    }

    /// The critical steady state `C = C_bar`.
    pub fn critical(params: ModelParams) -> Result<Self, StationaryError> {
        Self::from_ln_constant(params, ln_c_bar(&params)?)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn constant(&self) -> f64 {
        self.ln_c.exp()
    }

    pub fn ln_constant(&self) -> f64 {
        self.ln_c
    }

    pub fn is_critical(&self) -> bool {
        self.ln_ratio == Some(0.0)
    }

    /// `ln f` at `w = m + u`.
    pub fn ln_density_at_offset(&self, u: f64) -> Result<f64, StationaryError> {
        let p = &self.params;
        let w = p.m() + u;
        if !(w.abs() < 1.0) {
            return Err(StationaryError::Domain(w));
        }
        if u == 0.0 {
            if self.is_critical() {
                return Err(StationaryError::Singular(p.m()));
            }
            let base = self.ln_c - self.v_m / p.sigma2() - grid::ln_weight(p.gamma(), w);
            return Ok(match self.ln_ratio {
                None => base,
                Some(r) => base - ln_one_minus_exp_neg(-p.alpha() * r) / p.alpha(),
            });
        }
        let s2 = p.sigma2();
        let ln_d = ln_gap(p, u);
        let d = ln_d.exp();
        let base = self.ln_c - self.v_m / s2 - d / s2 - grid::ln_weight(p.gamma(), w);
        let Some(ln_ratio) = self.ln_ratio else {
            return Ok(base);
        };
        let alpha = p.alpha();
        // A = alpha (D/sigma2 - ln r) >= 0; ln(1 - e^{-A}).
        let big_a = alpha * (d / s2 - ln_ratio);
        let ln_den = if big_a < 1e-200 {
            let ln_neg_r = if ln_ratio < 0.0 {
                (-ln_ratio).ln()
            } else {
                f64::NEG_INFINITY
            };
            alpha.ln() + ln_add_exp(ln_d - s2.ln(), ln_neg_r)
        } else {
            ln_one_minus_exp_neg(big_a)
        };
        Ok(base - ln_den / alpha)
    }

    pub fn ln_density(&self, w: f64) -> Result<f64, StationaryError> {
        self.ln_density_at_offset(w - self.params.m())
    }

    pub fn density(&self, w: f64) -> Result<f64, StationaryError> {
        self.ln_density(w).map(f64::exp)
    }

    /// `1 - beta C^alpha e^{-alpha V(m+u)/sigma2}`, the denominator raised to `alpha`.
    pub fn denominator_at_offset(&self, u: f64) -> Result<f64, StationaryError> {
        let ln_ratio = self.ln_ratio.ok_or(StationaryError::LinearModel)?;
        let p = &self.params;
        let d = ln_gap(p, u).exp();
        Ok(-(p.alpha() * (ln_ratio - d / p.sigma2())).exp_m1())
    }

    /// `int_I f`, integrating in the offset variable with a breakpoint at `w = m`.
    pub fn mass(&self, tol: f64) -> Result<f64, StationaryError> {
        let m = self.params.m();
        let opts = QuadratureOptions {
            tol,
            ..QuadratureOptions::default()
        };
        // Nodes that round onto an end point carry no weight.
        let r = quadrature::integrate(
            |u| match self.ln_density_at_offset(u) {
                Ok(v) => v.exp(),
                Err(StationaryError::Domain(_)) => 0.0,
                Err(_) => f64::NAN,
            },
            -1.0 - m,
            1.0 - m,
            &[0.0],
            &opts,
        )?;
        Ok(r.value)
    }
}

/// `ln C_bar`.
pub fn ln_c_bar(params: &ModelParams) -> Result<f64, StationaryError> {
    if params.is_linear() {
        return Err(StationaryError::LinearModel);
    }
    Ok(-params.beta().ln() / params.alpha() + potential_at_mean(params)? / params.sigma2())
}

/// Largest admissible normalisation constant `C_bar = beta^{-1/alpha} e^{V(m)/sigma2}`.
pub fn c_bar(params: &ModelParams) -> Result<f64, StationaryError> {
    ln_c_bar(params).map(f64::exp)
}

/// Superlinear steady state `f_C(w)` for `0 < C <= C_bar`.
pub fn stationary_superlinear(params: &ModelParams, c: f64, w: f64) -> Result<f64, StationaryError> {
    if params.is_linear() {
        return Err(StationaryError::LinearModel);
    }
    SteadyState::new(*params, c)?.density(w)
}

/// Mass of the critical steady state. Diverges (quadrature non-convergence) for `alpha <= 2`.
pub fn critical_mass(params: &ModelParams, tol: f64) -> Result<f64, StationaryError> {
    SteadyState::critical(*params)?.mass(tol)
}

/// The constant `C` whose steady state carries mass `mu_target`.
///
/// For `beta > 0` this bisects on `ln C` over `(0, C_bar)`, relying on the mass being
/// strictly increasing in `C`; `tol` bounds the relative mass mismatch.
pub fn solve_c_for_mass(params: &ModelParams, mu_target: f64, tol: f64) -> Result<f64, StationaryError> {
    if !(mu_target > 0.0 && mu_target.is_finite()) {
        return Err(StationaryError::NonPositiveMass(mu_target));
    }
    let quad_tol = (tol * 1e-2).max(1e-13);
    if params.is_linear() {
        let unit = SteadyState::from_ln_constant(*params, 0.0)?.mass(quad_tol)?;
        return Ok(mu_target / unit);
    }
    let ln_cb = ln_c_bar(params)?;
    let mass_at = |ln_r: f64| -> Result<f64, StationaryError> {
        SteadyState::from_ln_constant(*params, ln_cb + ln_r)?.mass(quad_tol)
    };
    let critical = match mass_at(0.0) {
        Ok(mu) => mu,
        Err(StationaryError::Quadrature(QuadratureError::NonConvergence { .. })) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    if mu_target >= critical {
        return Err(StationaryError::AboveCriticalMass {
            target: mu_target,
            critical,
        });
    }
    let mut hi = 0.0;
    let mut lo = -1.0;
    let mut lo_mass = mass_at(lo)?;
    while lo_mass > mu_target {
        hi = lo;
        lo *= 2.0;
        lo_mass = mass_at(lo)?;
        if lo < -1e4 {
            return Err(StationaryError::Bisection {
                mass: lo_mass,
                target: mu_target,
            });
        }
    }
    let mut mass = lo_mass;
    for _ in 0..200 {
        if (mass - mu_target).abs() <= tol * mu_target {
            return Ok((ln_cb + lo).exp());
        }
        let mid = 0.5 * (lo + hi);
        mass = mass_at(mid)?;
        if mass < mu_target {
            lo = mid;
        } else {
            hi = mid;
        }
        if (mass - mu_target).abs() <= tol * mu_target {
            return Ok((ln_cb + mid).exp());
        }
    }
    Err(StationaryError::Bisection {
        mass,
        target: mu_target,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Subcritical,
    Critical,
}

/// A steady state sampled on a grid, with its quadrature mass.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryProfile {
    pub params: ModelParams,
    pub constant: f64,
    pub regime: Regime,
    pub field: DensityField,
    pub mass: f64,
}

impl StationaryProfile {
    pub fn new(params: ModelParams, grid: Arc<Grid>, c: f64) -> Result<Self, StationaryError> {
        Self::from_state(SteadyState::new(params, c)?, grid)
    }

    pub fn critical(params: ModelParams, grid: Arc<Grid>) -> Result<Self, StationaryError> {
        Self::from_state(SteadyState::critical(params)?, grid)
    }

    /// Profile with `C = ratio * C_bar`.
    pub fn with_ratio(params: ModelParams, grid: Arc<Grid>, ratio: f64) -> Result<Self, StationaryError> {
        if !(ratio > 0.0) {
            return Err(StationaryError::NonPositiveConstant(ratio));
        }
        let state = SteadyState::from_ln_constant(params, ln_c_bar(&params)? + ratio.ln())?;
        Self::from_state(state, grid)
    }

    /// Profile normalised to mass `mu`.
    pub fn with_mass(params: ModelParams, grid: Arc<Grid>, mu: f64) -> Result<Self, StationaryError> {
        let c = solve_c_for_mass(&params, mu, 1e-10)?;
        Self::new(params, grid, c)
    }

    fn from_state(state: SteadyState, grid: Arc<Grid>) -> Result<Self, StationaryError> {
        let values = grid
            .centers()
            .iter()
            .map(|&w| state.density(w))
            .collect::<Result<Vec<_>, _>>()?;
        let field = DensityField::new(grid, values)?;
        let mass = state.mass(crate::DEFAULT_QUAD_TOL)?;
        Ok(Self {
            params: state.params,
            constant: state.constant(),
            regime: if state.is_critical() {
                Regime::Critical
            } else {
                Regime::Subcritical
            },
            field,
            mass,
        })
    }
}
