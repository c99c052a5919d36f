//! Initial densities with prescribed mass and, for the peaked families, prescribed energy.

use std::sync::Arc;

use thiserror::Error;

use crate::grid::{DensityField, Grid};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InitialError {
    #[error("mass must be positive (got {0})")]
    Mass(f64),
    #[error("target energy {target} outside the range ({lo}, {hi}) reachable by this family")]
    Energy { target: f64, lo: f64, hi: f64 },
}

/// Families of symmetric initial data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialData {
    Uniform,
    /// `(1 - w^2)^a` with `a` fitted so the grid energy equals `energy`.
    Beta { energy: f64 },
    /// `exp(-w^2 / (2 s^2))` truncated to `I`, with `s` fitted so the grid energy equals `energy`.
    Gaussian { energy: f64 },
}

impl InitialData {
    pub fn build(&self, grid: Arc<Grid>, mu: f64) -> Result<DensityField, InitialError> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(InitialError::Mass(mu));
        }
        let values = match *self {
            InitialData::Uniform => vec![1.0; grid.n_cells()],
            InitialData::Beta { energy } => {
                // ln(a + 1) ranges over a bracket giving energies from ~1 down to ~0.
                let shape = |x: f64| {
                    let a = x.exp() - 1.0;
                    grid.sample(|w| ((1.0 - w) * (1.0 + w)).powf(a))
                };
                shape(fit(&grid, energy, -7.0, 12.0, true, shape)?)
            }
            InitialData::Gaussian { energy } => {
                let shape = |x: f64| {
                    let s2 = (2.0 * x).exp();
                    grid.sample(|w| (-w * w / (2.0 * s2)).exp())
                };
                shape(fit(&grid, energy, -9.0, 6.0, false, shape)?)
            }
        };
        let field = DensityField::new(grid, values).expect("initial shapes are finite and nonnegative");
        Ok(field.with_mass(mu))
    }
}

fn grid_energy(grid: &Grid, values: &[f64]) -> f64 {
    let (num, den) = grid
        .centers()
        .iter()
        .zip(values)
        .fold((0.0, 0.0), |(n, d), (w, v)| (n + w * w * v, d + v));
    if den > 0.0 {
        num / den
    } else {
        // Fully underflowed: the limit concentrates on the innermost centres.
        grid.centers().iter().fold(f64::INFINITY, |m, w| m.min(w * w))
    }
}

/// Bisection on a scalar shape parameter `x` for which the grid energy is monotone.
fn fit<F: Fn(f64) -> Vec<f64>>(
    grid: &Grid,
    target: f64,
    mut lo: f64,
    mut hi: f64,
    decreasing: bool,
    shape: F,
) -> Result<f64, InitialError> {
    let energy = |x: f64| grid_energy(grid, &shape(x));
    let (e_lo, e_hi) = (energy(lo), energy(hi));
    let (min, max) = if decreasing { (e_hi, e_lo) } else { (e_lo, e_hi) };
    if !(target > min && target < max) {
        return Err(InitialError::Energy {
            target,
            lo: min,
            hi: max,
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (energy(mid) > target) == decreasing {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * (1.0 + mid.abs()) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::moments;

    #[test]
    fn families_hit_mass_and_energy() {
        let grid = Arc::new(Grid::new(400).unwrap());
        for data in [
            InitialData::Beta { energy: 0.1 },
            InitialData::Beta { energy: 0.6 },
            InitialData::Gaussian { energy: 0.1 },
            InitialData::Gaussian { energy: 0.01 },
        ] {
            let f = data.build(Arc::clone(&grid), 6.0).unwrap();
            let d = moments(&f, 0.0).unwrap();
            assert!((d.mass - 6.0).abs() < 1e-12, "{data:?}");
            let target = match data {
                InitialData::Beta { energy } | InitialData::Gaussian { energy } => energy,
                InitialData::Uniform => unreachable!(),
            };
            assert!((d.energy - target).abs() < 1e-10, "{data:?}: {}", d.energy);
            assert!(d.mean.abs() < 1e-15);
        }
        let u = InitialData::Uniform.build(grid, 2.0).unwrap();
        assert!(u.values().iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn unreachable_targets_are_rejected() {
        let grid = Arc::new(Grid::new(100).unwrap());
        assert!(matches!(
            InitialData::Gaussian { energy: 0.4 }.build(Arc::clone(&grid), 1.0),
            Err(InitialError::Energy { .. })
        ));
        assert!(InitialData::Beta { energy: 1.2 }.build(Arc::clone(&grid), 1.0).is_err());
        assert_eq!(InitialData::Uniform.build(grid, 0.0), Err(InitialError::Mass(0.0)));
    }
}
