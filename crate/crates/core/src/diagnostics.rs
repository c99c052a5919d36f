//! Moment diagnostics of a density: mass, mean, energy and L2 norm.

use thiserror::Error;

use crate::grid::DensityField;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("density has nonpositive mass {0}")]
    NonPositiveMass(f64),
}

/// Scalars recorded at one time level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub mass: f64,
    /// First moment divided by the mass.
    pub mean: f64,
    /// Normalised second moment `E = (1/mu) int w^2 f`.
    pub energy: f64,
    /// `int f^2`.
    pub l2sq: f64,
    pub max_density: f64,
}

/// Midpoint-rule moments of `field` stamped with `time`.
pub fn moments(field: &DensityField, time: f64) -> Result<DiagnosticsRecord, DiagnosticsError> {
    let grid = field.grid();
    let h = grid.cell_width();
    let (mut m0, mut m1, mut m2, mut l2, mut max) = (0.0, 0.0, 0.0, 0.0, 0.0f64);
    for (&w, &f) in grid.centers().iter().zip(field.values()) {
        m0 += f;
        m1 += w * f;
        m2 += w * w * f;
        l2 += f * f;
        max = max.max(f);
    }
    let mass = h * m0;
    if !(mass > 0.0) {
        return Err(DiagnosticsError::NonPositiveMass(mass));
    }
    Ok(DiagnosticsRecord {
        time,
        mass,
        mean: m1 / m0,
        energy: m2 / m0,
        l2sq: h * l2,
        max_density: max,
    })
}

/// `h * sum_i w_i^2 H(w_i)^alpha f_i^(alpha + 1)`, the superlinear dissipation integral.
pub fn superlinear_moment(field: &DensityField, alpha: f64, gamma: f64) -> f64 {
    let grid = field.grid();
    grid.centers()
        .iter()
        .zip(field.values())
        .map(|(&w, &f)| {
            let hw = crate::grid::weight(gamma, w);
            w * w * (hw * f).powf(alpha) * f
        })
        .sum::<f64>()
        * grid.cell_width()
}

/// Mass fraction held by the `k` cells nearest to `w = 0`.
pub fn central_mass_fraction(field: &DensityField, k: usize) -> f64 {
    let grid = field.grid();
    let mut idx: Vec<usize> = (0..grid.n_cells()).collect();
    idx.sort_by(|&a, &b| grid.centers()[a].abs().total_cmp(&grid.centers()[b].abs()));
    let near: f64 = idx.iter().take(k).map(|&i| field.values()[i]).sum();
    near * grid.cell_width() / field.mass()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use proptest::prelude::*;

    use super::*;
    use crate::grid::Grid;

    #[test]
    fn uniform_on_four_cells() {
        let g = Arc::new(Grid::new(4).unwrap());
        let f = DensityField::new(g, vec![0.5; 4]).unwrap();
        let d = moments(&f, 0.0).unwrap();
        assert!((d.mass - 1.0).abs() < 1e-15);
        assert_eq!(d.mean, 0.0);
        assert!((d.energy - 0.3125).abs() < 1e-15);
        assert!((d.l2sq - 0.5).abs() < 1e-15);
        assert_eq!(d.max_density, 0.5);
    }

    #[test]
    fn dirac_like_field_has_small_energy() {
        let g = Arc::new(Grid::new(401).unwrap());
        let mut v = vec![0.0; 401];
        v[200] = 1.0;
        let d = moments(&DensityField::new(g, v).unwrap(), 0.0).unwrap();
        assert_eq!(d.energy, 0.0);
        assert_eq!(d.mean, 0.0);
    }

    #[test]
    fn zero_field_is_rejected() {
        let g = Arc::new(Grid::new(4).unwrap());
        let f = DensityField::new(g, vec![0.0; 4]).unwrap();
        assert!(matches!(moments(&f, 0.0), Err(DiagnosticsError::NonPositiveMass(_))));
    }

    #[test]
    fn central_fraction_counts_nearest_cells() {
        let g = Arc::new(Grid::new(10).unwrap());
        let f = DensityField::new(g, vec![1.0; 10]).unwrap();
        assert!((central_mass_fraction(&f, 2) - 0.2).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn energy_bounds_hold(values in proptest::collection::vec(0.0f64..10.0, 1..200)) {
            prop_assume!(values.iter().any(|&v| v > 1e-3));
            let g = Arc::new(Grid::new(values.len()).unwrap());
            let d = moments(&DensityField::new(g, values).unwrap(), 0.0).unwrap();
            prop_assert!(d.energy >= 0.0 && d.energy <= 1.0);
            prop_assert!(d.mean * d.mean <= d.energy * (1.0 + 1e-12));
            prop_assert!(d.l2sq >= d.mass * d.mass / 2.0 * (1.0 - 1e-12));
        }

        #[test]
        fn symmetric_fields_have_zero_mean(half in proptest::collection::vec(0.0f64..10.0, 1..100)) {
            prop_assume!(half.iter().any(|&v| v > 1e-3));
            let mut values = half.clone();
            values.extend(half.iter().rev());
            let g = Arc::new(Grid::new(values.len()).unwrap());
            let d = moments(&DensityField::new(g, values).unwrap(), 0.0).unwrap();
            prop_assert!(d.mean.abs() < 1e-15);
        }
    }
}
