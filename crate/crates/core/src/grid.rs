//! Cell-centred partition of `I = [-1, 1]` and densities stored on it.

use std::sync::Arc;

use thiserror::Error;

use crate::params::ModelParams;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid needs at least one cell")]
    Empty,
    #[error("density has {got} values but the grid has {expected} cells")]
    Length { expected: usize, got: usize },
    #[error("density value {value} at cell {index} is negative or not finite")]
    BadValue { index: usize, value: f64 },
    #[error("point {0} lies outside [-1, 1]")]
    Domain(f64),
}

/// Uniform partition of `[-1, 1]` into `n` cells of width `2/n`.
///
/// Centres are `((2i + 1) - n) / n` and edges `(2i - n) / n`; both numerators are
/// exact integers, so the end edges are exactly `-1` and `+1` and the centres are
/// exactly antisymmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    cell_width: f64,
    centers: Vec<f64>,
    edges: Vec<f64>,
}

impl Grid {
    pub fn new(n_cells: usize) -> Result<Self, GridError> {
        if n_cells == 0 {
            return Err(GridError::Empty);
        }
        let n = n_cells as f64;
        let centers = (0..n_cells)
            .map(|i| ((2 * i + 1) as f64 - n) / n)
            .collect();
        let edges = (0..=n_cells).map(|i| ((2 * i) as f64 - n) / n).collect();
        Ok(Self {
            cell_width: 2.0 / n,
            centers,
            edges,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.centers.len()
    }

    pub fn cell_width(&self) -> f64 {
        self.cell_width
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Index of the cell containing `w` (the right cell on an interior edge).
    pub fn cell_of(&self, w: f64) -> Option<usize> {
        if !(-1.0..=1.0).contains(&w) {
            return None;
        }
        let i = ((w + 1.0) / self.cell_width).floor() as usize;
        Some(i.min(self.n_cells() - 1))
    }

    /// Samples `f` at the cell centres.
    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.centers.iter().map(|&w| f(w)).collect()
    }
}

/// Nonnegative cell averages on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl DensityField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.n_cells() {
            return Err(GridError::Length {
                expected: grid.n_cells(),
                got: values.len(),
            });
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(GridError::BadValue { index, value });
        }
        Ok(Self { grid, values })
    }

    /// Builds a field from a pointwise density sampled at the centres.
    pub fn from_fn<F: Fn(f64) -> f64>(grid: Arc<Grid>, f: F) -> Result<Self, GridError> {
        let values = grid.sample(f);
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Midpoint-rule mass `h * sum(f_i)`.
    pub fn mass(&self) -> f64 {
        self.grid.cell_width() * self.values.iter().sum::<f64>()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Rescales the field to carry exactly `mass`.
    pub fn with_mass(&self, mass: f64) -> Self {
        let scale = mass / self.mass();
        Self {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|v| v * scale).collect(),
        }
    }
}

/// `H(w) = (1 - w^2)^gamma`.
pub fn diffusion_weight(params: &ModelParams, w: f64) -> Result<f64, GridError> {
    if !(-1.0..=1.0).contains(&w) {
        return Err(GridError::Domain(w));
    }
    Ok(weight(params.gamma(), w))
}

/// Unchecked `(1 - w^2)^gamma`, computed as `((1 - w)(1 + w))^gamma`.
pub(crate) fn weight(gamma: f64, w: f64) -> f64 {
    ((1.0 - w) * (1.0 + w)).powf(gamma)
}

/// `ln H(w)`, accurate near the end points.
pub(crate) fn ln_weight(gamma: f64, w: f64) -> f64 {
    gamma * ((-w).ln_1p() + w.ln_1p())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(gamma: f64) -> ModelParams {
        ModelParams::new(0.1, 0.0, 1.0, 3.0, gamma).unwrap()
    }

    #[test]
    fn weight_values() {
        assert_eq!(diffusion_weight(&params(1.0), 0.0).unwrap(), 1.0);
        for g in [1.0, 2.5, 10.0, 100.0] {
            assert_eq!(diffusion_weight(&params(g), 1.0).unwrap(), 0.0);
            assert_eq!(diffusion_weight(&params(g), -1.0).unwrap(), 0.0);
        }
        let v = diffusion_weight(&params(10.0), 0.5).unwrap();
        assert!((v - 0.75f64.powi(10)).abs() < 1e-16);
        assert!((v - 0.056_313_514_709_472_656).abs() < 1e-15);
        assert_eq!(diffusion_weight(&params(1.0), 1.5), Err(GridError::Domain(1.5)));
    }

    #[test]
    fn grid_geometry() {
        for n in [1, 2, 3, 4, 7, 400, 1001] {
            let g = Grid::new(n).unwrap();
            assert_eq!(g.edges()[0], -1.0);
            assert_eq!(g.edges()[n], 1.0);
            assert!(g.centers().windows(2).all(|p| p[0] < p[1]));
            for i in 0..n {
                assert_eq!(g.centers()[i], -g.centers()[n - 1 - i]);
            }
        }
        let g = Grid::new(4).unwrap();
        assert_eq!(g.centers(), &[-0.75, -0.25, 0.25, 0.75]);
        assert_eq!(g.cell_of(0.1), Some(2));
        assert_eq!(g.cell_of(1.0), Some(3));
        assert_eq!(g.cell_of(-1.0), Some(0));
        assert_eq!(g.cell_of(1.1), None);
        assert!(Grid::new(0).is_err());
    }

    #[test]
    fn field_validation() {
        let g = Arc::new(Grid::new(3).unwrap());
        assert!(DensityField::new(Arc::clone(&g), vec![1.0, 2.0]).is_err());
        assert!(matches!(
            DensityField::new(Arc::clone(&g), vec![1.0, -1e-3, 0.0]),
            Err(GridError::BadValue { index: 1, .. })
        ));
        assert!(DensityField::new(Arc::clone(&g), vec![1.0, f64::NAN, 0.0]).is_err());
        let f = DensityField::new(g, vec![1.0, 2.0, 3.0]).unwrap();
        assert!((f.mass() - 4.0).abs() < 1e-15);
        assert!((f.with_mass(1.0).mass() - 1.0).abs() < 1e-15);
        assert_eq!(f.max_value(), 3.0);
    }
}
