//! Rectangular grids of real activation values, the input to all topology.

use crate::error::{Error, Result};

/// A height x width grid of finite real values, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl ScalarField {
    /// Builds a field, rejecting empty dimensions and non-finite entries.
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidField(format!(
                "dimensions must be positive, got {height}x{width}"
            )));
        }
        if values.len() != height * width {
            return Err(Error::InvalidField(format!(
                "expected {} values for a {height}x{width} grid, got {}",
                height * width,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!(
                "non-finite value {} at flat index {pos}",
                values[pos]
            )));
        }
        Ok(Self { height, width, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::InvalidField("ragged rows".into()));
        }
        Self::new(height, width, rows.concat())
    }

    /// All-zero field of the given size (used as a gradient accumulator).
    pub fn zeros(height: usize, width: usize) -> Self {
        Self { height, width, values: vec![0.0; height * width] }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.values[row * self.width + col] = v;
    }

    /// Min-max normalization to [0, 1]. A constant field maps to all zeros.
    ///
    /// Returns the normalized field together with the flat indices of the
    /// minimum and maximum (first occurrence in row-major order) and the raw
    /// range, which the gradient chain rule needs.
    pub fn minmax_normalized(&self) -> (ScalarField, MinMaxInfo) {
        let mut min_idx = 0;
        let mut max_idx = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v < self.values[min_idx] {
                min_idx = i;
            }
            if v > self.values[max_idx] {
                max_idx = i;
            }
        }
        let lo = self.values[min_idx];
        let hi = self.values[max_idx];
        let range = hi - lo;
        let values = if range > 0.0 {
            self.values.iter().map(|&v| (v - lo) / range).collect()
        } else {
            vec![0.0; self.values.len()]
        };
        (
            ScalarField { height: self.height, width: self.width, values },
            MinMaxInfo { min_idx, max_idx, range },
        )
    }
}

/// Provenance of a min-max normalization, for routing gradients.
#[derive(Debug, Clone, Copy)]
pub struct MinMaxInfo {
    pub min_idx: usize,
    pub max_idx: usize,
    pub range: f64,
}

impl MinMaxInfo {
    /// Chain rule through y = (x - min) / range.
    ///
    /// `grad_normalized` is dL/dy over the normalized field; `normalized` are
    /// the y values. Returns dL/dx. A constant input (range 0) gets a zero
    /// gradient.
    pub fn backward(&self, grad_normalized: &[f64], normalized: &[f64]) -> Vec<f64> {
        let n = grad_normalized.len();
        if self.range <= 0.0 {
            return vec![0.0; n];
        }
        let total: f64 = grad_normalized.iter().sum();
        let weighted: f64 = grad_normalized.iter().zip(normalized).map(|(g, y)| g * y).sum();
        let mut out: Vec<f64> = grad_normalized.iter().map(|g| g / self.range).collect();
        out[self.max_idx] -= weighted / self.range;
        out[self.min_idx] -= (total - weighted) / self.range;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        assert!(ScalarField::new(1, 2, vec![0.0, f64::NAN]).is_err());
        assert!(ScalarField::new(1, 2, vec![0.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn rejects_bad_shape() {
        assert!(ScalarField::new(0, 2, vec![]).is_err());
        assert!(ScalarField::new(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn normalization_constant_field_is_zero() {
        let f = ScalarField::new(2, 2, vec![5.0; 4]).unwrap();
        let (n, info) = f.minmax_normalized();
        assert_eq!(n.values(), &[0.0; 4]);
        assert_eq!(info.range, 0.0);
        assert_eq!(info.backward(&[1.0; 4], n.values()), vec![0.0; 4]);
    }

    #[test]
    fn normalization_gradient_matches_finite_differences() {
        let x = vec![0.3, -1.2, 2.5, 0.9, 1.7, -0.4];
        let f = ScalarField::new(2, 3, x.clone()).unwrap();
        let g_out: Vec<f64> = vec![0.7, -0.3, 1.1, 0.2, -0.9, 0.5];
        let (n, info) = f.minmax_normalized();
        let analytic = info.backward(&g_out, n.values());

        let loss = |vals: &[f64]| -> f64 {
            let f = ScalarField::new(2, 3, vals.to_vec()).unwrap();
            let (n, _) = f.minmax_normalized();
            n.values().iter().zip(&g_out).map(|(y, g)| y * g).sum()
        };
        let h = 1e-6;
        for i in 0..x.len() {
            let mut plus = x.clone();
            plus[i] += h;
            let mut minus = x.clone();
            minus[i] -= h;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            assert!(
                (fd - analytic[i]).abs() <= 1e-6 * analytic[i].abs().max(1.0),
                "component {i}: fd {fd} vs analytic {}",
                analytic[i]
            );
        }
    }
}
