//! Uniform cell-centered grids and the finite-difference stencils used on
//! them.

use crate::error::{Error, Result};

pub const MIN_CELLS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n_cells: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, n_cells: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(Error::InvalidParameter {
                name: "grid",
                reason: format!("need finite x_min < x_max, got [{x_min}, {x_max}]"),
            });
        }
        if n_cells < MIN_CELLS {
            return Err(Error::InvalidParameter {
                name: "n_cells",
                reason: format!("need at least {MIN_CELLS} cells, got {n_cells}"),
            });
        }
        Ok(Self {
            x_min,
            x_max,
            n_cells,
        })
    }

    /// Symmetric grid `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, n_cells: usize) -> Result<Self> {
        Self::new(-half_width, half_width, n_cells)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_cells as f64
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    /// Center of cell `j`.
    pub fn x(&self, j: usize) -> f64 {
        self.x_min + (j as f64 + 0.5) * self.dx()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|j| self.x(j)).collect()
    }

    /// Same extent with `factor` times as many cells.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            n_cells: self.n_cells * factor,
            ..*self
        }
    }

    /// Fails unless `[lo, hi]` lies inside the grid.
    pub fn require_covers(&self, lo: f64, hi: f64) -> Result<()> {
        if lo < self.x_min || hi > self.x_max {
            return Err(Error::GridTooNarrow {
                x_min: self.x_min,
                x_max: self.x_max,
                need_min: lo,
                need_max: hi,
            });
        }
        Ok(())
    }
}

/// Accuracy of the centered difference stencils.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StencilOrder {
    Second,
    #[default]
    Fourth,
}

impl StencilOrder {
    pub fn half_width(self) -> usize {
        match self {
            Self::Second => 1,
            Self::Fourth => 2,
        }
    }

    /// Centered first derivative at interior index `j`.
    pub fn first(self, f: &[f64], j: usize, dx: f64) -> f64 {
        match self {
            Self::Second => (f[j + 1] - f[j - 1]) / (2.0 * dx),
            Self::Fourth => {
                (f[j - 2] - 8.0 * f[j - 1] + 8.0 * f[j + 1] - f[j + 2]) / (12.0 * dx)
            }
        }
    }

    /// Centered second derivative at interior index `j`.
    pub fn second(self, f: &[f64], j: usize, dx: f64) -> f64 {
        match self {
            Self::Second => (f[j + 1] - 2.0 * f[j] + f[j - 1]) / (dx * dx),
            Self::Fourth => {
                (-f[j - 2] + 16.0 * f[j - 1] - 30.0 * f[j] + 16.0 * f[j + 1] - f[j + 2])
                    / (12.0 * dx * dx)
            }
        }
    }
}
