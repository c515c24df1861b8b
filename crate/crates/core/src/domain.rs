//! Axis-aligned box domains shared by norms, flows and measures.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DomainError {
    #[error("box needs at least one axis")]
    Empty,
    #[error("axis {axis}: lower bound {lo} is not below upper bound {hi}")]
    BadInterval { axis: usize, lo: f64, hi: f64 },
}

/// Product of closed intervals `[lo_i, hi_i]`, one per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, DomainError> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(DomainError::Empty);
        }
        for (axis, (&a, &b)) in lo.iter().zip(&hi).enumerate() {
            if !a.is_finite() || !b.is_finite() || a >= b {
                return Err(DomainError::BadInterval { axis, lo: a, hi: b });
            }
        }
        Ok(BoxDomain { lo, hi })
    }

    /// The symmetric unit box `[-1, 1]^n`.
    pub fn symmetric_unit(dim: usize) -> Self {
        BoxDomain {
            lo: vec![-1.0; dim],
            hi: vec![1.0; dim],
        }
    }

    /// `[0, 1]^n`.
    pub fn unit(dim: usize) -> Self {
        BoxDomain {
            lo: vec![0.0; dim],
            hi: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&xi, (&a, &b))| xi >= a && xi <= b)
    }

    /// Node of the uniform grid with `per_axis` nodes on every axis.
    ///
    /// `index` is a mixed-radix counter (axis 0 fastest); nodes include both
    /// interval endpoints.
    pub fn grid_node(&self, per_axis: usize, mut index: usize) -> Vec<f64> {
        debug_assert!(per_axis >= 2);
        let mut x = Vec::with_capacity(self.dim());
        for axis in 0..self.dim() {
            let i = index % per_axis;
            index /= per_axis;
            let t = i as f64 / (per_axis - 1) as f64;
            x.push(self.lo[axis] + t * (self.hi[axis] - self.lo[axis]));
        }
        x
    }

    /// Total number of nodes of the uniform grid (`per_axis^dim`).
    pub fn grid_len(&self, per_axis: usize) -> usize {
        per_axis.pow(self.dim() as u32)
    }

    /// Shrink every axis by `margin` on both ends.
    pub fn shrink(&self, margin: f64) -> Result<Self, DomainError> {
        BoxDomain::new(
            self.lo.iter().map(|a| a + margin).collect(),
            self.hi.iter().map(|b| b - margin).collect(),
        )
    }
}
