//! Characteristic functions tabulated on a symmetric uniform frequency grid.
//! Only the nonnegative half is stored; negative frequencies are served by
//! conjugation, so Hermitian symmetry holds by construction. Values are
//! pinned to 1 at zero and kept inside the closed unit disk up to a small
//! interpolation slack.

use num_complex::Complex64;
use thiserror::Error;

use crate::numeric::cubic_stencil;

/// Modulus overshoot tolerated from quadrature or interpolation before the
/// grid is rejected as not a characteristic function.
pub const MODULUS_SLACK: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("full node count must be 2^m + 1 with m >= 2, got {0}")]
    NodeCount(usize),
    #[error("frequency cutoff must be positive and finite, got {0}")]
    BadCutoff(f64),
    #[error("value at zero frequency is {0}, too far from 1 to renormalize")]
    ZeroValue(f64),
    #[error("modulus {max} exceeds 1 beyond the permitted slack")]
    ModulusBound { max: f64 },
    #[error("grids have different geometry: {0}")]
    Geometry(String),
}

/// CF values on the uniform grid {i * step : i = 0..=half}, extended to
/// negative frequencies by conjugation. The full symmetric grid has
/// 2*half + 1 = 2^m + 1 nodes.
#[derive(Clone, Debug)]
pub struct CfGrid {
    xi_max: f64,
    values: Vec<Complex64>,
}

impl CfGrid {
    /// Tabulate a function on the grid with 2^m + 1 full nodes. The function
    /// is only evaluated at nonnegative frequencies.
    pub fn from_fn<F: Fn(f64) -> Complex64>(
        xi_max: f64,
        m: u32,
        f: F,
    ) -> Result<CfGrid, GridError> {
        if !(2..=30).contains(&m) {
            return Err(GridError::NodeCount(m as usize));
        }
        if !(xi_max > 0.0 && xi_max.is_finite()) {
            return Err(GridError::BadCutoff(xi_max));
        }
        let half = 1usize << (m - 1);
        let h = xi_max / half as f64;
        let values = (0..=half).map(|i| f(i as f64 * h)).collect();
        CfGrid::from_half_values(xi_max, values)
    }

    /// Wrap precomputed nonnegative-half values (length 2^{m-1} + 1),
    /// renormalizing at zero and projecting small modulus overshoots back to
    /// the unit circle. Overshoots beyond the slack are rejected.
    pub fn from_half_values(xi_max: f64, mut values: Vec<Complex64>) -> Result<CfGrid, GridError> {
        let half = values.len().saturating_sub(1);
        if half < 2 || !half.is_power_of_two() {
            return Err(GridError::NodeCount(2 * half + 1));
        }
        if !(xi_max > 0.0 && xi_max.is_finite()) {
            return Err(GridError::BadCutoff(xi_max));
        }
        let v0 = values[0];
        if (v0 - Complex64::new(1.0, 0.0)).norm() > MODULUS_SLACK {
            return Err(GridError::ZeroValue(v0.norm()));
        }
        for v in values.iter_mut() {
            *v /= v0;
        }
        values[0] = Complex64::new(1.0, 0.0);
        let mut max_norm: f64 = 0.0;
        for v in values.iter_mut() {
            let n = v.norm();
            max_norm = max_norm.max(n);
            if n > 1.0 {
                *v /= n;
            }
        }
        if max_norm > 1.0 + MODULUS_SLACK {
            return Err(GridError::ModulusBound { max: max_norm });
        }
        Ok(CfGrid { xi_max, values })
    }

    pub fn xi_max(&self) -> f64 {
        self.xi_max
    }

    /// Spacing of the underlying uniform grid.
    pub fn step(&self) -> f64 {
        self.xi_max / (self.values.len() - 1) as f64
    }

    /// Number of stored nonnegative nodes (2^{m-1} + 1).
    pub fn half_len(&self) -> usize {
        self.values.len()
    }

    /// Full symmetric node count (2^m + 1).
    pub fn n_nodes(&self) -> usize {
        2 * self.values.len() - 1
    }

    pub fn half_values(&self) -> &[Complex64] {
        &self.values
    }

    /// Nonnegative node i as (frequency, value).
    pub fn node(&self, i: usize) -> (f64, Complex64) {
        (i as f64 * self.step(), self.values[i])
    }

    /// CF value at an arbitrary frequency: cubic interpolation of real and
    /// imaginary parts on the nonnegative half, conjugated for negative
    /// arguments, projected into the unit disk. Queries beyond the cutoff
    /// clamp to the boundary node.
    pub fn value(&self, xi: f64) -> Complex64 {
        let a = xi.abs();
        let h = self.step();
        let last = self.values.len() - 1;
        let t = a / h;
        let mut v = if t >= last as f64 {
            self.values[last]
        } else {
            let k = t.floor() as usize;
            let frac = t - k as f64;
            let (idx, w) = cubic_stencil(self.values.len(), k, frac);
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..4 {
                acc += w[j] * self.values[idx[j]];
            }
            acc
        };
        let n = v.norm();
        if n > 1.0 {
            v /= n;
        }
        if xi < 0.0 {
            v.conj()
        } else {
            v
        }
    }

    /// Grid holding the real part (the symmetrized CF).
    pub fn real_part(&self) -> CfGrid {
        CfGrid {
            xi_max: self.xi_max,
            values: self
                .values
                .iter()
                .map(|v| Complex64::new(v.re, 0.0))
                .collect(),
        }
    }

    /// Maximum node-wise distance to another grid of identical geometry.
    pub fn sup_distance(&self, other: &CfGrid) -> Result<f64, GridError> {
        if self.values.len() != other.values.len() || self.xi_max != other.xi_max {
            return Err(GridError::Geometry(format!(
                "{} nodes to {} vs {} nodes to {}",
                self.n_nodes(),
                self.xi_max,
                other.n_nodes(),
                other.xi_max
            )));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }
}
