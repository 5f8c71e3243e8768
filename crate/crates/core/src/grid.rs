//! Uniform symmetric frequency grid and trapezoid helpers on it.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default node spacing.
pub const DEFAULT_DU: f64 = 0.01;
/// Smallest default half-width.
pub const DEFAULT_MIN_U_MAX: f64 = 10.0;

/// Nodes `u_k = k * du` for `k = -K..=K`, so the grid is symmetric and contains 0.
///
/// Spectral arrays are stored on the non-negative half (`K + 1` values) and mirrored on
/// demand with [`Symmetry`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralGrid {
    du: f64,
    half: usize,
}

impl SpectralGrid {
    /// Smallest grid with spacing `du` whose half-width reaches `u_max`.
    pub fn new(u_max: f64, du: f64) -> Result<Self> {
        if !(du.is_finite() && du > 0.0) {
            return Err(Error::InvalidParameter(format!("grid spacing must be positive, got {du}")));
        }
        if !(u_max.is_finite() && u_max > 0.0) {
            return Err(Error::InvalidParameter(format!("u_max must be positive, got {u_max}")));
        }
        let ratio = u_max / du;
        let mut half = ratio.round();
        if (ratio - half).abs() > 1e-9 * ratio.max(1.0) {
            half = ratio.ceil();
        }
        Ok(Self {
            du,
            half: (half as usize).max(1),
        })
    }

    /// Grid with `n_points` (odd, at least 3) nodes spanning `[-u_max, u_max]`.
    pub fn from_points(u_max: f64, n_points: usize) -> Result<Self> {
        if n_points < 3 || n_points % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "n_points must be odd and >= 3, got {n_points}"
            )));
        }
        let half = (n_points - 1) / 2;
        if !(u_max.is_finite() && u_max > 0.0) {
            return Err(Error::InvalidParameter(format!("u_max must be positive, got {u_max}")));
        }
        Ok(Self {
            du: u_max / half as f64,
            half,
        })
    }

    /// Default grid for a horizon `T`: `du = 0.01`, `u_max >= max(sqrt(T), 10)`.
    pub fn for_horizon(horizon: f64) -> Self {
        Self::new(horizon.sqrt().max(DEFAULT_MIN_U_MAX), DEFAULT_DU).expect("valid defaults")
    }

    pub fn du(&self) -> f64 {
        self.du
    }

    pub fn u_max(&self) -> f64 {
        self.half as f64 * self.du
    }

    pub fn n_points(&self) -> usize {
        2 * self.half + 1
    }

    /// Number of non-negative nodes.
    pub fn half_len(&self) -> usize {
        self.half + 1
    }

    /// Index of the zero node in the full grid.
    pub fn zero_index(&self) -> usize {
        self.half
    }

    /// Non-negative node `k`.
    #[inline]
    pub fn node(&self, k: usize) -> f64 {
        k as f64 * self.du
    }

    pub fn half_nodes(&self) -> Vec<f64> {
        (0..self.half_len()).map(|k| self.node(k)).collect()
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.half as isize;
        (-h..=h).map(|k| k as f64 * self.du).collect()
    }

    /// Trapezoid weights on the non-negative nodes for `int_0^upper`, with the last partial
    /// cell integrated against the linear interpolant. `upper` is clamped to `u_max`.
    pub fn half_weights(&self, upper: f64) -> Vec<f64> {
        let mut w = vec![0.0; self.half_len()];
        let (full, partial) = self.split(upper);
        if full > 0 {
            for wk in w.iter_mut().take(full) {
                *wk = self.du;
            }
            w[0] = 0.5 * self.du;
            w[full] = 0.5 * self.du;
        }
        if partial > 0.0 {
            let s = partial;
            w[full] += s - s * s / (2.0 * self.du);
            w[full + 1] += s * s / (2.0 * self.du);
        }
        w
    }

    /// Index of the largest non-negative node not exceeding `upper` (clamped to the grid).
    pub fn index_at_or_below(&self, upper: f64) -> usize {
        self.split(upper).0
    }

    /// Splits `upper` into a count of whole cells and the remaining length.
    fn split(&self, upper: f64) -> (usize, f64) {
        let upper = upper.clamp(0.0, self.u_max());
        let ratio = upper / self.du;
        let r = ratio.round();
        if (ratio - r).abs() <= 1e-9 * ratio.max(1.0) {
            return (r as usize, 0.0);
        }
        let full = ratio.floor() as usize;
        (full, upper - full as f64 * self.du)
    }

    /// `int_0^upper f` for each `upper` in `uppers` (any order), computed by one forward
    /// sweep of running trapezoid sums plus the partial-cell term.
    pub fn cumulative_integrals(&self, f: &[f64], uppers: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.half_len());
        let mut running = vec![0.0; self.half_len()];
        for k in 1..self.half_len() {
            running[k] = running[k - 1] + 0.5 * self.du * (f[k - 1] + f[k]);
        }
        uppers
            .iter()
            .map(|&upper| {
                let (full, s) = self.split(upper);
                let mut v = running[full];
                if s > 0.0 {
                    v += f[full] * (s - s * s / (2.0 * self.du)) + f[full + 1] * s * s / (2.0 * self.du);
                }
                v
            })
            .collect()
    }

    /// `int_{-upper}^{upper}` of an even real function given on the non-negative half.
    pub fn symmetric_integral(&self, f: &[f64], upper: f64) -> f64 {
        2.0 * self
            .half_weights(upper)
            .iter()
            .zip(f)
            .map(|(w, v)| w * v)
            .sum::<f64>()
    }
}

/// How a spectral array continues to negative frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    /// `f(-u) = conj(f(u))`
    Hermitian,
    /// `f(-u) = -conj(f(u))`
    AntiHermitian,
}

/// Expands a non-negative half array onto the full grid.
pub fn mirror(half: &[Complex64], symmetry: Symmetry) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(2 * half.len() - 1);
    for v in half[1..].iter().rev() {
        out.push(match symmetry {
            Symmetry::Hermitian => v.conj(),
            Symmetry::AntiHermitian => -v.conj(),
        });
    }
    out.extend_from_slice(half);
    out
}

/// Even extension of a real half array.
pub fn mirror_real(half: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = half[1..].iter().rev().copied().collect();
    out.extend_from_slice(half);
    out
}
