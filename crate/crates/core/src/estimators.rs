//! Kernel-smoothed Fourier inversion for the jump function `g` and the increment density.
//!
//! ```text
//! g_h(x) = (1/2pi) int e^{-iux} Fk(hu) Psi'^(u) / i du
//! f_h(x) = (1/2pi) int e^{-iux} Fk(hu) phi^(u) du
//! ```
//!
//! Both spectra are Hermitian, so spatial values are real and computed from the
//! non-negative half grid.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{mirror, SpectralGrid, Symmetry};
use crate::models::LevyModel;
use crate::spectral::{CharFnEstimate, SpectralStatistics};

/// Smoothing kernel, described by its Fourier transform `Fk`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    /// `Fk = 1[-1, 1]`; bandwidth `h` is a hard cutoff at `1/h`.
    Sinc,
    /// `k(x) = 15/16 (1 - x^2)^2` on `[-1, 1]`.
    CompactOrder2,
}

impl Kernel {
    /// `Fk(t) = int e^{itx} k(x) dx`.
    pub fn fourier(&self, t: f64) -> f64 {
        match self {
            Kernel::Sinc => {
                if t.abs() <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Kernel::CompactOrder2 => biweight_fourier(t),
        }
    }

    /// Spatial kernel `k(x)`.
    pub fn spatial(&self, x: f64) -> f64 {
        match self {
            Kernel::Sinc => {
                if x == 0.0 {
                    1.0 / PI
                } else {
                    x.sin() / (PI * x)
                }
            }
            Kernel::CompactOrder2 => {
                if x.abs() <= 1.0 {
                    let v = 1.0 - x * x;
                    15.0 / 16.0 * v * v
                } else {
                    0.0
                }
            }
        }
    }

    /// Frequency beyond which `Fk(h u)` vanishes, if any.
    pub fn cutoff(&self, h: f64) -> Option<f64> {
        match self {
            Kernel::Sinc => Some(1.0 / h),
            Kernel::CompactOrder2 => None,
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kernel::Sinc => "sinc",
            Kernel::CompactOrder2 => "biweight",
        })
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sinc" => Ok(Kernel::Sinc),
            "biweight" | "compact" => Ok(Kernel::CompactOrder2),
            _ => Err(Error::Parse {
                kind: "kernel",
                input: s.to_string(),
            }),
        }
    }
}

/// `15 [(3 - t^2) sin t - 3 t cos t] / t^5`, with its Taylor series near 0.
fn biweight_fourier(t: f64) -> f64 {
    let t = t.abs();
    if t == 0.0 {
        1.0
    } else if t < 1.0 {
        // 15/16 * sum_n (-1)^n t^{2n}/(2n)! * 2 [1/(2n+1) - 2/(2n+3) + 1/(2n+5)]
        let t2 = t * t;
        let mut term = 1.0;
        let mut sum = 0.0;
        for n in 0..14 {
            let k = 2.0 * n as f64;
            let moment = 2.0 * (1.0 / (k + 1.0) - 2.0 / (k + 3.0) + 1.0 / (k + 5.0));
            sum += term * moment;
            term *= -t2 / ((k + 1.0) * (k + 2.0));
        }
        15.0 / 16.0 * sum
    } else {
        let (s, c) = t.sin_cos();
        15.0 * ((3.0 - t * t) * s - 3.0 * t * c) / t.powi(5)
    }
}

/// Kernel-weighted Hermitian spectrum on the non-negative nodes `0..=upper_index`.
#[derive(Debug, Clone)]
struct Smoothed {
    grid: SpectralGrid,
    kernel: Kernel,
    h: f64,
    upper_index: usize,
    half: Vec<Complex64>,
}

impl Smoothed {
    fn new(
        grid: SpectralGrid,
        kernel: Kernel,
        h: f64,
        raw_half: &[Complex64],
        map: impl Fn(Complex64) -> Complex64,
    ) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {h}")));
        }
        if raw_half.len() != grid.half_len() {
            return Err(Error::LengthMismatch {
                what: "spectrum",
                expected: grid.half_len(),
                got: raw_half.len(),
            });
        }
        let upper_index = match kernel.cutoff(h) {
            Some(c) => {
                if c > grid.u_max() * (1.0 + 1e-9) {
                    return Err(Error::GridTooNarrow {
                        cutoff: c,
                        u_max: grid.u_max(),
                    });
                }
                grid.index_at_or_below(c)
            }
            None => grid.half_len() - 1,
        };
        let half = raw_half
            .iter()
            .take(upper_index + 1)
            .enumerate()
            .map(|(k, &v)| map(v) * kernel.fourier(h * grid.node(k)))
            .collect();
        Ok(Self {
            grid,
            kernel,
            h,
            upper_index,
            half,
        })
    }

    fn upper(&self) -> f64 {
        self.grid.node(self.upper_index)
    }

    fn evaluate(&self, x: f64) -> f64 {
        let du = self.grid.du();
        let last = self.upper_index;
        let mut acc = 0.0;
        for (k, v) in self.half.iter().enumerate() {
            let w = if k == 0 || k == last { 0.5 * du } else { du };
            let e = Complex64::cis(-self.grid.node(k) * x);
            acc += w * (e * v).re;
        }
        acc / PI
    }

    fn evaluate_complex(&self, x: f64) -> Complex64 {
        let du = self.grid.du();
        let full = mirror(&self.half, Symmetry::Hermitian);
        let last = full.len() - 1;
        let k0 = self.upper_index as f64;
        let mut acc = Complex64::default();
        for (i, v) in full.iter().enumerate() {
            let u = (i as f64 - k0) * du;
            let w = if i == 0 || i == last { 0.5 * du } else { du };
            acc += w * Complex64::cis(-u * x) * v;
        }
        acc / (2.0 * PI)
    }

    fn write_csv<W: Write>(&self, xs: &[f64], mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,value")?;
        for &x in xs {
            writeln!(out, "{x},{}", self.evaluate(x))?;
        }
        Ok(())
    }
}

macro_rules! estimate_accessors {
    ($t:ty) => {
        impl $t {
            pub fn grid(&self) -> &SpectralGrid {
                &self.0.grid
            }

            pub fn kernel(&self) -> Kernel {
                self.0.kernel
            }

            pub fn bandwidth(&self) -> f64 {
                self.0.h
            }

            /// Largest frequency entering the inversion.
            pub fn upper_frequency(&self) -> f64 {
                self.0.upper()
            }

            /// Smoothed spectrum on the nodes `0..=upper`.
            pub fn spectrum_half(&self) -> &[Complex64] {
                &self.0.half
            }

            /// Smoothed spectrum on `[-upper, upper]`.
            pub fn spectrum(&self) -> Vec<Complex64> {
                mirror(&self.0.half, Symmetry::Hermitian)
            }

            /// Spatial value at `x` (trapezoid rule over `[-upper, upper]`).
            pub fn evaluate(&self, x: f64) -> f64 {
                self.0.evaluate(x)
            }

            /// The same trapezoid sum taken over the mirrored full spectrum, without
            /// discarding the imaginary part.
            pub fn evaluate_complex(&self, x: f64) -> Complex64 {
                self.0.evaluate_complex(x)
            }

            pub fn evaluate_many(&self, xs: &[f64]) -> Vec<f64> {
                xs.iter().map(|&x| self.evaluate(x)).collect()
            }

            /// Writes `x,value` rows for the given points.
            pub fn write_csv<W: Write>(&self, xs: &[f64], out: W) -> std::io::Result<()> {
                self.0.write_csv(xs, out)
            }
        }
    };
}

/// Estimate of `g(x) = x eta(x)`.
#[derive(Debug, Clone)]
pub struct JumpEstimate(Smoothed);

estimate_accessors!(JumpEstimate);

impl JumpEstimate {
    /// From an estimate of `Psi'` on the non-negative half grid.
    pub fn from_psi_prime(
        grid: SpectralGrid,
        psi_prime_half: &[Complex64],
        kernel: Kernel,
        h: f64,
    ) -> Result<Self> {
        // F[g] = Psi' / i
        Smoothed::new(grid, kernel, h, psi_prime_half, |v| Complex64::new(v.im, -v.re)).map(Self)
    }
}

/// Estimate of the density of `X_1`.
#[derive(Debug, Clone)]
pub struct DensityEstimate(Smoothed);

estimate_accessors!(DensityEstimate);

impl DensityEstimate {
    /// From a characteristic-function estimate on the non-negative half grid.
    pub fn from_phi(grid: SpectralGrid, phi_half: &[Complex64], kernel: Kernel, h: f64) -> Result<Self> {
        Smoothed::new(grid, kernel, h, phi_half, |v| v).map(Self)
    }
}

/// Kernel estimator of `g` with bandwidth `h`.
pub fn estimate_g(stats: &SpectralStatistics, kernel: Kernel, h: f64) -> Result<JumpEstimate> {
    JumpEstimate::from_psi_prime(*stats.grid(), stats.psi_prime_half(), kernel, h)
}

/// Kernel estimator of the density of `X_1` with bandwidth `h`.
pub fn estimate_f(charfn: &CharFnEstimate, kernel: Kernel, h: f64) -> Result<DensityEstimate> {
    DensityEstimate::from_phi(*charfn.grid(), charfn.phi_hat_half(), kernel, h)
}

/// `(1/2pi) [int_{-upper}^{upper} |est - truth|^2 du + tail_mass]` for a Hermitian (or
/// anti-Hermitian) estimate given on the non-negative half grid.
pub fn l2_risk_spectral<F>(
    estimate_half: &[Complex64],
    grid: &SpectralGrid,
    upper: f64,
    truth: F,
    tail_mass: f64,
) -> f64
where
    F: Fn(f64) -> Complex64,
{
    let weights = grid.half_weights(upper);
    let inner: f64 = weights
        .iter()
        .zip(estimate_half)
        .enumerate()
        .filter(|(_, (w, _))| **w > 0.0)
        .map(|(k, (w, v))| w * (v - truth(grid.node(k))).norm_sqr())
        .sum();
    (2.0 * inner + tail_mass) / (2.0 * PI)
}

/// `||g_h - g||^2_{L^2(R)}` by Plancherel with the closed-form `F[g]` and its tail mass.
pub fn l2_risk_jump(estimate: &JumpEstimate, model: &LevyModel) -> Result<f64> {
    let upper = estimate.upper_frequency();
    let tail = model.fourier_g_tail_mass(upper)?;
    let mut padded = estimate.spectrum_half().to_vec();
    padded.resize(estimate.grid().half_len(), Complex64::default());
    Ok(l2_risk_spectral(
        &padded,
        estimate.grid(),
        upper,
        |u| model.fourier_g(u).expect("checked above"),
        tail,
    ))
}

/// `||f_h - f_delta||^2_{L^2(R)}` by Plancherel with the closed-form `phi_delta`.
pub fn l2_risk_density(estimate: &DensityEstimate, model: &LevyModel, delta: f64) -> Result<f64> {
    let upper = estimate.upper_frequency();
    let tail = model.char_function_tail_mass(delta, upper)?;
    let mut padded = estimate.spectrum_half().to_vec();
    padded.resize(estimate.grid().half_len(), Complex64::default());
    Ok(l2_risk_spectral(
        &padded,
        estimate.grid(),
        upper,
        |u| model.char_function(delta, u),
        tail,
    ))
}

/// Sinc-kernel jump risks for a list of cutoffs, from one `Psi'^` array.
///
/// Each cutoff is snapped down to the nearest grid node, matching [`estimate_g`].
pub fn jump_risk_profile(
    grid: &SpectralGrid,
    psi_prime_half: &[Complex64],
    model: &LevyModel,
    cutoffs: &[f64],
) -> Result<Vec<f64>> {
    let sq: Vec<f64> = psi_prime_half
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let truth = model.fourier_g(grid.node(k))?;
            Ok((Complex64::new(v.im, -v.re) - truth).norm_sqr())
        })
        .collect::<Result<_>>()?;
    profile(grid, &sq, cutoffs, |m| model.fourier_g_tail_mass(m))
}

/// Sinc-kernel density risks for a list of cutoffs, from one `phi^` array.
pub fn density_risk_profile(
    grid: &SpectralGrid,
    phi_half: &[Complex64],
    model: &LevyModel,
    delta: f64,
    cutoffs: &[f64],
) -> Result<Vec<f64>> {
    model.char_function_tail_mass(delta, 0.0)?;
    let sq: Vec<f64> = phi_half
        .iter()
        .enumerate()
        .map(|(k, v)| (v - model.char_function(delta, grid.node(k))).norm_sqr())
        .collect();
    profile(grid, &sq, cutoffs, |m| model.char_function_tail_mass(delta, m))
}

fn profile(
    grid: &SpectralGrid,
    sq_half: &[f64],
    cutoffs: &[f64],
    tail: impl Fn(f64) -> Result<f64>,
) -> Result<Vec<f64>> {
    let uppers: Vec<f64> = cutoffs
        .iter()
        .map(|&c| {
            if c > grid.u_max() * (1.0 + 1e-9) {
                Err(Error::GridTooNarrow {
                    cutoff: c,
                    u_max: grid.u_max(),
                })
            } else {
                Ok(grid.node(grid.index_at_or_below(c)))
            }
        })
        .collect::<Result<_>>()?;
    let inner = grid.cumulative_integrals(sq_half, &uppers);
    uppers
        .iter()
        .zip(inner)
        .map(|(&m, v)| Ok((2.0 * v + tail(m)?) / (2.0 * PI)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn biweight_fourier_at_origin_and_continuity() {
        assert_eq!(biweight_fourier(0.0), 1.0);
        let below = biweight_fourier(1.0 - 1e-12);
        let above = biweight_fourier(1.0 + 1e-12);
        assert!((below - above).abs() < 1e-11);
    }

    #[test]
    fn biweight_fourier_matches_quadrature() {
        for t in [0.3, 0.99, 1.5, 4.0, 11.0] {
            let q = crate::quad::adaptive_simpson(
                |x| Kernel::CompactOrder2.spatial(x) * (t * x).cos(),
                -1.0,
                1.0,
                1e-14,
            );
            assert_relative_eq!(Kernel::CompactOrder2.fourier(t), q, epsilon = 1e-12);
        }
    }

    #[test]
    fn sinc_indicator() {
        assert_eq!(Kernel::Sinc.fourier(1.0), 1.0);
        assert_eq!(Kernel::Sinc.fourier(-0.3), 1.0);
        assert_eq!(Kernel::Sinc.fourier(1.0001), 0.0);
    }

    #[test]
    fn kernel_names() {
        assert_eq!("sinc".parse::<Kernel>().unwrap(), Kernel::Sinc);
        assert_eq!("biweight".parse::<Kernel>().unwrap(), Kernel::CompactOrder2);
        assert!("gauss".parse::<Kernel>().is_err());
    }

    #[test]
    fn zero_spectrum_gives_zero_estimate() {
        let grid = SpectralGrid::new(10.0, 0.05).unwrap();
        let zero = vec![Complex64::default(); grid.half_len()];
        let est = JumpEstimate::from_psi_prime(grid, &zero, Kernel::Sinc, 0.2).unwrap();
        for x in [-1.0, 0.0, 2.5] {
            assert_eq!(est.evaluate(x), 0.0);
        }
    }

    #[test]
    fn indicator_spectrum_at_origin() {
        let grid = SpectralGrid::new(4.0, 0.01).unwrap();
        let ones = vec![Complex64::new(1.0, 0.0); grid.half_len()];
        let est = DensityEstimate::from_phi(grid, &ones, Kernel::Sinc, 1.0).unwrap();
        assert_relative_eq!(est.evaluate(0.0), 1.0 / PI, epsilon = 1e-12);
    }

    #[test]
    fn too_narrow_grid() {
        let grid = SpectralGrid::new(4.0, 0.01).unwrap();
        let ones = vec![Complex64::new(1.0, 0.0); grid.half_len()];
        assert!(matches!(
            DensityEstimate::from_phi(grid, &ones, Kernel::Sinc, 0.2),
            Err(Error::GridTooNarrow { .. })
        ));
        assert!(DensityEstimate::from_phi(grid, &ones, Kernel::CompactOrder2, 0.2).is_ok());
    }
}
