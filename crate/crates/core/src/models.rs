//! Simulatable Levy models with closed-form spectral ground truth.
//!
//! Each model exposes the characteristic exponent `psi`, the characteristic function
//! `phi_delta(u) = exp(delta * psi(u))`, the derivative `psi'`, and (for the pure-jump
//! models) the Fourier transform of `g(x) = x * eta(x)`, which satisfies `psi' = i * F[g]`.
//! The principal-branch logarithm is safe here: `1 - iu/b` stays in the right half-plane.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::quad::adaptive_simpson;
use crate::sampling::{ObservationSet, SamplingScheme};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// A Levy process law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevyModel {
    /// Gamma subordinator: `X_delta ~ Gamma(shape * delta, rate)`.
    Gamma { shape: f64, rate: f64 },
    /// Symmetric bilateral gamma: difference of two independent gamma processes.
    BilateralGamma { shape: f64, rate: f64 },
    /// Compound Poisson with standard normal jumps.
    CompoundPoissonNormal { intensity: f64 },
    /// Brownian motion with drift (no jump part).
    BrownianDrift { drift: f64, variance: f64 },
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

impl LevyModel {
    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        Ok(Self::Gamma {
            shape: positive("gamma shape", shape)?,
            rate: positive("gamma rate", rate)?,
        })
    }

    pub fn bilateral_gamma(shape: f64, rate: f64) -> Result<Self> {
        Ok(Self::BilateralGamma {
            shape: positive("bilateral gamma shape", shape)?,
            rate: positive("bilateral gamma rate", rate)?,
        })
    }

    pub fn compound_poisson_normal(intensity: f64) -> Result<Self> {
        Ok(Self::CompoundPoissonNormal {
            intensity: positive("intensity", intensity)?,
        })
    }

    pub fn brownian_drift(drift: f64, variance: f64) -> Result<Self> {
        if !drift.is_finite() {
            return Err(Error::InvalidParameter(format!("drift must be finite, got {drift}")));
        }
        Ok(Self::BrownianDrift {
            drift,
            variance: positive("variance", variance)?,
        })
    }

    /// True for the models satisfying the finite-variation, driftless, pure-jump setting.
    pub fn has_jump_part(&self) -> bool {
        !matches!(self, Self::BrownianDrift { .. })
    }

    pub fn char_exponent(&self, u: f64) -> Complex64 {
        match *self {
            Self::Gamma { shape, rate } => -shape * (Complex64::new(1.0, -u / rate)).ln(),
            Self::BilateralGamma { shape, rate } => {
                Complex64::from(-shape * (u * u / (rate * rate)).ln_1p())
            }
            Self::CompoundPoissonNormal { intensity } => {
                Complex64::from(intensity * (-0.5 * u * u).exp_m1())
            }
            Self::BrownianDrift { drift, variance } => {
                Complex64::new(-0.5 * variance * u * u, drift * u)
            }
        }
    }

    pub fn char_function(&self, delta: f64, u: f64) -> Complex64 {
        if delta == 0.0 {
            return Complex64::from(1.0);
        }
        (delta * self.char_exponent(u)).exp()
    }

    pub fn char_exponent_derivative(&self, u: f64) -> Complex64 {
        match *self {
            Self::BrownianDrift { drift, variance } => Complex64::new(-variance * u, drift),
            _ => I * self.fourier_g(u).expect("jump model"),
        }
    }

    /// Fourier transform `F[g](u) = int e^{iux} x eta(x) dx`.
    pub fn fourier_g(&self, u: f64) -> Result<Complex64> {
        match *self {
            Self::Gamma { shape, rate } => Ok(shape / Complex64::new(rate, -u)),
            Self::BilateralGamma { shape, rate } => {
                Ok(Complex64::new(0.0, 2.0 * shape * u / (rate * rate + u * u)))
            }
            Self::CompoundPoissonNormal { intensity } => {
                Ok(Complex64::new(0.0, intensity * u * (-0.5 * u * u).exp()))
            }
            Self::BrownianDrift { .. } => Err(Error::NoJumpRepresentation(self.to_string())),
        }
    }

    /// `g(x) = x * eta(x)`.
    pub fn true_g(&self, x: f64) -> Result<f64> {
        match *self {
            Self::Gamma { shape, rate } => Ok(if x > 0.0 { shape * (-rate * x).exp() } else { 0.0 }),
            Self::BilateralGamma { shape, rate } => {
                Ok(if x == 0.0 { 0.0 } else { shape * x.signum() * (-rate * x.abs()).exp() })
            }
            Self::CompoundPoissonNormal { intensity } => {
                Ok(intensity * x * (-0.5 * x * x).exp() / (2.0 * PI).sqrt())
            }
            Self::BrownianDrift { .. } => Err(Error::NoJumpRepresentation(self.to_string())),
        }
    }

    /// `int_{|u| > cutoff} |F[g](u)|^2 du`, in closed form.
    pub fn fourier_g_tail_mass(&self, cutoff: f64) -> Result<f64> {
        let m = cutoff.max(0.0);
        match *self {
            Self::Gamma { shape, rate } => {
                Ok(2.0 * shape * shape / rate * (FRAC_PI_2 - (m / rate).atan()))
            }
            Self::BilateralGamma { shape, rate } => {
                let b = rate;
                let one_side = (FRAC_PI_2 - (m / b).atan()) / (2.0 * b) + m / (2.0 * (b * b + m * m));
                Ok(2.0 * 4.0 * shape * shape * one_side)
            }
            Self::CompoundPoissonNormal { intensity } => {
                let one_side = 0.5 * m * (-m * m).exp() + 0.25 * PI.sqrt() * erfc(m);
                Ok(2.0 * intensity * intensity * one_side)
            }
            Self::BrownianDrift { .. } => Err(Error::NoJumpRepresentation(self.to_string())),
        }
    }

    /// `||g||^2_{L^2}` via Plancherel.
    pub fn g_squared_norm(&self) -> Result<f64> {
        Ok(self.fourier_g_tail_mass(0.0)? / (2.0 * PI))
    }

    fn check_density(&self, delta: f64) -> Result<()> {
        let ok = match *self {
            Self::Gamma { shape, .. } | Self::BilateralGamma { shape, .. } => shape * delta > 0.5,
            Self::CompoundPoissonNormal { .. } => false,
            Self::BrownianDrift { .. } => delta > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::NoDensity(self.to_string()))
        }
    }

    /// `int_{|u| > cutoff} |phi_delta(u)|^2 du`.
    pub fn char_function_tail_mass(&self, delta: f64, cutoff: f64) -> Result<f64> {
        self.check_density(delta)?;
        let m = cutoff.max(0.0);
        match *self {
            Self::Gamma { shape, rate } => Ok(2.0 * power_tail(rate, shape * delta, m)),
            Self::BilateralGamma { shape, rate } => Ok(2.0 * power_tail(rate, 2.0 * shape * delta, m)),
            Self::BrownianDrift { variance, .. } => {
                let c = variance * delta;
                Ok((PI / c).sqrt() * erfc(m * c.sqrt()))
            }
            Self::CompoundPoissonNormal { .. } => unreachable!(),
        }
    }

    /// `||f_delta||^2_{L^2}` via Plancherel.
    pub fn density_squared_norm(&self, delta: f64) -> Result<f64> {
        Ok(self.char_function_tail_mass(delta, 0.0)? / (2.0 * PI))
    }

    /// Density of `X_delta` at `x`.
    ///
    /// Bilateral gamma has no elementary density; it is obtained by Fourier inversion
    /// `f(x) = (1/pi) int_0^inf cos(ux) phi(u) du` with adaptive Simpson on half-periods
    /// of the cosine and an integration-by-parts cut-off (absolute tolerance about 1e-10).
    pub fn true_density(&self, delta: f64, x: f64) -> Result<f64> {
        self.check_density(delta)?;
        match *self {
            Self::Gamma { shape, rate } => {
                if x <= 0.0 {
                    return Ok(0.0);
                }
                let s = shape * delta;
                Ok((s * rate.ln() + (s - 1.0) * x.ln() - rate * x - ln_gamma(s)).exp())
            }
            Self::BrownianDrift { drift, variance } => {
                let v = variance * delta;
                let d = x - drift * delta;
                Ok((-0.5 * d * d / v).exp() / (2.0 * PI * v).sqrt())
            }
            Self::BilateralGamma { shape, rate } => Ok(bilateral_gamma_density(shape * delta, rate, x)),
            Self::CompoundPoissonNormal { .. } => unreachable!(),
        }
    }

    /// `C_m = E[X_+^m] + E[X_-^m]` at time 1 for the one-sided jump processes.
    pub fn moment_bound(&self, m: u32) -> Result<f64> {
        if !matches!(m, 2 | 4 | 8) {
            return Err(Error::UnsupportedMoment(m));
        }
        let m = m as usize;
        match *self {
            Self::Gamma { shape, rate } => Ok(raw_moment(m, |r| gamma_cumulant(shape, rate, r))),
            Self::BilateralGamma { shape, rate } => {
                Ok(2.0 * raw_moment(m, |r| gamma_cumulant(shape, rate, r)))
            }
            Self::CompoundPoissonNormal { intensity } => {
                // each side: intensity/2 jumps per unit time with half-normal sizes
                let side = raw_moment(m, |r| 0.5 * intensity * half_normal_moment(r));
                Ok(2.0 * side)
            }
            Self::BrownianDrift { .. } => Err(Error::NoJumpRepresentation(self.to_string())),
        }
    }

    /// Draws one increment over a time step `delta`.
    pub fn sample_increment<R: Rng + ?Sized>(&self, delta: f64, rng: &mut R) -> f64 {
        match *self {
            Self::Gamma { shape, rate } => sample_gamma(shape * delta, rate, rng),
            Self::BilateralGamma { shape, rate } => {
                sample_gamma(shape * delta, rate, rng) - sample_gamma(shape * delta, rate, rng)
            }
            Self::CompoundPoissonNormal { intensity } => {
                let count: f64 = Poisson::new(intensity * delta)
                    .expect("positive Poisson mean")
                    .sample(rng);
                if count == 0.0 {
                    0.0
                } else {
                    // sum of `count` standard normals
                    let z: f64 = StandardNormal.sample(rng);
                    count.sqrt() * z
                }
            }
            Self::BrownianDrift { drift, variance } => {
                let z: f64 = StandardNormal.sample(rng);
                drift * delta + (variance * delta).sqrt() * z
            }
        }
    }

    /// Simulates the increments of one path on `scheme`, seeded.
    pub fn sample_increments(&self, scheme: &SamplingScheme, seed: u64) -> ObservationSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_increments_with(scheme, &mut rng)
    }

    pub fn sample_increments_with<R: Rng + ?Sized>(
        &self,
        scheme: &SamplingScheme,
        rng: &mut R,
    ) -> ObservationSet {
        let z = scheme
            .deltas()
            .iter()
            .map(|&d| self.sample_increment(d, rng))
            .collect();
        ObservationSet::new(scheme.clone(), z).expect("one increment per gap")
    }
}

fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    // rand_distr uses Marsaglia-Tsang, boosted by U^{1/shape} when shape < 1
    Gamma::new(shape, 1.0 / rate).expect("positive gamma parameters").sample(rng)
}

fn gamma_cumulant(shape: f64, rate: f64, r: usize) -> f64 {
    // kappa_r = shape (r-1)! / rate^r
    let fact: f64 = (1..r).map(|k| k as f64).product();
    shape * fact / rate.powi(r as i32)
}

fn half_normal_moment(r: usize) -> f64 {
    // E|xi|^r = 2^{r/2} Gamma((r+1)/2) / sqrt(pi)
    (0.5 * r as f64 * 2f64.ln() + ln_gamma(0.5 * (r as f64 + 1.0))).exp() / PI.sqrt()
}

/// Raw moment `E[X^m]` from cumulants via `mu_k = sum_{i<k} C(k-1, i) kappa_{i+1} mu_{k-1-i}`.
fn raw_moment(m: usize, cumulant: impl Fn(usize) -> f64) -> f64 {
    let mut mu = vec![1.0; m + 1];
    for k in 1..=m {
        let mut acc = 0.0;
        let mut binom = 1.0;
        for i in 0..k {
            acc += binom * cumulant(i + 1) * mu[k - 1 - i];
            binom = binom * (k - 1 - i) as f64 / (i + 1) as f64;
        }
        mu[k] = acc;
    }
    mu[m]
}

/// `int_m^inf (1 + u^2/b^2)^{-s} du` for `s > 1/2`, via the regularized incomplete beta:
/// `(b/2) B(s - 1/2, 1/2) I_x(s - 1/2, 1/2)` with `x = b^2 / (b^2 + m^2)`.
fn power_tail(b: f64, s: f64, m: f64) -> f64 {
    let x = b * b / (b * b + m * m);
    let full = 0.5 * b * ln_beta(s - 0.5, 0.5).exp();
    if x >= 1.0 {
        full
    } else {
        full * beta_reg(s - 0.5, 0.5, x)
    }
}

fn bilateral_gamma_density(s: f64, b: f64, x: f64) -> f64 {
    let phi = |u: f64| (-s * (u * u / (b * b)).ln_1p()).exp();
    let x = x.abs();
    if x < 1e-9 {
        return power_tail(b, s, 0.0) / PI;
    }
    // |phi'(u)| = 2 s u / b^2 (1 + u^2/b^2)^{-s-1}
    let dphi = |u: f64| 2.0 * s * u / (b * b) * (-(s + 1.0) * (u * u / (b * b)).ln_1p()).exp();
    let period = PI / x;
    let tol = 1e-11;
    let mut total = 0.0;
    let mut k = 0usize;
    loop {
        let a = k as f64 * period;
        let piece = adaptive_simpson(|u| (u * x).cos() * phi(u), a, a + period, tol);
        total += piece;
        k += 1;
        let end = k as f64 * period;
        // sin(end * x) = 0, so the remaining tail is bounded by |phi'(end)| / x^2
        if dphi(end) / (x * x) < 1e-11 && end > b {
            break;
        }
        if k > 20_000_000 {
            break;
        }
    }
    total / PI
}

impl fmt::Display for LevyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Gamma { shape, rate } => write!(f, "gamma({shape},{rate})"),
            Self::BilateralGamma { shape, rate } => write!(f, "bgamma({shape},{rate})"),
            Self::CompoundPoissonNormal { intensity } => write!(f, "cpois_normal({intensity})"),
            Self::BrownianDrift { drift, variance } => write!(f, "bm({drift},{variance})"),
        }
    }
}

impl FromStr for LevyModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse {
            kind: "model",
            input: s.to_string(),
        };
        let s_trim = s.trim();
        let open = s_trim.find('(').ok_or_else(bad)?;
        if !s_trim.ends_with(')') {
            return Err(bad());
        }
        let name = s_trim[..open].trim();
        let args: Vec<f64> = s_trim[open + 1..s_trim.len() - 1]
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        match (name, args.as_slice()) {
            ("gamma", [a, b]) => Self::gamma(*a, *b),
            ("bgamma", [a, b]) => Self::bilateral_gamma(*a, *b),
            ("cpois_normal", [l]) => Self::compound_poisson_normal(*l),
            ("bm", [mu, v]) => Self::brownian_drift(*mu, *v),
            _ => Err(bad()),
        }
    }
}
