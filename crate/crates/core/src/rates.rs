//! Implicit bandwidth equations for the smoothness classes and rate tabulation.
//!
//! Every equation is rewritten as `r(s) = log(lhs) - log(rhs)` in `s = log h` (or
//! `s = log(1/h)` for the density equations) and solved by bisection after a scan of the
//! bracket has confirmed a single sign change.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::quad::adaptive_simpson;
use crate::sampling::SamplingScheme;

/// Parameters of the classes whose bandwidth equations are solved here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmoothnessClass {
    /// `|phi(u)|` decays like `(1 + |u|)^(-beta)`.
    GPol { beta: f64 },
    /// `|phi(u)|` decays like `exp(-c_phi |u|^alpha)` with `alpha < 1/2`.
    GExp { alpha: f64, c_phi: f64 },
    /// Compound Poisson type: `|phi_delta| >= C_phi^delta`, `|Fg(u)|` decays like
    /// `|u|^(-a) exp(-c_g |u|^rho)`.
    GCp { a: f64, rho: f64, c_g: f64, c_phi: f64 },
    /// Local Hölder smoothness `a` away from the origin, polynomial decay `beta`.
    GLocal { a: f64, beta: f64 },
    /// Densities with `|phi(u)| ~ (1 + |u|)^(-beta)`, `4k` finite moments.
    FPol { beta: f64, k: u32 },
    /// Densities with `|phi(u)| ~ exp(-c |u|^alpha)`, `4k` finite moments.
    FExp { alpha: f64, c: f64, k: u32 },
}

impl SmoothnessClass {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("{what} in {self:?}")));
        let pos = |v: f64| v.is_finite() && v > 0.0;
        match *self {
            Self::GPol { beta } if !pos(beta) => bad("beta must be positive"),
            Self::GExp { alpha, c_phi } if !(alpha > 0.0 && alpha < 0.5 && pos(c_phi)) => {
                bad("need alpha in (0, 1/2) and c_phi > 0")
            }
            Self::GCp { a, rho, c_g, c_phi } => {
                if !(rho.is_finite() && rho >= 0.0 && a.is_finite() && a >= 0.0) {
                    bad("need rho >= 0 and a >= 0")
                } else if !(c_phi > 0.0 && c_phi <= 1.0) {
                    bad("C_phi must lie in (0, 1]")
                } else if rho == 0.0 && a == 0.0 {
                    bad("rho = 0 needs a > 0")
                } else if rho > 0.0 && !pos(c_g) {
                    bad("rho > 0 needs c_g > 0")
                } else if !(c_g.is_finite() && c_g >= 0.0) {
                    bad("c_g must be >= 0")
                } else {
                    Ok(())
                }
            }
            Self::GLocal { a, beta } if !(pos(a) && pos(beta)) => bad("a and beta must be positive"),
            Self::FPol { beta, k } if !(beta > 0.5 && beta.is_finite() && k >= 1) => {
                bad("need beta > 1/2 and k >= 1")
            }
            Self::FExp { alpha, c, k } if !(alpha > 0.0 && alpha <= 2.0 && pos(c) && k >= 1) => {
                bad("need alpha in (0, 2], c > 0 and k >= 1")
            }
            _ => Ok(()),
        }
    }

    /// Order of the risk bound at bandwidth `h` for horizon `T`.
    pub fn rate_proxy(&self, h: f64, horizon: f64) -> f64 {
        let inv_t = 1.0 / horizon;
        match *self {
            Self::GPol { .. } => h,
            Self::GExp { alpha, .. } => h.powf(1.0 - 2.0 * alpha),
            Self::GCp { a, rho, c_g, .. } => {
                if rho > 0.0 {
                    (-2.0 * c_g * h.powf(-rho)).exp()
                } else {
                    h.powf(2.0 * a - 1.0)
                }
            }
            Self::GLocal { a, .. } => h.powf(2.0 * a),
            Self::FPol { beta, .. } => h.powf(2.0 * beta - 1.0).max(inv_t),
            Self::FExp { alpha, c, .. } => {
                let decay = (-2.0 * c * h.powf(-alpha)).exp();
                let factor = if alpha < 0.5 {
                    h.powf(alpha - 1.0)
                } else {
                    h.powf(alpha - 1.0).max(1.0)
                };
                (factor * decay).max(inv_t)
            }
        }
    }
}

impl fmt::Display for SmoothnessClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::GPol { beta } => write!(f, "gpol({beta})"),
            Self::GExp { alpha, c_phi } => write!(f, "gexp({alpha},{c_phi})"),
            Self::GCp { a, rho, c_g, c_phi } => write!(f, "gcp({a},{rho},{c_g},{c_phi})"),
            Self::GLocal { a, beta } => write!(f, "glocal({a},{beta})"),
            Self::FPol { beta, k } => write!(f, "fpol({beta},{k})"),
            Self::FExp { alpha, c, k } => write!(f, "fexp({alpha},{c},{k})"),
        }
    }
}

/// Parses `gpol(beta)`, `gexp(alpha,c_phi)`, `gcp(a,rho,c_g,C_phi)`, `glocal(a,beta)`,
/// `fpol(beta,k)` and `fexp(alpha,c,k)`; the result is validated.
impl FromStr for SmoothnessClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse {
            kind: "smoothness class",
            input: s.to_string(),
        };
        let t = s.trim();
        let open = t.find('(').ok_or_else(bad)?;
        let body = t[open + 1..].strip_suffix(')').ok_or_else(bad)?;
        let args: Vec<f64> = body
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        let int = |v: f64| -> Result<u32> {
            if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as u32)
            } else {
                Err(bad())
            }
        };
        let class = match (t[..open].trim().to_ascii_lowercase().as_str(), args.as_slice()) {
            ("gpol", [beta]) => Self::GPol { beta: *beta },
            ("gexp", [alpha, c_phi]) => Self::GExp { alpha: *alpha, c_phi: *c_phi },
            ("gcp", [a, rho, c_g, c_phi]) => Self::GCp { a: *a, rho: *rho, c_g: *c_g, c_phi: *c_phi },
            ("glocal", [a, beta]) => Self::GLocal { a: *a, beta: *beta },
            ("fpol", [beta, k]) => Self::FPol { beta: *beta, k: int(*k)? },
            ("fexp", [alpha, c, k]) => Self::FExp { alpha: *alpha, c: *c, k: int(*k)? },
            _ => return Err(bad()),
        };
        class.validate()?;
        Ok(class)
    }
}

/// Which implicit equation a solution belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equation {
    /// `sum_j D_j h^(2 D_j beta + 2) = 1`
    GlobalPol,
    /// `sum_j D_j exp(-2 D_j c_phi h^-alpha) h^(2(alpha - 1)) = 1`
    GlobalExp,
    /// `exp(2 c_g h^-rho) h^(-2a) = sum_j D_j C_phi^D_j`
    CompoundPoisson,
    /// `sum_j D_j h^(2 beta D_j + 2a + 1) = 1`
    LocalPol,
    /// `|phi_reg(1/h)|^2 = (int_0^{1/h} 1/q_reg)^k`
    Density,
    /// As [`Equation::Density`] with an extra `ln(1/h)` factor inside the power.
    DensityLog,
    /// As [`Equation::Density`] with an extra `(1/h)^(2 alpha - 1)` factor.
    DensityPower,
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(equation_name(*self))
    }
}

/// Root of a bandwidth equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthSolution {
    pub h_star: f64,
    /// `lhs / rhs - 1` at `h_star`.
    pub residual: f64,
    pub equation_id: Equation,
}

const SCAN_POINTS: usize = 64;
const MAX_BISECTIONS: usize = 400;

/// Gap values with multiplicities, so repeated gaps cost one term.
fn distinct_gaps(scheme: &SamplingScheme) -> Vec<(f64, f64)> {
    let mut d = scheme.deltas().to_vec();
    d.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, f64)> = Vec::new();
    for v in d {
        match out.last_mut() {
            Some((g, m)) if *g == v => *m += 1.0,
            _ => out.push((v, 1.0)),
        }
    }
    out
}

/// `log sum_i exp(terms_i)`.
fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let top = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return top;
    }
    top + terms.map(|t| (t - top).exp()).sum::<f64>().ln()
}

/// Bisection for the unique sign change of `r` on `[lo, hi]`.
fn bisect(equation: Equation, lo: f64, hi: f64, r: impl Fn(f64) -> f64) -> Result<(f64, f64)> {
    let fail = |detail: String| Error::BracketFailure {
        equation: equation_name(equation),
        detail,
    };
    let mut changes = 0;
    let mut prev = r(lo);
    if prev.is_nan() {
        return Err(fail(format!("residual undefined at {lo}")));
    }
    let mut a = lo;
    let mut b = hi;
    let mut found = false;
    for i in 1..=SCAN_POINTS {
        let s = lo + (hi - lo) * i as f64 / SCAN_POINTS as f64;
        let v = r(s);
        if v.is_nan() {
            return Err(fail(format!("residual undefined at {s}")));
        }
        if v == 0.0 {
            return Ok((s, 0.0));
        }
        if (v > 0.0) != (prev > 0.0) {
            changes += 1;
            if !found {
                a = s - (hi - lo) / SCAN_POINTS as f64;
                b = s;
                found = true;
            }
        }
        prev = v;
    }
    if changes != 1 {
        return Err(fail(format!(
            "expected one sign change on [{lo}, {hi}], found {changes}"
        )));
    }
    let mut fa = r(a);
    let mut fb = r(b);
    for _ in 0..MAX_BISECTIONS {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = r(m);
        if fm == 0.0 {
            return Ok((m, 0.0));
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
            fb = fm;
        }
    }
    Ok(if fa.abs() <= fb.abs() { (a, fa) } else { (b, fb) })
}

fn equation_name(e: Equation) -> &'static str {
    match e {
        Equation::GlobalPol => "global-pol",
        Equation::GlobalExp => "global-exp",
        Equation::CompoundPoisson => "compound-poisson",
        Equation::LocalPol => "local-pol",
        Equation::Density => "density",
        Equation::DensityLog => "density-log",
        Equation::DensityPower => "density-power",
    }
}

fn solution(equation: Equation, h_star: f64, log_residual: f64) -> BandwidthSolution {
    BandwidthSolution {
        h_star,
        residual: log_residual.exp_m1(),
        equation_id: equation,
    }
}

/// Solves `sum_j D_j h^(p D_j + e) = 1` on `(0, 1)`.
fn solve_power_sum(scheme: &SamplingScheme, p: f64, e: f64, equation: Equation) -> Result<BandwidthSolution> {
    let horizon = scheme.horizon();
    if horizon < 1.0 {
        return Err(Error::NoRootInUnitInterval(horizon));
    }
    let gaps = distinct_gaps(scheme);
    if horizon == 1.0 {
        return Ok(solution(equation, 1.0, 0.0));
    }
    let r = |s: f64| log_sum_exp(gaps.iter().map(|&(d, m)| (m * d).ln() + (p * d + e) * s));
    let lo = -1.0;
    let mut lo_s = lo;
    while r(lo_s) >= 0.0 {
        lo_s *= 2.0;
        if lo_s < -1e6 {
            return Err(Error::BracketFailure {
                equation: equation_name(equation),
                detail: "left side does not vanish as h -> 0".into(),
            });
        }
    }
    let (s, res) = bisect(equation, lo_s, 0.0, r)?;
    Ok(solution(equation, s.exp(), res))
}

/// Bandwidth for the polynomial-decay class.
pub fn solve_h_global_pol(scheme: &SamplingScheme, beta: f64) -> Result<BandwidthSolution> {
    SmoothnessClass::GPol { beta }.validate()?;
    solve_power_sum(scheme, 2.0 * beta, 2.0, Equation::GlobalPol)
}

/// Bandwidth for the local Hölder class; the risk is of order `h^(2a)`.
pub fn solve_h_local(scheme: &SamplingScheme, a: f64, beta: f64) -> Result<BandwidthSolution> {
    SmoothnessClass::GLocal { a, beta }.validate()?;
    solve_power_sum(scheme, 2.0 * beta, 2.0 * a + 1.0, Equation::LocalPol)
}

/// Bandwidth for the exponential-decay class, searched over `log h` in `[-60, 0]`.
pub fn solve_h_global_exp(scheme: &SamplingScheme, alpha: f64, c_phi: f64) -> Result<BandwidthSolution> {
    SmoothnessClass::GExp { alpha, c_phi }.validate()?;
    let gaps = distinct_gaps(scheme);
    let r = |s: f64| {
        let inv_pow = (-alpha * s).exp();
        log_sum_exp(
            gaps.iter()
                .map(|&(d, m)| (m * d).ln() - 2.0 * d * c_phi * inv_pow + 2.0 * (alpha - 1.0) * s),
        )
    };
    let (s, res) = bisect(Equation::GlobalExp, -60.0, 0.0, r)?;
    Ok(solution(Equation::GlobalExp, s.exp(), res))
}

/// Bandwidth for the compound Poisson class.
///
/// With `rho = 0` the equation reads `exp(2 c_g) h^(-2a) = R` and is solved in closed form.
pub fn solve_h_cp(scheme: &SamplingScheme, a: f64, rho: f64, c_g: f64, c_phi: f64) -> Result<BandwidthSolution> {
    SmoothnessClass::GCp { a, rho, c_g, c_phi }.validate()?;
    let gaps = distinct_gaps(scheme);
    let log_rhs = log_sum_exp(gaps.iter().map(|&(d, m)| (m * d).ln() + d * c_phi.ln()));
    if rho == 0.0 {
        let s = (2.0 * c_g - log_rhs) / (2.0 * a);
        let r = 2.0 * c_g - 2.0 * a * s - log_rhs;
        return Ok(solution(Equation::CompoundPoisson, s.exp(), r));
    }
    let r = |s: f64| 2.0 * c_g * (-rho * s).exp() - 2.0 * a * s - log_rhs;
    let (s, res) = bisect(Equation::CompoundPoisson, -60.0, 60.0, r)?;
    Ok(solution(Equation::CompoundPoisson, s.exp(), res))
}

/// `x -> int_0^x 1 / q_reg` with `q_reg(u) = sum_j D_j |phi_reg(u)|^(2 D_j)`.
///
/// The integral is accumulated over dyadic pieces `[2^i x0, 2^(i+1) x0]`, each integrated
/// to a tolerance relative to its own size, and cached.
struct ReciprocalIntegral {
    gaps: Vec<(f64, f64)>,
    log_phi: Box<dyn Fn(f64) -> f64>,
    tol: f64,
    cum: std::cell::RefCell<Vec<f64>>,
}

const DYADIC_START: f64 = 1e-12;

impl ReciprocalIntegral {
    fn integrand(&self, x: f64) -> f64 {
        let lp = (self.log_phi)(x);
        let log_q = log_sum_exp(self.gaps.iter().map(|&(d, m)| (m * d).ln() + 2.0 * d * lp));
        (-log_q).exp()
    }

    fn piece(&self, a: f64, b: f64) -> f64 {
        let scale = (b - a) * self.integrand(b).max(self.integrand(a));
        if !scale.is_finite() {
            return f64::INFINITY;
        }
        adaptive_simpson(|x| self.integrand(x), a, b, self.tol * scale)
    }

    fn boundary(i: usize) -> f64 {
        if i == 0 {
            0.0
        } else {
            DYADIC_START * 2f64.powi(i as i32 - 1)
        }
    }

    fn value(&self, x: f64) -> f64 {
        let mut i = 0;
        while Self::boundary(i + 1) <= x {
            i += 1;
        }
        let mut cum = self.cum.borrow_mut();
        if cum.is_empty() {
            cum.push(0.0);
        }
        while cum.len() <= i {
            let j = cum.len();
            let next = cum[j - 1] + self.piece(Self::boundary(j - 1), Self::boundary(j));
            cum.push(next);
        }
        cum[i] + self.piece(Self::boundary(i), x)
    }
}

/// Relative tolerance of the inner integral.
pub const DENSITY_QUAD_TOL: f64 = 1e-9;

/// Bandwidth for the density classes [`SmoothnessClass::FPol`] and
/// [`SmoothnessClass::FExp`].
///
/// For exponential decay the equation gains a factor `ln(1/h)` when `alpha = 1/2` and
/// `(1/h)^(2 alpha - 1)` when `alpha > 1/2`. The search runs over `log(1/h)` in `[-30, 30]`.
pub fn solve_h_density(scheme: &SamplingScheme, class: SmoothnessClass) -> Result<BandwidthSolution> {
    class.validate()?;
    let gaps = distinct_gaps(scheme);
    let (log_phi, k, equation, alpha): (Box<dyn Fn(f64) -> f64>, u32, Equation, f64) = match class {
        SmoothnessClass::FPol { beta, k } => (Box::new(move |x: f64| -beta * x.ln_1p()), k, Equation::Density, 0.0),
        SmoothnessClass::FExp { alpha, c, k } => {
            let eq = if alpha < 0.5 {
                Equation::Density
            } else if alpha == 0.5 {
                Equation::DensityLog
            } else {
                Equation::DensityPower
            };
            (Box::new(move |x: f64| -c * x.powf(alpha)), k, eq, alpha)
        }
        _ => {
            return Err(Error::InvalidParameter(format!(
                "{class:?} is not a density class"
            )))
        }
    };
    let integral = ReciprocalIntegral {
        gaps,
        log_phi,
        tol: DENSITY_QUAD_TOL,
        cum: Default::default(),
    };
    let r = |s: f64| {
        let x = s.exp();
        let lhs = 2.0 * (integral.log_phi)(x);
        let inner = integral.value(x);
        let factor = match equation {
            Equation::DensityLog => s,
            Equation::DensityPower => x.powf(2.0 * alpha - 1.0),
            _ => 1.0,
        };
        let base = factor * inner;
        if base <= 0.0 {
            return f64::INFINITY;
        }
        lhs - k as f64 * base.ln()
    };
    let (s, res) = bisect(equation, -30.0, 30.0, r)?;
    Ok(solution(equation, (-s).exp(), res))
}

/// Dispatches on the class.
pub fn solve_h(scheme: &SamplingScheme, class: SmoothnessClass) -> Result<BandwidthSolution> {
    match class {
        SmoothnessClass::GPol { beta } => solve_h_global_pol(scheme, beta),
        SmoothnessClass::GExp { alpha, c_phi } => solve_h_global_exp(scheme, alpha, c_phi),
        SmoothnessClass::GCp { a, rho, c_g, c_phi } => solve_h_cp(scheme, a, rho, c_g, c_phi),
        SmoothnessClass::GLocal { a, beta } => solve_h_local(scheme, a, beta),
        SmoothnessClass::FPol { .. } | SmoothnessClass::FExp { .. } => solve_h_density(scheme, class),
    }
}

/// One row of a rate table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub horizon: f64,
    pub delta_max: f64,
    pub h_star: f64,
    pub rate_proxy: f64,
}

/// Solves the class equation on every scheme.
pub fn tabulate(schemes: &[SamplingScheme], class: SmoothnessClass) -> Result<Vec<RateRow>> {
    schemes
        .iter()
        .map(|s| {
            let sol = solve_h(s, class)?;
            Ok(RateRow {
                horizon: s.horizon(),
                delta_max: s.delta_max(),
                h_star: sol.h_star,
                rate_proxy: class.rate_proxy(sol.h_star, s.horizon()),
            })
        })
        .collect()
}

/// Writes `T,delta_max,h_star,rate_proxy` rows.
pub fn write_rates_csv<W: Write>(rows: &[RateRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "T,delta_max,h_star,rate_proxy")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.horizon, r.delta_max, r.h_star, r.rate_proxy)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mixed() -> SamplingScheme {
        let mut g = vec![0.5; 500];
        g.extend(vec![2.0; 500]);
        SamplingScheme::from_gaps(g, 2.0).unwrap()
    }

    #[test]
    fn global_pol_homogeneous() {
        let s = SamplingScheme::homogeneous(100, 1.0).unwrap();
        let sol = solve_h_global_pol(&s, 1.0).unwrap();
        assert!((sol.h_star - 100f64.powf(-0.25)).abs() < 1e-12);
        assert!(sol.residual.abs() < 1e-10);
        assert_eq!(sol.equation_id, Equation::GlobalPol);
    }

    #[test]
    fn global_pol_mixed_residual() {
        let s = mixed();
        let sol = solve_h_global_pol(&s, 1.0).unwrap();
        let direct: f64 = s.deltas().iter().map(|d| d * sol.h_star.powf(2.0 * d + 2.0)).sum();
        assert!((direct - 1.0).abs() < 1e-10, "{direct}");
    }

    #[test]
    fn short_horizon_has_no_root() {
        let s = SamplingScheme::homogeneous(2, 0.25).unwrap();
        assert!(matches!(solve_h_global_pol(&s, 1.0), Err(Error::NoRootInUnitInterval(_))));
        assert!(matches!(solve_h_local(&s, 1.0, 1.0), Err(Error::NoRootInUnitInterval(_))));
    }

    #[test]
    fn cp_closed_forms() {
        let s = SamplingScheme::homogeneous(10_000, 1.0).unwrap();
        let sol = solve_h_cp(&s, 1.0, 0.0, 0.0, 1.0).unwrap();
        assert!((sol.h_star - 0.01).abs() < 1e-14);
        let sol = solve_h_cp(&s, 0.0, 1.0, 0.7, 1.0).unwrap();
        assert!((sol.h_star - 1.4 / 10_000f64.ln()).abs() < 1e-12);
        assert!(sol.residual.abs() < 1e-10);
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        let s = mixed();
        assert!(solve_h_global_exp(&s, 0.6, 1.0).is_err());
        assert!(solve_h_cp(&s, 1.0, 0.0, 0.0, 1.5).is_err());
        assert!(solve_h_density(&s, SmoothnessClass::FPol { beta: 0.4, k: 1 }).is_err());
        assert!(solve_h_density(&s, SmoothnessClass::GPol { beta: 1.0 }).is_err());
    }

    #[test]
    fn class_designations_round_trip() {
        for text in ["gpol(1)", "gexp(0.4,1)", "gcp(0.25,0.5,1,0.9)", "glocal(1,2)", "fpol(1.5,2)", "fexp(1,0.5,3)"] {
            let c: SmoothnessClass = text.parse().unwrap();
            assert_eq!(c.to_string(), text);
        }
        assert!("fpol(1,0.5)".parse::<SmoothnessClass>().is_err());
        assert!("gexp(0.7,1)".parse::<SmoothnessClass>().is_err());
        assert!("gpol 1".parse::<SmoothnessClass>().is_err());
    }

    #[test]
    fn csv_header() {
        let mut buf = Vec::new();
        write_rates_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "T,delta_max,h_star,rate_proxy\n");
    }
}
