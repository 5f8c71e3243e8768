//! Small quadrature toolbox: adaptive Simpson on finite and half-infinite intervals.

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Integral over `[a, inf)` by the map `u = a + t / (1 - t)`, `t in [0, 1)`.
///
/// The integrand must decay at least like `u^{-2}` for the mapped integrand to stay bounded.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> f64 {
    let g = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - t;
        let v = f(a + t / s) / (s * s);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    adaptive_simpson(g, 0.0, 1.0, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let v = adaptive_simpson(|x| x * x * x - 2.0 * x + 1.0, -1.0, 2.0, 1e-12);
        assert!((v - (4.0 - 0.25 - 3.0 + 3.0)).abs() < 1e-12);
    }

    #[test]
    fn lorentzian_tail() {
        // int_0^inf du / (4 + u^2) = pi / 4
        let v = integrate_to_infinity(|u| 1.0 / (4.0 + u * u), 0.0, 1e-12);
        assert!((v - PI / 4.0).abs() < 1e-9);
    }

    #[test]
    fn oscillatory_finite() {
        let v = adaptive_simpson(|x| (3.0 * x).cos(), 0.0, 2.0, 1e-12);
        assert!((v - (6.0f64).sin() / 3.0).abs() < 1e-10);
    }
}
