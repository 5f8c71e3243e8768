use std::f64::consts::PI;

use irregular_levy::estimators::{l2_risk_jump, estimate_g, JumpEstimate, Kernel};
use irregular_levy::grid::SpectralGrid;
use irregular_levy::models::LevyModel;
use irregular_levy::sampling::draw_uniform_gaps;
use irregular_levy::spectral::{clamp_phi, SpectralStatistics};
use irregular_levy::weights::WeightScheme;
use num_complex::Complex64;
use proptest::prelude::*;

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

#[test]
fn exact_p_and_q_reproduce_psi_prime() {
    let model = LevyModel::gamma(3.0, 2.0).unwrap();
    let scheme = draw_uniform_gaps(1000, 6.0, 11).unwrap();
    let grid = SpectralGrid::new(20.0, 0.01).unwrap();
    for weights in [
        WeightScheme::oracle(&model, &scheme, grid),
        WeightScheme::equal(scheme.len(), grid),
    ] {
        let mut p = Vec::new();
        let mut q = Vec::new();
        let mut s = Vec::new();
        for (k, &u) in grid.half_nodes().iter().enumerate() {
            let dpsi = model.char_exponent_derivative(u);
            let (mut pk, mut qk, mut sk) = (Complex64::default(), Complex64::default(), 0.0);
            for (j, &d) in scheme.deltas().iter().enumerate() {
                let w = weights.weight(j, k);
                let phi = model.char_function(d, u);
                qk += d * w * phi;
                pk += d * w * dpsi * phi;
                sk += d * d * w.norm_sqr();
            }
            p.push(pk);
            q.push(qk);
            s.push(sk.sqrt());
        }
        let stats = SpectralStatistics::from_parts(grid, 1.0, p, q.clone(), s.clone()).unwrap();
        let mut passing = 0;
        for (k, &u) in grid.half_nodes().iter().enumerate() {
            let est = stats.psi_prime_half()[k];
            if q[k].norm() >= s[k].max(1.0) {
                passing += 1;
                let truth = model.char_exponent_derivative(u);
                assert!((est - truth).norm() <= 1e-12 * truth.norm().max(1.0), "u={u}: {est} vs {truth}");
            } else {
                assert_eq!(est, Complex64::default());
            }
        }
        assert!(passing > 10, "{passing}");
    }
}

#[test]
fn smoothed_estimate_matches_fine_quadrature() {
    let grid = SpectralGrid::new(5.0, 0.001).unwrap();
    for model in [LevyModel::compound_poisson_normal(3.0).unwrap(), LevyModel::gamma(3.0, 2.0).unwrap()] {
        let half: Vec<Complex64> = grid.half_nodes().iter().map(|&u| model.char_exponent_derivative(u)).collect();
        for kernel in [Kernel::Sinc, Kernel::CompactOrder2] {
            let h = 1.0 / 3.0;
            let est = JumpEstimate::from_psi_prime(grid, &half, kernel, h).unwrap();
            for x in [-2.0, -0.3, 0.0, 0.7, 1.5, 4.0] {
                let integrand =
                    |u: f64| (Complex64::cis(-u * x) * model.fourier_g(u).unwrap()).re * kernel.fourier(h * u);
                let upper = kernel.cutoff(h).unwrap_or(grid.u_max());
                let direct = simpson(integrand, 0.0, upper, 200_000) / PI;
                let value = est.evaluate(x);
                assert!((value - direct).abs() < 1e-6, "{model} {kernel}: x={x} {value} vs {direct}");
                assert!((est.evaluate_complex(x).re - value).abs() < 1e-12);
                assert!(est.evaluate_complex(x).im.abs() < 1e-12);
            }
        }
    }
}

#[test]
fn spatial_and_spectral_risks_agree() {
    let model = LevyModel::compound_poisson_normal(3.0).unwrap();
    let scheme = draw_uniform_gaps(1000, 6.0, 2024).unwrap();
    let obs = model.sample_increments(&scheme, 99);
    let grid = SpectralGrid::for_horizon(scheme.horizon());
    let weights = WeightScheme::oracle(&model, &scheme, grid);
    let stats = SpectralStatistics::compute(&obs, &weights, 1.0).unwrap();
    let est = estimate_g(&stats, Kernel::Sinc, 1.0 / 3.0).unwrap();
    let spectral = l2_risk_jump(&est, &model).unwrap();
    let spatial = simpson(
        |x| (est.evaluate(x) - model.true_g(x).unwrap()).powi(2),
        -30.0,
        30.0,
        12_000,
    );
    assert!(spectral > 1e-4);
    assert!((spatial - spectral).abs() < 1e-3, "{spatial} vs {spectral}");
}

#[test]
fn sigma_is_bounded_by_q_under_oracle_weights() {
    for (model, upper) in [
        (LevyModel::gamma(3.0, 2.0).unwrap(), 6.0),
        (LevyModel::bilateral_gamma(2.0, 4.0).unwrap(), 2.0),
        (LevyModel::compound_poisson_normal(3.0).unwrap(), 0.5),
    ] {
        let scheme = draw_uniform_gaps(500, upper, 5).unwrap();
        let obs = model.sample_increments(&scheme, 6);
        let grid = SpectralGrid::for_horizon(scheme.horizon());
        let weights = WeightScheme::oracle(&model, &scheme, grid);
        let stats = SpectralStatistics::compute(&obs, &weights, 1.0).unwrap();
        let bar = scheme.delta_max_bar().sqrt();
        for (k, s) in stats.sigma_half().iter().enumerate() {
            let u = grid.node(k);
            // q(u) = sum_j D_j |phi_{D_j}(u)|^2 under oracle weights
            let q: f64 = scheme.deltas().iter().map(|&d| d * model.char_function(d, u).norm_sqr()).sum();
            assert!(*s <= bar * q.sqrt() * (1.0 + 1e-12), "u={u}: {s} vs {}", bar * q.sqrt());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn clamped_char_function_is_bounded_and_one_at_origin(
        values in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 2..60),
        du in 0.001f64..1.0,
    ) {
        let grid = SpectralGrid::from_points(du * (values.len() - 1) as f64, 2 * values.len() - 1).unwrap();
        let half: Vec<Complex64> = values.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
        let psi_prime = irregular_levy::grid::mirror(&half, irregular_levy::grid::Symmetry::AntiHermitian);
        let psi = irregular_levy::spectral::integrate_psi(&psi_prime, &grid);
        let est = clamp_phi(&psi, &grid).unwrap();
        let phi = est.phi_hat();
        prop_assert_eq!(phi[grid.zero_index()], Complex64::new(1.0, 0.0));
        for v in &phi {
            prop_assert!(v.norm() <= 1.0 + 1e-15);
        }
    }

    #[test]
    fn estimated_char_function_is_bounded(seed in 0u64..10_000, kappa in 0.0f64..3.0) {
        let model = LevyModel::gamma(3.0, 2.0).unwrap();
        let scheme = draw_uniform_gaps(60, 6.0, seed).unwrap();
        let obs = model.sample_increments(&scheme, seed + 1);
        let grid = SpectralGrid::new(15.0, 0.05).unwrap();
        let stats = SpectralStatistics::compute(&obs, &WeightScheme::equal(60, grid), kappa).unwrap();
        let est = stats.char_fn_estimate();
        prop_assert_eq!(est.phi_hat_half()[0], Complex64::new(1.0, 0.0));
        for v in est.phi_hat() {
            prop_assert!(v.norm() <= 1.0 + 1e-15);
        }
    }
}
