use irregular_levy::grid::SpectralGrid;
use irregular_levy::models::LevyModel;
use irregular_levy::sampling::{draw_uniform_gaps, ObservationSet};
use irregular_levy::selection::{
    cv_cutoff_density, cv_cutoff_jump, cv_density_from_sums, cv_jump_from_sums, BlockPlan, CutoffMenu,
};
use irregular_levy::spectral::{compute_p_hat, compute_q_hat, SpectralStatistics};
use irregular_levy::weights::{iterative_weights_grouped, IterativeConfig, WeightScheme};
use num_complex::Complex64;

fn sample(n: usize, seed: u64) -> ObservationSet {
    let model = LevyModel::gamma(3.0, 2.0).unwrap();
    let scheme = draw_uniform_gaps(n, 6.0, seed).unwrap();
    model.sample_increments(&scheme, seed ^ 0xabc)
}

fn clamp(psi: Complex64) -> Complex64 {
    let e = psi.exp();
    e / e.norm().max(1.0)
}

/// Criterion built from scratch: every subset and complement is rebuilt as its own
/// observation set and the integrals are taken over the full symmetric grid.
fn brute_force(obs: &ObservationSet, grid: SpectralGrid, kappa: f64, menu: &[u32], density: bool) -> Vec<f64> {
    let plan = BlockPlan::new(obs.len()).unwrap();
    let full = SpectralStatistics::compute(obs, &WeightScheme::equal(obs.len(), grid), kappa).unwrap();
    let mut subsets = Vec::new();
    for j in 0..plan.subset_count() {
        let inside: Vec<usize> = plan.subset(j).collect();
        let outside: Vec<usize> = (0..obs.len()).filter(|i| !plan.subset(j).contains(i)).collect();
        let p_obs = obs.subset(&inside).unwrap();
        let c_obs = obs.subset(&outside).unwrap();
        let w = WeightScheme::equal(p_obs.len(), grid);
        let p = compute_p_hat(&p_obs, &w).unwrap();
        let q = compute_q_hat(&p_obs, &w).unwrap();
        let raw: Vec<Complex64> = p
            .iter()
            .zip(&q)
            .map(|(a, b)| if b.norm() < 1e-12 { Complex64::default() } else { a / b })
            .collect();
        let comp = SpectralStatistics::compute(&c_obs, &WeightScheme::equal(c_obs.len(), grid), kappa).unwrap();
        subsets.push((raw, comp.psi_prime()));
    }
    let du = grid.du();
    let zero = grid.zero_index();
    let cumulative = |v: &[Complex64]| {
        // int_0^u on the full grid, outward from zero
        let mut out = vec![Complex64::default(); v.len()];
        for k in zero + 1..v.len() {
            out[k] = out[k - 1] + 0.5 * du * (v[k - 1] + v[k]);
        }
        for k in (0..zero).rev() {
            out[k] = out[k + 1] - 0.5 * du * (v[k + 1] + v[k]);
        }
        out
    };
    let transform = |v: Vec<Complex64>| -> Vec<Complex64> {
        if density {
            cumulative(&v).into_iter().map(clamp).collect()
        } else {
            v
        }
    };
    let f = transform(full.psi_prime());
    let pairs: Vec<(Vec<Complex64>, Vec<Complex64>)> =
        subsets.into_iter().map(|(a, b)| (transform(a), transform(b))).collect();
    menu.iter()
        .map(|&m| {
            let top = (m as f64 / du).round() as usize;
            let mut a = 0.0;
            let mut c = 0.0;
            for k in zero - top..=zero + top {
                let w = if k == zero - top || k == zero + top { 0.5 * du } else { du };
                a += w * f[k].norm_sqr();
                let avg: f64 =
                    pairs.iter().map(|(x, y)| (x[k] * y[k].conj()).re).sum::<f64>() / pairs.len() as f64;
                c += w * avg;
            }
            a - 2.0 * c
        })
        .collect()
}

#[test]
fn jump_and_density_criteria_match_brute_force() {
    let obs = sample(1000, 3);
    let grid = SpectralGrid::new(6.0, 0.01).unwrap();
    let menu = CutoffMenu::from_values(vec![1, 2, 3, 4, 5, 6]).unwrap();
    let plan = BlockPlan::new(obs.len()).unwrap();
    let weights = WeightScheme::equal(obs.len(), grid);
    for density in [false, true] {
        let cv = if density {
            cv_cutoff_density(&obs, &weights, 1.0, &menu, &plan).unwrap()
        } else {
            cv_cutoff_jump(&obs, &weights, 1.0, &menu, &plan).unwrap()
        };
        let reference = brute_force(&obs, grid, 1.0, menu.values(), density);
        for ((m, loss), r) in cv.losses.iter().zip(&reference) {
            assert!((loss - r).abs() <= 1e-9 * r.abs().max(1.0), "density={density} m={m}: {loss} vs {r}");
        }
        let best = reference
            .iter()
            .enumerate()
            .fold(0, |b, (i, v)| if *v < reference[b] { i } else { b });
        assert_eq!(cv.selected, menu.values()[best]);
    }
}

#[test]
fn grouped_iterative_sums_feed_cross_validation() {
    let obs = sample(2000, 8);
    let grid = SpectralGrid::for_horizon(obs.horizon());
    let plan = BlockPlan::new(obs.len()).unwrap();
    let menu = CutoffMenu::for_horizon(obs.horizon()).unwrap();
    let (outcome, sums) =
        iterative_weights_grouped(&obs, grid, IterativeConfig::default(), plan.blocks()).unwrap();
    let from_sums = cv_jump_from_sums(&sums, 1.0, &menu, &plan).unwrap();
    let direct = cv_cutoff_jump(&obs, &outcome.weights, 1.0, &menu, &plan).unwrap();
    assert_eq!(from_sums.selected, direct.selected);
    for (a, b) in from_sums.losses.iter().zip(&direct.losses) {
        assert_eq!(a.0, b.0);
        assert!((a.1 - b.1).abs() <= 1e-8 * b.1.abs().max(1.0), "{a:?} vs {b:?}");
    }
    let d1 = cv_density_from_sums(&sums, 1.0, &menu, &plan).unwrap();
    let d2 = cv_cutoff_density(&obs, &outcome.weights, 1.0, &menu, &plan).unwrap();
    assert_eq!(d1.selected, d2.selected);
}

#[test]
fn cv_output_is_well_formed() {
    let obs = sample(1500, 21);
    let grid = SpectralGrid::for_horizon(obs.horizon());
    let menu = CutoffMenu::for_horizon(obs.horizon()).unwrap();
    let plan = BlockPlan::new(obs.len()).unwrap();
    let cv = cv_cutoff_jump(&obs, &WeightScheme::equal(obs.len(), grid), 1.0, &menu, &plan).unwrap();
    assert_eq!(cv.losses.len(), menu.len());
    assert!(cv.losses.iter().all(|(_, l)| l.is_finite()));
    assert!(menu.values().contains(&cv.selected));
    let mut buf = Vec::new();
    cv.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some("m,loss"));
    assert_eq!(text.lines().count(), menu.len() + 1);
}

#[test]
fn rejects_mismatched_inputs() {
    let obs = sample(1000, 1);
    let grid = SpectralGrid::new(3.0, 0.01).unwrap();
    let menu = CutoffMenu::from_values(vec![1, 5]).unwrap();
    let plan = BlockPlan::new(1000).unwrap();
    let w = WeightScheme::equal(1000, grid);
    assert!(cv_cutoff_jump(&obs, &w, 1.0, &menu, &plan).is_err());
    let plan = BlockPlan::new(1200).unwrap();
    let menu = CutoffMenu::from_values(vec![1, 2]).unwrap();
    assert!(cv_cutoff_jump(&obs, &w, 1.0, &menu, &plan).is_err());
}
