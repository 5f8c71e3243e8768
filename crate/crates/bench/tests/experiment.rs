use irregular_levy::selection::CutoffMenu;
use irregular_levy::{LevyModel, SpectralStatistics, WeightScheme};
use irregular_levy_bench::experiment::{grid_for, oracle_cutoff, risk_profile, simulate_replication};
use irregular_levy_bench::report::{write_per_rep, write_summary};
use irregular_levy_bench::{run_table_experiment, ExperimentConfig, Settings, Target};

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_settings(&Settings::parse(text).unwrap()).unwrap()
}

#[test]
fn zero_estimate_has_flat_risk() {
    let cfg = config("model=gamma(3,2)\nn=400\nseed=9\n");
    let model: LevyModel = "gamma(3,2)".parse().unwrap();
    let obs = simulate_replication(&cfg, &model, 400, 0).unwrap();
    let grid = grid_for(&cfg, obs.horizon()).unwrap();
    let w = WeightScheme::equal(obs.len(), grid);
    // every node fails a huge threshold, so Psi'^ vanishes
    let stats = SpectralStatistics::compute(&obs, &w, 1e300).unwrap();
    assert!(stats.psi_prime_half().iter().all(|v| v.norm() == 0.0));
    let menu = CutoffMenu::for_horizon(obs.horizon()).unwrap();
    let risks = risk_profile(&stats, &model, Target::Jump, &menu).unwrap();
    // ||g||^2 for g(x) = 3 exp(-2x) on x > 0
    for r in &risks {
        assert!((r - 9.0 / 4.0).abs() < 1e-4, "{r}");
    }
    let m = oracle_cutoff(&menu, &risks);
    let best = risks.iter().cloned().fold(f64::INFINITY, f64::min);
    let i = menu.values().iter().position(|&v| v == m).unwrap();
    assert_eq!(risks[i], best);
    assert!(risks[..i].iter().all(|&r| r > best));
}

#[test]
fn oracle_cutoff_is_stable_across_reruns() {
    let cfg = config("model=gamma(3,2)\nn=1000\nseed=4\n");
    let model = cfg.models[0];
    let pick = || {
        let obs = simulate_replication(&cfg, &model, 1000, 3).unwrap();
        let grid = grid_for(&cfg, obs.horizon()).unwrap();
        let w = WeightScheme::oracle(&model, obs.scheme(), grid);
        let stats = SpectralStatistics::compute(&obs, &w, cfg.kappa).unwrap();
        let menu = CutoffMenu::for_horizon(obs.horizon()).unwrap();
        let risks = risk_profile(&stats, &model, Target::Jump, &menu).unwrap();
        (oracle_cutoff(&menu, &risks), risks)
    };
    let (a, ra) = pick();
    let (b, rb) = pick();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
}

#[test]
fn report_has_one_row_per_cell_and_target() {
    let cfg = config("model=gamma(3,2),cpois_normal(3)\nn=1000\nreps=2\nseed=3\ntarget=jump\nmax_iters=3\n");
    let report = run_table_experiment(&cfg).unwrap();
    assert_eq!(report.summaries.len(), 2);
    assert_eq!(report.records.len(), 4);
    let mut summary = Vec::new();
    write_summary(&report.summaries, &mut summary).unwrap();
    assert_eq!(String::from_utf8(summary).unwrap().lines().count(), 3);
    for r in &report.records {
        assert!(r.r_or.is_finite() && r.r_ad.is_finite() && r.r_eq.is_finite());
        assert!(r.builds <= 4);
        assert!(r.m_or >= 1 && f64::from(r.m_or) <= r.horizon.sqrt());
    }
    let mut a = Vec::new();
    write_per_rep(&report.records, &mut a).unwrap();
    let again = run_table_experiment(&cfg).unwrap();
    let mut b = Vec::new();
    write_per_rep(&again.records, &mut b).unwrap();
    assert_eq!(a, b);
}

#[test]
fn cells_share_replication_streams() {
    let cfg = config("model=gamma(3,2),gamma(2,1)\nn=50\nseed=12\n");
    let a = simulate_replication(&cfg, &cfg.models[0], 50, 7).unwrap();
    let b = simulate_replication(&cfg, &cfg.models[1], 50, 7).unwrap();
    assert_eq!(a.scheme().deltas(), b.scheme().deltas());
    let c = simulate_replication(&cfg, &cfg.models[0], 50, 8).unwrap();
    assert_ne!(a.scheme().deltas(), c.scheme().deltas());
}
