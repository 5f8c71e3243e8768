//! Monte Carlo replications comparing oracle, data-driven and equal weighting.
//!
//! Each replication draws a scheme and a path, then builds three pipelines:
//! oracle weights with the oracle cutoff, iterative weights with the cross-validated
//! cutoff, and equal weights with the oracle cutoff. The equal-weight statistics are the
//! starting point of the iterative scheme, and the cross-validation reuses the per-block
//! sums of its final sweep.

use std::time::{Duration, Instant};

use irregular_levy::estimators::{density_risk_profile, jump_risk_profile};
use irregular_levy::sampling::draw_uniform_gaps_with;
use irregular_levy::selection::{cv_density_from_sums, cv_jump_from_sums, BlockPlan, CutoffMenu};
use irregular_levy::weights::{iterative_weights_grouped, IterativeConfig};
use irregular_levy::{LevyModel, ObservationSet, SpectralGrid, SpectralStatistics, WeightScheme};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, GapLaw, Target};
use crate::error::{BenchError, Result};

/// Outcome of one replication for one target.
#[derive(Debug, Clone, PartialEq)]
pub struct RepRecord {
    pub model: LevyModel,
    pub n: usize,
    pub gap_upper: f64,
    pub target: Target,
    pub rep: usize,
    pub horizon: f64,
    /// Oracle cutoff of the oracle-weight estimate.
    pub m_or: u32,
    pub r_or: f64,
    /// Cross-validated cutoff of the iterative-weight estimate.
    pub m_ad: u32,
    /// Oracle cutoff of the iterative-weight estimate, for judging `m_ad`.
    pub m_star_ad: u32,
    pub r_ad: f64,
    pub m_eq: u32,
    pub r_eq: f64,
    pub builds: usize,
    pub converged: bool,
}

/// Mean and standard error of one column over the replications of a cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub mean: f64,
    pub se: f64,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            se: (var / n).sqrt(),
        }
    }
}

/// Aggregates of one `(model, n, target)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub model: LevyModel,
    pub n: usize,
    pub gap_upper: f64,
    pub target: Target,
    pub r_or: Aggregate,
    pub r_ad: Aggregate,
    pub r_eq: Aggregate,
    pub reps: usize,
    pub seed: u64,
}

/// Everything produced by [`run_table_experiment`].
#[derive(Debug, Clone)]
pub struct RiskReport {
    pub config: ExperimentConfig,
    pub records: Vec<RepRecord>,
    pub summaries: Vec<CellSummary>,
    pub runtime: Duration,
}

impl RiskReport {
    /// Records of one cell, in replication order.
    pub fn cell(&self, model: &LevyModel, n: usize, target: Target) -> Vec<&RepRecord> {
        self.records
            .iter()
            .filter(|r| &r.model == model && r.n == n && r.target == target)
            .collect()
    }

    pub fn summary(&self, model: &LevyModel, n: usize, target: Target) -> Option<&CellSummary> {
        self.summaries
            .iter()
            .find(|s| &s.model == model && s.n == n && s.target == target)
    }
}

/// Generator of replication `rep`: the run seed selects the key, the replication the stream.
pub fn replication_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

/// Observations of replication `rep` of `model` with `n` gaps.
pub fn simulate_replication(cfg: &ExperimentConfig, model: &LevyModel, n: usize, rep: usize) -> Result<ObservationSet> {
    let mut rng = replication_rng(cfg.seed, rep);
    let scheme = match &cfg.gaps {
        GapLaw::Uniform(upper) => draw_uniform_gaps_with(n, *upper, &mut rng)
            .map_err(|e| BenchError::numeric("drawing gaps", e))?,
        GapLaw::Fixed { scheme, .. } => scheme.clone(),
    };
    Ok(model.sample_increments_with(&scheme, &mut rng))
}

/// Grid for horizon `T`: spacing `grid_du`, half-width `grid_umax` or `max(sqrt T, 10)`.
pub fn grid_for(cfg: &ExperimentConfig, horizon: f64) -> irregular_levy::Result<SpectralGrid> {
    let u_max = cfg
        .grid_umax
        .unwrap_or_else(|| horizon.sqrt().max(irregular_levy::grid::DEFAULT_MIN_U_MAX));
    SpectralGrid::new(u_max, cfg.grid_du)
}

/// Smallest minimiser of `risks` over `menu`.
pub fn oracle_cutoff(menu: &CutoffMenu, risks: &[f64]) -> u32 {
    menu.argmin(risks)
}

/// True risks over the menu for one set of statistics.
pub fn risk_profile(
    stats: &SpectralStatistics,
    model: &LevyModel,
    target: Target,
    menu: &CutoffMenu,
) -> irregular_levy::Result<Vec<f64>> {
    let cutoffs: Vec<f64> = menu.values().iter().map(|&m| m as f64).collect();
    match target {
        Target::Jump => jump_risk_profile(stats.grid(), stats.psi_prime_half(), model, &cutoffs),
        Target::Density => {
            let phi = stats.char_fn_estimate();
            density_risk_profile(stats.grid(), phi.phi_hat_half(), model, 1.0, &cutoffs)
        }
    }
}

fn pick(menu: &CutoffMenu, risks: &[f64], m: u32) -> f64 {
    let i = menu.values().iter().position(|&v| v == m).expect("cutoff from the menu");
    risks[i]
}

/// One replication, evaluated for every configured target.
pub fn run_replication(cfg: &ExperimentConfig, model: &LevyModel, n: usize, rep: usize) -> Result<Vec<RepRecord>> {
    let wrap = |source| BenchError::Replication {
        model: model.to_string(),
        n,
        rep,
        source,
    };
    let obs = simulate_replication(cfg, model, n, rep)?;
    let horizon = obs.horizon();
    let grid = grid_for(cfg, horizon).map_err(wrap)?;
    let menu = CutoffMenu::for_horizon(horizon).map_err(wrap)?;
    let plan = BlockPlan::new(n).map_err(wrap)?;

    let oracle_w = WeightScheme::oracle(model, obs.scheme(), grid);
    let oracle = SpectralStatistics::compute(&obs, &oracle_w, cfg.kappa).map_err(wrap)?;
    let iter_cfg = IterativeConfig {
        kappa: cfg.kappa,
        max_iters: cfg.max_iters,
    };
    let (outcome, sums) = iterative_weights_grouped(&obs, grid, iter_cfg, plan.blocks()).map_err(wrap)?;

    cfg.targets
        .iter()
        .map(|&target| {
            let or_risks = risk_profile(&oracle, model, target, &menu)?;
            let ad_risks = risk_profile(&outcome.statistics, model, target, &menu)?;
            let eq_risks = risk_profile(&outcome.initial_statistics, model, target, &menu)?;
            let cv = match target {
                Target::Jump => cv_jump_from_sums(&sums, cfg.kappa, &menu, &plan)?,
                Target::Density => cv_density_from_sums(&sums, cfg.kappa, &menu, &plan)?,
            };
            let m_or = oracle_cutoff(&menu, &or_risks);
            let m_eq = oracle_cutoff(&menu, &eq_risks);
            Ok(RepRecord {
                model: *model,
                n,
                gap_upper: cfg.gaps.upper(),
                target,
                rep,
                horizon,
                m_or,
                r_or: pick(&menu, &or_risks, m_or),
                m_ad: cv.selected,
                m_star_ad: oracle_cutoff(&menu, &ad_risks),
                r_ad: pick(&menu, &ad_risks, cv.selected),
                m_eq,
                r_eq: pick(&menu, &eq_risks, m_eq),
                builds: outcome.builds,
                converged: outcome.converged,
            })
        })
        .collect::<irregular_levy::Result<Vec<_>>>()
        .map_err(wrap)
}

/// Runs every `(model, n)` cell, replications in parallel, results in a fixed order.
pub fn run_table_experiment(cfg: &ExperimentConfig) -> Result<RiskReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut records = Vec::new();
    let mut summaries = Vec::new();
    for model in &cfg.models {
        for &n in &cfg.ns {
            let per_rep: Vec<Vec<RepRecord>> = (0..cfg.reps)
                .into_par_iter()
                .map(|rep| run_replication(cfg, model, n, rep))
                .collect::<Result<_>>()?;
            for &target in &cfg.targets {
                let cell: Vec<&RepRecord> = per_rep.iter().flatten().filter(|r| r.target == target).collect();
                let col = |f: fn(&RepRecord) -> f64| Aggregate::of(&cell.iter().map(|r| f(r)).collect::<Vec<_>>());
                summaries.push(CellSummary {
                    model: *model,
                    n,
                    gap_upper: cfg.gaps.upper(),
                    target,
                    r_or: col(|r| r.r_or),
                    r_ad: col(|r| r.r_ad),
                    r_eq: col(|r| r.r_eq),
                    reps: cfg.reps,
                    seed: cfg.seed,
                });
            }
            records.extend(per_rep.into_iter().flatten());
        }
    }
    Ok(RiskReport {
        config: cfg.clone(),
        records,
        summaries,
        runtime: start.elapsed(),
    })
}
