//! `levy-bench` command line: `simulate`, `estimate-jump`, `estimate-density`, `table`
//! and `rates`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use irregular_levy::estimators::{estimate_f, estimate_g, l2_risk_density, l2_risk_jump, Kernel};
use irregular_levy::rates::{tabulate, write_rates_csv, SmoothnessClass};
use irregular_levy::sampling::draw_uniform_gaps;
use irregular_levy::selection::{cv_density_from_sums, cv_jump_from_sums, BlockPlan, CutoffMenu, CvResult};
use irregular_levy::spectral::GroupedSums;
use irregular_levy::weights::{iterative_weights_grouped, IterativeConfig};
use irregular_levy::{ObservationSet, SamplingScheme, SpectralStatistics, WeightKind, WeightScheme};

use crate::config::{ExperimentConfig, GapLaw, Settings, Target};
use crate::error::{BenchError, Result};
use crate::experiment::{grid_for, run_table_experiment, simulate_replication};
use crate::report::{emit_report, write_file};

#[derive(Debug, Parser)]
#[command(name = "levy-bench", version, about = "Spectral Lévy estimation from irregular observations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one path and write `observations.csv`.
    Simulate(Common),
    /// Estimate the jump function `g(x) = x eta(x)`.
    EstimateJump(EstimateArgs),
    /// Estimate the density of `X_1`.
    EstimateDensity(EstimateArgs),
    /// Monte Carlo risk table: `summary.csv`, `per_rep.csv`, `config.echo`.
    Table(Common),
    /// Bandwidths of a smoothness class along a ladder of sample sizes.
    Rates(RatesArgs),
}

/// Settings shared by all verbs; each flag overrides the same key of `--config`.
#[derive(Debug, Args, Default)]
pub struct Common {
    /// Flat `key=value` file applied before the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model designation(s), e.g. `gamma(3,2)` or `gamma(3,2),cpois_normal(3)`.
    #[arg(long)]
    pub model: Option<String>,
    /// Sample size(s), comma separated.
    #[arg(long)]
    pub n: Option<String>,
    /// Gaps are uniform on `(0, gap_upper]`.
    #[arg(long)]
    pub gap_upper: Option<String>,
    /// File with fixed gaps (one per line, or a CSV with a `delta` column).
    #[arg(long)]
    pub gap_file: Option<String>,
    #[arg(long)]
    pub reps: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub kappa: Option<String>,
    #[arg(long)]
    pub grid_umax: Option<String>,
    #[arg(long)]
    pub grid_du: Option<String>,
    #[arg(long)]
    pub max_iters: Option<String>,
    #[arg(long)]
    pub out_dir: Option<String>,
    /// `oracle`, `equal`, `binned:K` or `iterative`.
    #[arg(long)]
    pub weights: Option<String>,
    /// `jump`, `density` or both, comma separated.
    #[arg(long)]
    pub target: Option<String>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Observations CSV (`index,t,delta,z`); simulated from the settings when absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Fixed cutoff `m = 1/h`; cross-validated over `1..=sqrt(T)` when absent.
    #[arg(long)]
    pub cutoff: Option<u32>,
    #[arg(long, default_value = "sinc")]
    pub kernel: String,
    #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
    pub x_min: f64,
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    pub x_max: f64,
    #[arg(long, default_value_t = 0.05)]
    pub x_step: f64,
}

#[derive(Debug, Args)]
pub struct RatesArgs {
    #[command(flatten)]
    pub common: Common,
    /// `gpol(beta)`, `gexp(alpha,c_phi)`, `gcp(a,rho,c_g,C_phi)`, `glocal(a,beta)`,
    /// `fpol(beta,k)` or `fexp(alpha,c,k)`.
    #[arg(long)]
    pub class: String,
}

impl Common {
    /// Config file settings overridden by the flags.
    pub fn settings(&self) -> Result<Settings> {
        let mut s = match &self.config {
            Some(p) => Settings::from_file(p)?,
            None => Settings::default(),
        };
        let flags = [
            ("model", &self.model),
            ("n", &self.n),
            ("gap_upper", &self.gap_upper),
            ("gap_file", &self.gap_file),
            ("reps", &self.reps),
            ("seed", &self.seed),
            ("kappa", &self.kappa),
            ("grid_umax", &self.grid_umax),
            ("grid_du", &self.grid_du),
            ("max_iters", &self.max_iters),
            ("out_dir", &self.out_dir),
            ("weights", &self.weights),
            ("target", &self.target),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                s.set(key, v)?;
            }
        }
        Ok(s)
    }

    pub fn experiment(&self) -> Result<ExperimentConfig> {
        ExperimentConfig::from_settings(&self.settings()?)
    }
}

/// Parses arguments, runs the verb and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("levy-bench: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(common) => simulate(&common),
        Command::EstimateJump(args) => estimate(&args, Target::Jump),
        Command::EstimateDensity(args) => estimate(&args, Target::Density),
        Command::Table(common) => {
            let cfg = common.experiment()?;
            let report = run_table_experiment(&cfg)?;
            emit_report(&report, &cfg.out_dir)?;
            eprintln!(
                "wrote {} cells ({} replications each) to {} in {:.1?}",
                report.summaries.len(),
                cfg.reps,
                cfg.out_dir.display(),
                report.runtime
            );
            Ok(())
        }
        Command::Rates(args) => rates(&args),
    }
}

fn echo(cfg: &ExperimentConfig, extra: &[(&str, String)]) -> String {
    let mut s = cfg.echo();
    for (k, v) in extra {
        s.push_str(&format!("{k}={v}\n"));
    }
    s
}

fn simulate(common: &Common) -> Result<()> {
    let cfg = common.experiment()?;
    let obs = simulate_replication(&cfg, &cfg.models[0], cfg.ns[0], 0)?;
    write_file(&cfg.out_dir, "observations.csv", |w| obs.write_csv(w))?;
    write_file(&cfg.out_dir, "config.echo", |w| w.write_all(cfg.echo().as_bytes()))?;
    Ok(())
}

/// Reads `index,t,delta,z` rows written by `simulate`.
pub fn read_observations(path: &Path) -> Result<ObservationSet> {
    let text = fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| BenchError::config(format!("{}: empty file", path.display())))?
        .split(',')
        .map(str::trim)
        .collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| BenchError::config(format!("{}: missing column {name}", path.display())))
    };
    let (cd, cz) = (col("delta")?, col("z")?);
    let mut gaps = Vec::new();
    let mut z = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        let get = |c: usize| {
            fields
                .get(c)
                .and_then(|f| f.trim().parse::<f64>().ok())
                .ok_or_else(|| BenchError::config(format!("{}: bad data row {}", path.display(), i + 1)))
        };
        gaps.push(get(cd)?);
        z.push(get(cz)?);
    }
    let max = gaps.iter().cloned().fold(0.0, f64::max);
    let bad = |e: irregular_levy::Error| BenchError::config(format!("{}: {e}", path.display()));
    ObservationSet::new(SamplingScheme::from_gaps(gaps, max).map_err(bad)?, z).map_err(bad)
}

fn estimate(args: &EstimateArgs, target: Target) -> Result<()> {
    let cfg = args.common.experiment()?;
    let kernel: Kernel = args.kernel.parse().map_err(|e| BenchError::config(format!("{e}")))?;
    if !(args.x_step > 0.0 && args.x_max >= args.x_min) {
        return Err(BenchError::config("need x_step > 0 and x_max >= x_min"));
    }
    let model = cfg.models[0];
    let (obs, simulated) = match &args.input {
        Some(p) => (read_observations(p)?, false),
        None => (simulate_replication(&cfg, &model, cfg.ns[0], 0)?, true),
    };
    let num = |what: &str| {
        let what = what.to_string();
        move |e| BenchError::numeric(what, e)
    };
    let grid = grid_for(&cfg, obs.horizon()).map_err(num("grid"))?;
    let (weights, sums_for_cv) = match cfg.weights {
        WeightKind::Iterative if args.cutoff.is_none() => {
            let plan = BlockPlan::new(obs.len()).map_err(num("block plan"))?;
            let iter_cfg = IterativeConfig {
                kappa: cfg.kappa,
                max_iters: cfg.max_iters,
            };
            let (out, sums) =
                iterative_weights_grouped(&obs, grid, iter_cfg, plan.blocks()).map_err(num("iterative weights"))?;
            if !out.converged {
                eprintln!("warning: iterative weights stopped after {} builds without converging", out.builds);
            }
            (out.weights, Some((sums, plan)))
        }
        WeightKind::Iterative => {
            let iter_cfg = IterativeConfig {
                kappa: cfg.kappa,
                max_iters: cfg.max_iters,
            };
            let out = irregular_levy::weights::iterative_weights(&obs, grid, iter_cfg).map_err(num("iterative weights"))?;
            (out.weights, None)
        }
        WeightKind::Oracle => (WeightScheme::oracle(&model, obs.scheme(), grid), None),
        WeightKind::Equal => (WeightScheme::equal(obs.len(), grid), None),
        WeightKind::Binned(k) => (WeightScheme::binned(&obs, k, grid).map_err(num("binned weights"))?, None),
        WeightKind::Explicit => return Err(BenchError::config("explicit weights cannot be configured")),
    };
    let stats = SpectralStatistics::compute(&obs, &weights, cfg.kappa).map_err(num("statistics"))?;
    let (cutoff, cv): (u32, Option<CvResult>) = match args.cutoff {
        Some(0) => return Err(BenchError::config("cutoff must be positive")),
        Some(m) => (m, None),
        None => {
            let menu = CutoffMenu::for_horizon(obs.horizon()).map_err(num("cutoff menu"))?;
            let (sums, plan) = match sums_for_cv {
                Some(sp) => sp,
                None => {
                    let plan = BlockPlan::new(obs.len()).map_err(num("block plan"))?;
                    (GroupedSums::compute(&obs, &weights, plan.blocks()).map_err(num("block sums"))?, plan)
                }
            };
            let cv = match target {
                Target::Jump => cv_jump_from_sums(&sums, cfg.kappa, &menu, &plan),
                Target::Density => cv_density_from_sums(&sums, cfg.kappa, &menu, &plan),
            }
            .map_err(num("cross-validation"))?;
            (cv.selected, Some(cv))
        }
    };
    let h = 1.0 / cutoff as f64;
    let steps = ((args.x_max - args.x_min) / args.x_step).round() as usize;
    let xs: Vec<f64> = (0..=steps).map(|i| args.x_min + i as f64 * args.x_step).collect();
    let risk = match target {
        Target::Jump => {
            let est = estimate_g(&stats, kernel, h).map_err(num("jump estimate"))?;
            write_file(&cfg.out_dir, "estimate.csv", |w| est.write_csv(&xs, w))?;
            simulated.then(|| l2_risk_jump(&est, &model)).transpose()
        }
        Target::Density => {
            let est = estimate_f(&stats.char_fn_estimate(), kernel, h).map_err(num("density estimate"))?;
            write_file(&cfg.out_dir, "estimate.csv", |w| est.write_csv(&xs, w))?;
            simulated.then(|| l2_risk_density(&est, &model, 1.0)).transpose()
        }
    }
    .map_err(num("risk"))?;
    if let Some(cv) = &cv {
        write_file(&cfg.out_dir, "cv.csv", |w| cv.write_csv(w))?;
    }
    let mut extra = vec![
        ("verb", format!("estimate-{target}")),
        ("kernel", kernel.to_string()),
        ("cutoff", cutoff.to_string()),
    ];
    if let Some(p) = &args.input {
        extra.push(("input", p.display().to_string()));
    }
    write_file(&cfg.out_dir, "config.echo", |w| w.write_all(echo(&cfg, &extra).as_bytes()))?;
    match risk {
        Some(r) => println!("cutoff={cutoff} risk={r}"),
        None => println!("cutoff={cutoff}"),
    }
    Ok(())
}

fn rates(args: &RatesArgs) -> Result<()> {
    let cfg = args.common.experiment()?;
    let class: SmoothnessClass = args.class.parse().map_err(|e| BenchError::config(format!("{e}")))?;
    let schemes: Vec<SamplingScheme> = match &cfg.gaps {
        GapLaw::Fixed { scheme, .. } => vec![scheme.clone()],
        GapLaw::Uniform(upper) => cfg
            .ns
            .iter()
            .map(|&n| draw_uniform_gaps(n, *upper, cfg.seed))
            .collect::<irregular_levy::Result<_>>()
            .map_err(|e| BenchError::numeric("drawing gaps", e))?,
    };
    let rows = tabulate(&schemes, class).map_err(|e| BenchError::numeric(format!("solving {class}"), e))?;
    write_file(&cfg.out_dir, "rates.csv", |w| write_rates_csv(&rows, w))?;
    let extra = [("verb", "rates".to_string()), ("class", class.to_string())];
    write_file(&cfg.out_dir, "config.echo", |w| w.write_all(echo(&cfg, &extra).as_bytes()))?;
    Ok(())
}
