//! Per-observation weight functions `w_j(u)`.
//!
//! Weights are stored on the non-negative half grid; the negative half follows from
//! `w_j(-u) = conj(w_j(u))`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{mirror, SpectralGrid, Symmetry};
use crate::models::LevyModel;
use crate::sampling::{ObservationSet, SamplingScheme};
use std::ops::Range;

use crate::spectral::{
    accumulate, check_groups, integrate_half, DistanceTracker, GroupedSums, SpectralStatistics,
};

/// Default iteration cap for [`iterative_weights`].
pub const DEFAULT_MAX_ITERS: usize = 50;

/// Which construction produced a [`WeightScheme`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightKind {
    Oracle,
    Equal,
    Binned(usize),
    Iterative,
    Explicit,
}

impl fmt::Display for WeightKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightKind::Oracle => write!(f, "oracle"),
            WeightKind::Equal => write!(f, "equal"),
            WeightKind::Binned(k) => write!(f, "binned({k})"),
            WeightKind::Iterative => write!(f, "iterative"),
            WeightKind::Explicit => write!(f, "explicit"),
        }
    }
}

impl FromStr for WeightKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        let bad = || Error::Parse {
            kind: "weight scheme",
            input: s.to_string(),
        };
        match t.as_str() {
            "oracle" => Ok(WeightKind::Oracle),
            "equal" => Ok(WeightKind::Equal),
            "iterative" => Ok(WeightKind::Iterative),
            _ => {
                let inner = t
                    .strip_prefix("binned(")
                    .and_then(|r| r.strip_suffix(')'))
                    .or_else(|| t.strip_prefix("binned:"))
                    .ok_or_else(bad)?;
                let k: usize = inner.trim().parse().map_err(|_| bad())?;
                if k == 0 {
                    return Err(bad());
                }
                Ok(WeightKind::Binned(k))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum WeightValues {
    Zero,
    Unit,
    /// `w_j(u) = conj(exp(Delta_j * psi(u)))` with `Re psi` clamped at 0.
    ConjExp(Vec<Complex64>),
    Binned {
        bin_of: Vec<usize>,
        per_bin: Vec<Vec<Complex64>>,
    },
    Explicit(Vec<Vec<Complex64>>),
}

/// Weights `w_j(u_k)` for every observation `j` and every non-negative grid node `k`.
#[derive(Debug, Clone)]
pub struct WeightScheme {
    kind: WeightKind,
    grid: SpectralGrid,
    deltas: Vec<f64>,
    values: WeightValues,
    empty_bins: Vec<usize>,
}

impl WeightScheme {
    /// `w_j(u) = conj(phi_{Delta_j}(u))`.
    pub fn oracle(model: &LevyModel, scheme: &SamplingScheme, grid: SpectralGrid) -> Self {
        let exponent = grid
            .half_nodes()
            .iter()
            .map(|&u| model.char_exponent(u))
            .collect();
        Self {
            kind: WeightKind::Oracle,
            grid,
            deltas: scheme.deltas().to_vec(),
            values: WeightValues::ConjExp(exponent),
            empty_bins: Vec::new(),
        }
    }

    /// `w_j = 1`.
    pub fn equal(n: usize, grid: SpectralGrid) -> Self {
        Self {
            kind: WeightKind::Equal,
            grid,
            deltas: vec![0.0; n],
            values: WeightValues::Unit,
            empty_bins: Vec::new(),
        }
    }

    /// Empirical conjugate characteristic function per gap bin.
    ///
    /// `[0, Delta_max]` is split into `bins` equal intervals; every observation receives the
    /// average of `e^{-iuZ_l}` over the observations sharing its bin. Bins without
    /// observations are listed in [`WeightScheme::empty_bins`] and carry weight 1.
    pub fn binned(obs: &ObservationSet, bins: usize, grid: SpectralGrid) -> Result<Self> {
        if bins == 0 {
            return Err(Error::InvalidParameter("bin count must be >= 1".into()));
        }
        let delta_max = obs.scheme().delta_max();
        let bin_of: Vec<usize> = obs
            .deltas()
            .iter()
            .map(|&d| (((d / delta_max) * bins as f64).floor() as usize).min(bins - 1))
            .collect();
        let mut counts = vec![0usize; bins];
        for &b in &bin_of {
            counts[b] += 1;
        }
        let nodes = grid.half_len();
        let mut per_bin = vec![vec![Complex64::default(); nodes]; bins];
        let z = obs.increments();
        let mut sums = vec![Complex64::default(); bins];
        for k in 0..nodes {
            let u = grid.node(k);
            sums.iter_mut().for_each(|s| *s = Complex64::default());
            for (&zj, &b) in z.iter().zip(&bin_of) {
                sums[b] += Complex64::cis(-u * zj);
            }
            for b in 0..bins {
                per_bin[b][k] = if counts[b] == 0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    clamp_unit(sums[b] / counts[b] as f64)
                };
            }
        }
        for row in per_bin.iter_mut() {
            row[0] = Complex64::new(1.0, 0.0);
        }
        let empty_bins = (0..bins).filter(|&b| counts[b] == 0).collect();
        Ok(Self {
            kind: WeightKind::Binned(bins),
            grid,
            deltas: obs.deltas().to_vec(),
            values: WeightValues::Binned { bin_of, per_bin },
            empty_bins,
        })
    }

    /// Arbitrary weights given row-wise on the non-negative half grid.
    pub fn explicit(grid: SpectralGrid, values_half: Vec<Vec<Complex64>>) -> Result<Self> {
        for row in &values_half {
            if row.len() != grid.half_len() {
                return Err(Error::LengthMismatch {
                    what: "weight row",
                    expected: grid.half_len(),
                    got: row.len(),
                });
            }
        }
        Ok(Self {
            kind: WeightKind::Explicit,
            grid,
            deltas: vec![0.0; values_half.len()],
            values: WeightValues::Explicit(values_half),
            empty_bins: Vec::new(),
        })
    }

    /// Weights `conj(exp(Delta_j psi(u)))` from an exponent estimate on the half grid,
    /// with modulus clamped at 1.
    pub fn from_exponent(
        scheme: &SamplingScheme,
        grid: SpectralGrid,
        psi_half: Vec<Complex64>,
    ) -> Result<Self> {
        if psi_half.len() != grid.half_len() {
            return Err(Error::LengthMismatch {
                what: "exponent",
                expected: grid.half_len(),
                got: psi_half.len(),
            });
        }
        Ok(Self {
            kind: WeightKind::Iterative,
            grid,
            deltas: scheme.deltas().to_vec(),
            values: WeightValues::ConjExp(psi_half),
            empty_bins: Vec::new(),
        })
    }

    /// All-zero weights; every node is thresholded out.
    pub fn zero(n: usize, grid: SpectralGrid) -> Self {
        Self {
            kind: WeightKind::Explicit,
            grid,
            deltas: vec![0.0; n],
            values: WeightValues::Zero,
            empty_bins: Vec::new(),
        }
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    /// Bins that contained no observation (binned weights only).
    pub fn empty_bins(&self) -> &[usize] {
        &self.empty_bins
    }

    pub(crate) fn values(&self) -> &WeightValues {
        &self.values
    }

    /// `w_j(u_k)` at the `k`-th non-negative node.
    pub fn weight(&self, j: usize, k: usize) -> Complex64 {
        match &self.values {
            WeightValues::Zero => Complex64::default(),
            WeightValues::Unit => Complex64::new(1.0, 0.0),
            WeightValues::ConjExp(psi) => {
                let p = psi[k];
                let d = self.deltas[j];
                Complex64::from_polar((d * p.re.min(0.0)).exp(), -d * p.im)
            }
            WeightValues::Binned { bin_of, per_bin } => per_bin[bin_of[j]][k],
            WeightValues::Explicit(v) => v[j][k],
        }
    }

    /// `w_j` on the non-negative half grid.
    pub fn row_half(&self, j: usize) -> Vec<Complex64> {
        (0..self.grid.half_len()).map(|k| self.weight(j, k)).collect()
    }

    /// `w_j` on the full grid.
    pub fn row(&self, j: usize) -> Vec<Complex64> {
        mirror(&self.row_half(j), Symmetry::Hermitian)
    }

    /// Multiplies every weight by a common scalar.
    pub fn scaled(&self, c: f64) -> Self {
        let values = (0..self.len())
            .map(|j| self.row_half(j).into_iter().map(|w| w * c).collect())
            .collect();
        Self {
            kind: WeightKind::Explicit,
            grid: self.grid,
            deltas: self.deltas.clone(),
            values: WeightValues::Explicit(values),
            empty_bins: Vec::new(),
        }
    }
}

fn clamp_unit(w: Complex64) -> Complex64 {
    let m = w.norm();
    if m > 1.0 {
        w / m
    } else {
        w
    }
}

/// Tuning of the iterative weight scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterativeConfig {
    pub kappa: f64,
    pub max_iters: usize,
}

impl Default for IterativeConfig {
    fn default() -> Self {
        Self {
            kappa: crate::spectral::DEFAULT_KAPPA,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

/// Result of [`iterative_weights`].
#[derive(Debug, Clone)]
pub struct IterativeOutcome {
    /// Final weights.
    pub weights: WeightScheme,
    /// Statistics computed with the final weights.
    pub statistics: SpectralStatistics,
    /// Statistics of the starting point `w_j = 1`.
    pub initial_statistics: SpectralStatistics,
    /// Number of weighted sweeps (statistics builds) performed.
    pub builds: usize,
    pub converged: bool,
    /// `max_j ||w_{j,m} - w_{j,m-1}||^2` per update.
    pub max_distances: Vec<f64>,
}

impl IterativeOutcome {
    /// Converts a non-converged outcome into [`Error::NonConvergence`].
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence(self.builds - 1))
        }
    }
}

/// Data-driven weights by fixed-point iteration.
///
/// Starts from `w_j = 1`, then repeatedly sets `w_j = conj(exp(Delta_j Psi^))` with
/// `Psi^` built from the current weights, until
/// `max_j ||w_{j,m} - w_{j,m-1}||^2_{L^2[-sqrt T, sqrt T]} <= 1/T` or `max_iters`
/// updates were made. The distance of each new iterate is accumulated during the
/// sweep that uses it, so convergence after the first update costs two sweeps.
pub fn iterative_weights(
    obs: &ObservationSet,
    grid: SpectralGrid,
    config: IterativeConfig,
) -> Result<IterativeOutcome> {
    iterative_weights_grouped(obs, grid, config, &[0..obs.len()]).map(|(outcome, _)| outcome)
}

/// [`iterative_weights`] that also keeps the per-group sums of the final sweep.
///
/// Statistics are summed group by group, so results can differ from the ungrouped run in
/// the last bits.
pub fn iterative_weights_grouped(
    obs: &ObservationSet,
    grid: SpectralGrid,
    config: IterativeConfig,
    groups: &[Range<usize>],
) -> Result<(IterativeOutcome, GroupedSums)> {
    if config.max_iters == 0 {
        return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
    }
    check_groups(groups, obs.len())?;
    let n = obs.len();
    let horizon = obs.horizon();
    let radius = horizon.sqrt();
    if grid.u_max() < radius * (1.0 - 1e-12) {
        return Err(Error::GridTooNarrow {
            cutoff: radius,
            u_max: grid.u_max(),
        });
    }
    let tol = 1.0 / horizon;
    // both halves of [-sqrt T, sqrt T]; |w(-u) - w'(-u)| = |w(u) - w'(u)|
    let node_weights: Vec<f64> = grid
        .half_weights(radius)
        .into_iter()
        .map(|w| 2.0 * w)
        .collect();

    let mut weights = WeightScheme::equal(n, grid);
    let mut sums = GroupedSums::from_raw(grid, groups, accumulate(obs, &weights, groups, None)?);
    let initial = sums.total_statistics(config.kappa)?;
    let mut stats = initial.clone();
    let mut builds = 1;
    let mut max_distances = Vec::new();
    let mut converged = false;

    for _ in 0..config.max_iters {
        let psi = integrate_half(stats.psi_prime_half(), grid.du());
        let next = WeightScheme::from_exponent(obs.scheme(), grid, psi)?;
        let mut distances = vec![0.0; n];
        let raw = accumulate(
            obs,
            &next,
            groups,
            Some(DistanceTracker {
                previous: &weights,
                node_weights: &node_weights,
                distances: &mut distances,
            }),
        )?;
        sums = GroupedSums::from_raw(grid, groups, raw);
        stats = sums.total_statistics(config.kappa)?;
        builds += 1;
        weights = next;
        let worst = distances.iter().cloned().fold(0.0, f64::max);
        max_distances.push(worst);
        if worst <= tol {
            converged = true;
            break;
        }
    }
    Ok((
        IterativeOutcome {
            weights,
            statistics: stats,
            initial_statistics: initial,
            builds,
            converged,
            max_distances,
        },
        sums,
    ))
}
