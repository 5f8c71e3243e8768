//! Cutoff selection by leave-p-out cross-validation over blocks of consecutive
//! observations.
//!
//! For a subset `P` of the data, `Psi'^(P)` is the raw ratio `p^(P) / q^(P)` and
//! `Psi'^(-P)` the thresholded estimator on the complement. The jump criterion is
//!
//! ```text
//! l(m) = int_{-m}^{m} |Psi'^|^2 - 2 avg_P Re int_{-m}^{m} Psi'^(P) conj(Psi'^(-P))
//! ```
//!
//! and the density criterion replaces each `Psi'^` by the clamped `exp(int_0^u Psi'^)`.

use std::io::Write;
use std::ops::Range;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sampling::ObservationSet;
use crate::spectral::{clamp_phi_at, regularized_inverse_at, GroupedSums};
use crate::weights::WeightScheme;

/// Denominators below this modulus make the unregularised ratio zero.
pub const RAW_RATIO_GUARD: f64 = 1e-12;

/// Candidate cutoffs `m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutoffMenu {
    values: Vec<u32>,
}

impl CutoffMenu {
    /// `{m in N : 1 <= m <= sqrt(T)}`.
    pub fn for_horizon(horizon: f64) -> Result<Self> {
        let top = horizon.sqrt().floor();
        if !(top >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "horizon {horizon} leaves no cutoff m with 1 <= m <= sqrt(T)"
            )));
        }
        Ok(Self {
            values: (1..=top as u32).collect(),
        })
    }

    /// Explicit candidates; sorted and deduplicated.
    pub fn from_values(mut values: Vec<u32>) -> Result<Self> {
        values.sort_unstable();
        values.dedup();
        if values.is_empty() || values[0] == 0 {
            return Err(Error::InvalidParameter("menu needs positive cutoffs".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn max(&self) -> u32 {
        *self.values.last().expect("nonempty")
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index of the smallest minimiser of `losses` (one per menu entry).
    pub fn argmin(&self, losses: &[f64]) -> u32 {
        assert_eq!(losses.len(), self.values.len());
        let mut best = 0;
        for (i, &l) in losses.iter().enumerate() {
            if l < losses[best] {
                best = i;
            }
        }
        self.values[best]
    }
}

/// One hundred blocks of consecutive observations and windows of ten blocks.
///
/// Blocks have `floor(n / 100)` observations, the last one also takes the remainder.
/// Window `j` is `B_j u ... u B_{j+9}`, so a subset holds about `n / 10` observations and
/// there are 91 subsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPlan {
    blocks: Vec<Range<usize>>,
}

impl BlockPlan {
    pub const BLOCKS: usize = 100;
    pub const WINDOW: usize = 10;
    /// Smallest supported sample size.
    pub const MIN_N: usize = 1000;

    pub fn new(n: usize) -> Result<Self> {
        if n < Self::MIN_N {
            return Err(Error::PlanTooSmall {
                needed: Self::MIN_N,
                got: n,
            });
        }
        let size = n / Self::BLOCKS;
        let blocks = (0..Self::BLOCKS)
            .map(|b| {
                let end = if b + 1 == Self::BLOCKS { n } else { (b + 1) * size };
                b * size..end
            })
            .collect();
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[Range<usize>] {
        &self.blocks
    }

    pub fn n(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.end)
    }

    pub fn subset_count(&self) -> usize {
        self.blocks.len() - Self::WINDOW + 1
    }

    /// Block indices of subset `j`.
    pub fn subset_blocks(&self, j: usize) -> Range<usize> {
        j..j + Self::WINDOW
    }

    /// Observation indices of subset `j`.
    pub fn subset(&self, j: usize) -> Range<usize> {
        self.blocks[j].start..self.blocks[j + Self::WINDOW - 1].end
    }
}

/// Selected cutoff and the criterion over the menu.
#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub selected: u32,
    pub losses: Vec<(u32, f64)>,
}

impl CvResult {
    fn new(menu: &CutoffMenu, losses: Vec<f64>) -> Self {
        Self {
            selected: menu.argmin(&losses),
            losses: menu.values().iter().copied().zip(losses).collect(),
        }
    }

    /// Writes `m,loss` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "m,loss")?;
        for (m, l) in &self.losses {
            writeln!(out, "{m},{l}")?;
        }
        Ok(())
    }
}

/// Cross-validated cutoff for the jump estimator.
pub fn cv_cutoff_jump(
    obs: &ObservationSet,
    weights: &WeightScheme,
    kappa: f64,
    menu: &CutoffMenu,
    plan: &BlockPlan,
) -> Result<CvResult> {
    let sums = block_sums(obs, weights, plan)?;
    cv_jump_from_sums(&sums, kappa, menu, plan)
}

/// Cross-validated cutoff for the density estimator.
pub fn cv_cutoff_density(
    obs: &ObservationSet,
    weights: &WeightScheme,
    kappa: f64,
    menu: &CutoffMenu,
    plan: &BlockPlan,
) -> Result<CvResult> {
    let sums = block_sums(obs, weights, plan)?;
    cv_density_from_sums(&sums, kappa, menu, plan)
}

fn block_sums(obs: &ObservationSet, weights: &WeightScheme, plan: &BlockPlan) -> Result<GroupedSums> {
    if plan.n() != obs.len() {
        return Err(Error::LengthMismatch {
            what: "block plan",
            expected: obs.len(),
            got: plan.n(),
        });
    }
    GroupedSums::compute(obs, weights, plan.blocks())
}

/// Jump criterion from per-block sums (for example those kept by
/// [`crate::weights::iterative_weights_grouped`]).
pub fn cv_jump_from_sums(
    sums: &GroupedSums,
    kappa: f64,
    menu: &CutoffMenu,
    plan: &BlockPlan,
) -> Result<CvResult> {
    let mut full = Vec::new();
    let mut cross = Vec::new();
    sweep_subsets(sums, kappa, menu, plan, |_, psi, subsets| {
        full.push(psi.norm_sqr());
        let avg = subsets.iter().map(|(a, b)| (a * b.conj()).re).sum::<f64>() / subsets.len() as f64;
        cross.push(avg);
    })?;
    Ok(CvResult::new(menu, criterion(sums, menu, &full, &cross)))
}

/// Density criterion from per-block sums.
pub fn cv_density_from_sums(
    sums: &GroupedSums,
    kappa: f64,
    menu: &CutoffMenu,
    plan: &BlockPlan,
) -> Result<CvResult> {
    let du = sums.grid().du();
    let windows = plan.subset_count();
    let mut full = Vec::new();
    let mut cross = Vec::new();
    let mut last_full = Complex64::default();
    let mut int_full = Complex64::default();
    let mut last = vec![(Complex64::default(), Complex64::default()); windows];
    let mut ints = vec![(Complex64::default(), Complex64::default()); windows];
    sweep_subsets(sums, kappa, menu, plan, |k, psi, subsets| {
        if k > 0 {
            int_full += 0.5 * du * (last_full + psi);
            for ((i, l), s) in ints.iter_mut().zip(&last).zip(subsets) {
                i.0 += 0.5 * du * (l.0 + s.0);
                i.1 += 0.5 * du * (l.1 + s.1);
            }
        }
        last_full = psi;
        last.copy_from_slice(subsets);
        full.push(clamp_phi_at(int_full).1.norm_sqr());
        let avg = ints
            .iter()
            .map(|(a, b)| (clamp_phi_at(*a).1 * clamp_phi_at(*b).1.conj()).re)
            .sum::<f64>()
            / windows as f64;
        cross.push(avg);
    })?;
    Ok(CvResult::new(menu, criterion(sums, menu, &full, &cross)))
}

/// `l(m) = 2 int_0^m full - 4 int_0^m cross` over the menu (both integrands even).
fn criterion(sums: &GroupedSums, menu: &CutoffMenu, full: &[f64], cross: &[f64]) -> Vec<f64> {
    let grid = sums.grid();
    let mut f = full.to_vec();
    let mut c = cross.to_vec();
    f.resize(grid.half_len(), 0.0);
    c.resize(grid.half_len(), 0.0);
    let uppers: Vec<f64> = menu
        .values()
        .iter()
        .map(|&m| grid.node(grid.index_at_or_below(m as f64)))
        .collect();
    let a = grid.cumulative_integrals(&f, &uppers);
    let b = grid.cumulative_integrals(&c, &uppers);
    a.iter().zip(&b).map(|(a, b)| 2.0 * a - 4.0 * b).collect()
}

#[inline]
fn finite_or_zero(v: Complex64) -> Complex64 {
    if v.re.is_finite() && v.im.is_finite() {
        v
    } else {
        Complex64::default()
    }
}

/// Visits every half-grid node up to the largest menu cutoff with the full-data estimate
/// and the `(Psi'^(P), Psi'^(-P))` pairs of all subsets.
fn sweep_subsets(
    sums: &GroupedSums,
    kappa: f64,
    menu: &CutoffMenu,
    plan: &BlockPlan,
    mut visit: impl FnMut(usize, Complex64, &[(Complex64, Complex64)]),
) -> Result<()> {
    let grid = sums.grid();
    if sums.groups() != plan.blocks() {
        return Err(Error::InvalidParameter("sums were not computed on the plan's blocks".into()));
    }
    if !(kappa.is_finite() && kappa >= 0.0) {
        return Err(Error::InvalidParameter(format!("kappa must be >= 0, got {kappa}")));
    }
    let top = menu.max() as f64;
    if top > grid.u_max() * (1.0 + 1e-9) {
        return Err(Error::GridTooNarrow {
            cutoff: top,
            u_max: grid.u_max(),
        });
    }
    let last = grid.index_at_or_below(top);
    let nb = plan.blocks().len();
    let windows = plan.subset_count();
    let mut pre = vec![(Complex64::default(), Complex64::default(), 0.0); nb + 1];
    let mut pairs = vec![(Complex64::default(), Complex64::default()); windows];
    for k in 0..=last {
        for b in 0..nb {
            let (p, q, s2) = sums.group_sums(k, b);
            let prev = pre[b];
            pre[b + 1] = (prev.0 + p, prev.1 + q, prev.2 + s2);
        }
        let (pt, qt, st) = pre[nb];
        let psi = pt * regularized_inverse_at(qt, st.sqrt(), kappa);
        for (j, pair) in pairs.iter_mut().enumerate() {
            let r = plan.subset_blocks(j);
            let (a, b) = (pre[r.start], pre[r.end]);
            let (pw, qw, sw) = (b.0 - a.0, b.1 - a.1, b.2 - a.2);
            let raw = if qw.norm() < RAW_RATIO_GUARD {
                Complex64::default()
            } else {
                finite_or_zero(pw / qw)
            };
            let (pc, qc, sc) = (pt - pw, qt - qw, (st - sw).max(0.0));
            let reg = pc * regularized_inverse_at(qc, sc.sqrt(), kappa);
            *pair = (raw, reg);
        }
        visit(k, psi, &pairs);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn menu_for_horizon() {
        let m = CutoffMenu::for_horizon(30.0).unwrap();
        assert_eq!(m.values(), &[1, 2, 3, 4, 5]);
        assert!(CutoffMenu::for_horizon(0.5).is_err());
        assert_eq!(CutoffMenu::for_horizon(1.0).unwrap().values(), &[1]);
    }

    #[test]
    fn argmin_prefers_smallest() {
        let m = CutoffMenu::from_values(vec![3, 1, 2]).unwrap();
        assert_eq!(m.argmin(&[0.5, 0.2, 0.2]), 2);
        assert_eq!(m.argmin(&[0.0, 0.0, 0.0]), 1);
    }

    #[test]
    fn plan_layout() {
        let plan = BlockPlan::new(1234).unwrap();
        assert_eq!(plan.blocks().len(), 100);
        assert_eq!(plan.blocks()[0], 0..12);
        assert_eq!(plan.blocks()[99], 1188..1234);
        assert_eq!(plan.subset_count(), 91);
        assert_eq!(plan.subset(0), 0..120);
        assert_eq!(plan.subset(90), 1080..1234);
        assert!(matches!(BlockPlan::new(999), Err(Error::PlanTooSmall { .. })));
    }
}
