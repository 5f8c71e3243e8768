//! Weighted empirical spectral statistics and the characteristic-function estimator.
//!
//! For weights `w_j(u)` the statistics are
//!
//! ```text
//! p^(u)     = sum_j w_j(u) i Z_j e^{iuZ_j}
//! q^(u)     = sum_j Delta_j w_j(u) e^{iuZ_j}
//! sigma(u)  = sqrt(sum_j Delta_j^2 |w_j(u)|^2)
//! 1/q~(u)   = 1{|q^(u)| >= max(sigma(u), kappa)} / q^(u)
//! Psi'^(u)  = p^(u) / q~(u)
//! ```
//!
//! All arrays are computed on the non-negative half of the grid; negative frequencies
//! follow from `q(-u) = conj q(u)` and `p(-u) = -conj p(u)` for Hermitian weights.

use std::ops::Range;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{mirror, mirror_real, SpectralGrid, Symmetry};
use crate::sampling::ObservationSet;
use crate::kernel::{sweep_conj_exp, sweep_unit, unpad, Lanes, Sink};
use crate::weights::{WeightScheme, WeightValues};
use crate::simd::V;

/// Default constant threshold `kappa`.
pub const DEFAULT_KAPPA: f64 = 1.0;

/// Nodes between exact recomputations of the scalar rotating phasors.
const RESYNC: usize = 64;

/// Per-group raw sums on the half grid, laid out node-major (`k * groups + g`).
#[derive(Debug, Clone)]
pub(crate) struct RawSums {
    pub groups: usize,
    pub p: Vec<Complex64>,
    pub q: Vec<Complex64>,
    pub s2: Vec<f64>,
}

impl RawSums {
    fn zeros(nodes: usize, groups: usize) -> Self {
        Self {
            groups,
            p: vec![Complex64::default(); nodes * groups],
            q: vec![Complex64::default(); nodes * groups],
            s2: vec![0.0; nodes * groups],
        }
    }

    /// Sums over all groups, in group order.
    pub fn total(&self) -> (Vec<Complex64>, Vec<Complex64>, Vec<f64>) {
        if self.groups == 1 {
            return (self.p.clone(), self.q.clone(), self.s2.clone());
        }
        let nodes = self.p.len() / self.groups;
        let mut p = vec![Complex64::default(); nodes];
        let mut q = vec![Complex64::default(); nodes];
        let mut s2 = vec![0.0; nodes];
        for k in 0..nodes {
            for g in 0..self.groups {
                let i = k * self.groups + g;
                p[k] += self.p[i];
                q[k] += self.q[i];
                s2[k] += self.s2[i];
            }
        }
        (p, q, s2)
    }
}

impl Sink for RawSums {
    #[inline]
    fn put(&mut self, k: usize, g: usize, p: Complex64, q: Complex64, s2: f64) {
        let i = k * self.groups + g;
        self.p[i] = p;
        self.q[i] = q;
        self.s2[i] = s2;
    }
}

/// Accumulates `sum_j ||w_j - w'_j||^2` against trapezoid node weights while a pass runs.
pub(crate) struct DistanceTracker<'a> {
    pub previous: &'a WeightScheme,
    pub node_weights: &'a [f64],
    pub distances: &'a mut [f64],
}

/// One sweep over the non-negative nodes computing `p^`, `q^` and `sigma^2` per group.
///
/// `groups` must be contiguous, disjoint ranges of observation indices.
pub(crate) fn accumulate(
    obs: &ObservationSet,
    weights: &WeightScheme,
    groups: &[Range<usize>],
    tracker: Option<DistanceTracker<'_>>,
) -> Result<RawSums> {
    let n = obs.len();
    if weights.len() != n {
        return Err(Error::LengthMismatch {
            what: "weights",
            expected: n,
            got: weights.len(),
        });
    }
    let grid = weights.grid();
    let nodes = grid.half_len();
    let mut out = RawSums::zeros(nodes, groups.len());
    let lanes = || Lanes::new(obs.increments(), obs.deltas(), groups);
    match (weights.values(), tracker) {
        (WeightValues::Unit, None) => {
            sweep_unit(&lanes(), grid.du(), nodes, &mut out);
        }
        (WeightValues::ConjExp(exponent), None) => {
            sweep_conj_exp(&lanes(), grid.du(), exponent, None, &mut out);
        }
        (WeightValues::ConjExp(exponent), Some(tr))
            if matches!(
                tr.previous.values(),
                WeightValues::ConjExp(_) | WeightValues::Unit
            ) =>
        {
            let zeros;
            let prev: &[Complex64] = match tr.previous.values() {
                WeightValues::ConjExp(e) => e,
                _ => {
                    zeros = vec![Complex64::default(); nodes];
                    &zeros
                }
            };
            let lanes = lanes();
            let mut padded = vec![V::ZERO; lanes.blocks()];
            sweep_conj_exp(
                &lanes,
                grid.du(),
                exponent,
                Some((prev, tr.node_weights, &mut padded)),
                &mut out,
            );
            for (acc, v) in tr.distances.iter_mut().zip(unpad(&lanes, &padded)) {
                *acc += v;
            }
        }
        (_, tracker) => {
            accumulate_scalar(obs, weights, groups, &mut out);
            if let Some(tr) = tracker {
                for k in 0..nodes {
                    let nw = tr.node_weights[k];
                    if nw > 0.0 {
                        for (j, dist) in tr.distances.iter_mut().enumerate() {
                            let v = (weights.weight(j, k) - tr.previous.weight(j, k)).norm_sqr();
                            *dist += nw * v;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Reference sweep for arbitrary stored weights.
fn accumulate_scalar(
    obs: &ObservationSet,
    weights: &WeightScheme,
    groups: &[Range<usize>],
    out: &mut RawSums,
) {
    let z = obs.increments();
    let d = obs.deltas();
    let grid = weights.grid();
    let mut rot = vec![Complex64::new(1.0, 0.0); z.len()];
    let step: Vec<Complex64> = z.iter().map(|&zj| Complex64::cis(grid.du() * zj)).collect();
    for k in 0..grid.half_len() {
        let u = grid.node(k);
        if k > 0 {
            if k % RESYNC == 0 {
                for (r, &zj) in rot.iter_mut().zip(z) {
                    *r = Complex64::cis(u * zj);
                }
            } else {
                for (r, s) in rot.iter_mut().zip(&step) {
                    *r *= s;
                }
            }
        }
        for (g, range) in groups.iter().enumerate() {
            let mut pz = Complex64::default();
            let mut qs = Complex64::default();
            let mut s2 = 0.0;
            for j in range.clone() {
                let w = weights.weight(j, k);
                let t = w * rot[j];
                pz += t * z[j];
                qs += t * d[j];
                s2 += d[j] * d[j] * w.norm_sqr();
            }
            out.put(k, g, Complex64::new(-pz.im, pz.re), qs, s2);
        }
    }
}

/// Statistics split by contiguous groups of observations, from a single sweep.
#[derive(Debug, Clone)]
pub struct GroupedSums {
    grid: SpectralGrid,
    groups: Vec<Range<usize>>,
    raw: RawSums,
}

impl GroupedSums {
    /// Sums of `p^`, `q^` and `sigma^2` per group; `groups` must be disjoint, contiguous
    /// ranges of observation indices.
    pub fn compute(
        obs: &ObservationSet,
        weights: &WeightScheme,
        groups: &[Range<usize>],
    ) -> Result<Self> {
        check_groups(groups, obs.len())?;
        let raw = accumulate(obs, weights, groups, None)?;
        Ok(Self::from_raw(*weights.grid(), groups, raw))
    }

    pub(crate) fn from_raw(grid: SpectralGrid, groups: &[Range<usize>], raw: RawSums) -> Self {
        Self {
            grid,
            groups: groups.to_vec(),
            raw,
        }
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn groups(&self) -> &[Range<usize>] {
        &self.groups
    }

    /// `(p^, q^, sigma^2)` of group `g` at half-grid node `k`.
    pub fn group_sums(&self, k: usize, g: usize) -> (Complex64, Complex64, f64) {
        let i = k * self.raw.groups + g;
        (self.raw.p[i], self.raw.q[i], self.raw.s2[i])
    }

    /// Statistics of all observations together.
    pub fn total_statistics(&self, kappa: f64) -> Result<SpectralStatistics> {
        check_kappa(kappa)?;
        let (p, q, s2) = self.raw.total();
        Ok(SpectralStatistics::from_sums(self.grid, kappa, p, q, s2))
    }
}

pub(crate) fn check_groups(groups: &[Range<usize>], n: usize) -> Result<()> {
    let mut next = 0;
    for g in groups {
        if g.start != next || g.end < g.start {
            return Err(Error::InvalidParameter(
                "groups must be consecutive ranges covering all observations".into(),
            ));
        }
        next = g.end;
    }
    if next != n {
        return Err(Error::InvalidParameter(
            "groups must be consecutive ranges covering all observations".into(),
        ));
    }
    Ok(())
}

/// Pointwise `1{|q| >= max(sigma, kappa)} / q`.
pub fn regularize_inverse(q_hat: &[Complex64], sigma: &[f64], kappa: f64) -> Vec<Complex64> {
    assert_eq!(q_hat.len(), sigma.len(), "q_hat and sigma on the same grid");
    q_hat
        .iter()
        .zip(sigma)
        .map(|(&q, &s)| regularized_inverse_at(q, s, kappa))
        .collect()
}

#[inline]
pub(crate) fn regularized_inverse_at(q: Complex64, sigma: f64, kappa: f64) -> Complex64 {
    if q.norm() >= sigma.max(kappa) && q.norm() > 0.0 {
        q.inv()
    } else {
        Complex64::default()
    }
}

/// Pointwise `p^ * (1/q~)`.
pub fn psi_prime_hat(p_hat: &[Complex64], q_tilde_inv: &[Complex64]) -> Vec<Complex64> {
    assert_eq!(p_hat.len(), q_tilde_inv.len(), "arrays on the same grid");
    p_hat.iter().zip(q_tilde_inv).map(|(p, qi)| p * qi).collect()
}

/// `Psi^(u) = int_0^u Psi'^(z) dz` on the full grid by cumulative trapezoid sums running
/// outward from the zero node in both directions.
pub fn integrate_psi(psi_prime: &[Complex64], grid: &SpectralGrid) -> Vec<Complex64> {
    assert_eq!(psi_prime.len(), grid.n_points());
    let zero = grid.zero_index();
    let h = 0.5 * grid.du();
    let mut out = vec![Complex64::default(); psi_prime.len()];
    for k in zero + 1..psi_prime.len() {
        out[k] = out[k - 1] + h * (psi_prime[k - 1] + psi_prime[k]);
    }
    for k in (0..zero).rev() {
        out[k] = out[k + 1] - h * (psi_prime[k + 1] + psi_prime[k]);
    }
    out
}

/// Half-grid variant of [`integrate_psi`].
pub(crate) fn integrate_half(psi_prime: &[Complex64], du: f64) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); psi_prime.len()];
    for k in 1..psi_prime.len() {
        out[k] = out[k - 1] + 0.5 * du * (psi_prime[k - 1] + psi_prime[k]);
    }
    out
}

#[inline]
pub(crate) fn clamp_phi_at(psi: Complex64) -> (Complex64, Complex64) {
    let check = psi.exp();
    let m = check.norm();
    let hat = if m > 1.0 {
        // exp(psi)/|exp(psi)| without overflow
        Complex64::cis(psi.im)
    } else {
        check
    };
    (check, hat)
}

/// Weighted statistics on one grid, for one weight scheme and threshold.
#[derive(Debug, Clone)]
pub struct SpectralStatistics {
    grid: SpectralGrid,
    kappa: f64,
    p_hat: Vec<Complex64>,
    q_hat: Vec<Complex64>,
    sigma: Vec<f64>,
    q_tilde_inv: Vec<Complex64>,
    psi_prime_hat: Vec<Complex64>,
}

impl SpectralStatistics {
    pub fn compute(obs: &ObservationSet, weights: &WeightScheme, kappa: f64) -> Result<Self> {
        check_kappa(kappa)?;
        let sums = accumulate(obs, weights, &[0..obs.len()], None)?;
        Ok(Self::from_sums(*weights.grid(), kappa, sums.p, sums.q, sums.s2))
    }

    pub(crate) fn from_sums(
        grid: SpectralGrid,
        kappa: f64,
        p_hat: Vec<Complex64>,
        q_hat: Vec<Complex64>,
        s2: Vec<f64>,
    ) -> Self {
        let sigma: Vec<f64> = s2.iter().map(|v| v.sqrt()).collect();
        let q_tilde_inv = regularize_inverse(&q_hat, &sigma, kappa);
        let psi_prime_hat = psi_prime_hat(&p_hat, &q_tilde_inv);
        Self {
            grid,
            kappa,
            p_hat,
            q_hat,
            sigma,
            q_tilde_inv,
            psi_prime_hat,
        }
    }

    /// Statistics from exact (population) `p` and `q` arrays, e.g. for plug-in checks.
    pub fn from_parts(
        grid: SpectralGrid,
        kappa: f64,
        p_half: Vec<Complex64>,
        q_half: Vec<Complex64>,
        sigma_half: Vec<f64>,
    ) -> Result<Self> {
        check_kappa(kappa)?;
        for (what, len) in [("p", p_half.len()), ("q", q_half.len()), ("sigma", sigma_half.len())] {
            if len != grid.half_len() {
                return Err(Error::LengthMismatch {
                    what,
                    expected: grid.half_len(),
                    got: len,
                });
            }
        }
        let s2 = sigma_half.iter().map(|s| s * s).collect();
        let mut stats = Self::from_sums(grid, kappa, p_half, q_half, s2);
        stats.sigma = sigma_half;
        Ok(stats)
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn p_hat_half(&self) -> &[Complex64] {
        &self.p_hat
    }

    pub fn q_hat_half(&self) -> &[Complex64] {
        &self.q_hat
    }

    pub fn sigma_half(&self) -> &[f64] {
        &self.sigma
    }

    pub fn q_tilde_inv_half(&self) -> &[Complex64] {
        &self.q_tilde_inv
    }

    pub fn psi_prime_half(&self) -> &[Complex64] {
        &self.psi_prime_hat
    }

    pub fn p_hat(&self) -> Vec<Complex64> {
        mirror(&self.p_hat, Symmetry::AntiHermitian)
    }

    pub fn q_hat(&self) -> Vec<Complex64> {
        mirror(&self.q_hat, Symmetry::Hermitian)
    }

    pub fn sigma(&self) -> Vec<f64> {
        mirror_real(&self.sigma)
    }

    pub fn q_tilde_inv(&self) -> Vec<Complex64> {
        mirror(&self.q_tilde_inv, Symmetry::Hermitian)
    }

    pub fn psi_prime(&self) -> Vec<Complex64> {
        mirror(&self.psi_prime_hat, Symmetry::AntiHermitian)
    }

    /// `Psi^` on the non-negative half grid.
    pub fn psi_hat_half(&self) -> Vec<Complex64> {
        integrate_half(&self.psi_prime_hat, self.grid.du())
    }

    /// Clamped characteristic-function estimate built from these statistics.
    pub fn char_fn_estimate(&self) -> CharFnEstimate {
        CharFnEstimate::from_half(self.grid, self.psi_hat_half())
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa.is_finite() && kappa >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("kappa must be >= 0, got {kappa}")))
    }
}

/// `p^` on the full grid.
pub fn compute_p_hat(obs: &ObservationSet, weights: &WeightScheme) -> Result<Vec<Complex64>> {
    let sums = accumulate(obs, weights, &[0..obs.len()], None)?;
    Ok(mirror(&sums.p, Symmetry::AntiHermitian))
}

/// `q^` on the full grid.
pub fn compute_q_hat(obs: &ObservationSet, weights: &WeightScheme) -> Result<Vec<Complex64>> {
    let sums = accumulate(obs, weights, &[0..obs.len()], None)?;
    Ok(mirror(&sums.q, Symmetry::Hermitian))
}

/// `sigma(u)` on the full grid; depends on the gaps and weights only.
pub fn compute_sigma(
    scheme: &crate::sampling::SamplingScheme,
    weights: &WeightScheme,
) -> Result<Vec<f64>> {
    if weights.len() != scheme.len() {
        return Err(Error::LengthMismatch {
            what: "weights",
            expected: scheme.len(),
            got: weights.len(),
        });
    }
    let d = scheme.deltas();
    let half: Vec<f64> = (0..weights.grid().half_len())
        .map(|k| {
            d.iter()
                .enumerate()
                .map(|(j, dj)| dj * dj * weights.weight(j, k).norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    Ok(mirror_real(&half))
}

/// `Psi^`, `phi_check = exp(Psi^)` and the clamped `phi^ = phi_check / max(1, |phi_check|)`.
#[derive(Debug, Clone)]
pub struct CharFnEstimate {
    grid: SpectralGrid,
    psi_hat: Vec<Complex64>,
    phi_check: Vec<Complex64>,
    phi_hat: Vec<Complex64>,
}

impl CharFnEstimate {
    pub(crate) fn from_half(grid: SpectralGrid, psi_hat: Vec<Complex64>) -> Self {
        let (phi_check, phi_hat) = psi_hat.iter().map(|&p| clamp_phi_at(p)).unzip();
        Self {
            grid,
            psi_hat,
            phi_check,
            phi_hat,
        }
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn psi_hat_half(&self) -> &[Complex64] {
        &self.psi_hat
    }

    pub fn phi_hat_half(&self) -> &[Complex64] {
        &self.phi_hat
    }

    pub fn psi_hat(&self) -> Vec<Complex64> {
        mirror(&self.psi_hat, Symmetry::Hermitian)
    }

    pub fn phi_check(&self) -> Vec<Complex64> {
        mirror(&self.phi_check, Symmetry::Hermitian)
    }

    pub fn phi_hat(&self) -> Vec<Complex64> {
        mirror(&self.phi_hat, Symmetry::Hermitian)
    }
}

/// Builds the clamped characteristic-function estimate from a full-grid `Psi^` array.
///
/// The array must be Hermitian (as produced by [`integrate_psi`] from an anti-Hermitian
/// `Psi'^`); only its non-negative half is kept.
pub fn clamp_phi(psi_hat: &[Complex64], grid: &SpectralGrid) -> Result<CharFnEstimate> {
    if psi_hat.len() != grid.n_points() {
        return Err(Error::LengthMismatch {
            what: "psi_hat",
            expected: grid.n_points(),
            got: psi_hat.len(),
        });
    }
    Ok(CharFnEstimate::from_half(
        *grid,
        psi_hat[grid.zero_index()..].to_vec(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::SamplingScheme;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn one_obs(z: f64) -> ObservationSet {
        ObservationSet::new(SamplingScheme::from_gaps(vec![1.0], 1.0).unwrap(), vec![z]).unwrap()
    }

    #[test]
    fn p_hat_vanishes_for_zero_increment() {
        let grid = SpectralGrid::new(5.0, 0.5).unwrap();
        let w = WeightScheme::equal(1, grid);
        let p = compute_p_hat(&one_obs(0.0), &w).unwrap();
        assert!(p.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn p_hat_at_origin() {
        let grid = SpectralGrid::new(5.0, 0.5).unwrap();
        let w = WeightScheme::equal(1, grid);
        let p = compute_p_hat(&one_obs(2.0), &w).unwrap();
        assert_eq!(p[grid.zero_index()], c(0.0, 2.0));
    }

    #[test]
    fn regularized_inverse_cases() {
        assert_eq!(regularize_inverse(&[c(0.5, 0.0)], &[0.2], 1.0)[0], c(0.0, 0.0));
        assert_eq!(regularize_inverse(&[c(2.0, 0.0)], &[0.2], 1.0)[0], c(0.5, 0.0));
        assert_eq!(regularize_inverse(&[c(0.0, 0.3)], &[0.4], 0.1)[0], c(0.0, 0.0));
    }

    #[test]
    fn thresholded_node_gives_zero_derivative() {
        let v = psi_prime_hat(&[c(3.0, 1.0)], &[c(0.0, 0.0)]);
        assert_eq!(v[0], c(0.0, 0.0));
    }

    #[test]
    fn integrate_zero_and_constant() {
        let grid = SpectralGrid::new(4.0, 0.1).unwrap();
        let zero = vec![c(0.0, 0.0); grid.n_points()];
        assert!(integrate_psi(&zero, &grid).iter().all(|v| v.norm() == 0.0));
        let k = c(0.3, -1.2);
        let out = integrate_psi(&vec![k; grid.n_points()], &grid);
        for (u, v) in grid.nodes().iter().zip(&out) {
            assert!((v - k * u).norm() < 1e-12);
        }
        assert_eq!(out[grid.zero_index()], c(0.0, 0.0));
    }

    #[test]
    fn integrate_linear_derivative() {
        let grid = SpectralGrid::new(4.0, 0.01).unwrap();
        let pp: Vec<_> = grid.nodes().iter().map(|&u| c(0.0, u)).collect();
        let out = integrate_psi(&pp, &grid);
        let du = grid.du();
        for (u, v) in grid.nodes().iter().zip(&out) {
            // trapezoid is exact on linear integrands; allow O(du^2)
            assert!((v - c(0.0, u * u / 2.0)).norm() <= du * du);
        }
    }

    #[test]
    fn clamp_cases() {
        let grid = SpectralGrid::from_points(1.0, 3).unwrap();
        let run = |psi: Complex64| {
            let arr = vec![psi.conj(), c(0.0, 0.0), psi];
            clamp_phi(&arr, &grid).unwrap().phi_hat_half()[1]
        };
        let a = run(c(0.5, 0.0));
        assert!((a.norm() - 1.0).abs() < 1e-15);
        let b = run(c(-1.0, 0.0));
        assert!((b - c((-1.0f64).exp(), 0.0)).norm() < 1e-15);
        let d = run(c(0.0, PI));
        assert!((d - c(-1.0, 0.0)).norm() < 1e-15);
        let est = clamp_phi(&[c(0.5, 0.0), c(0.0, 0.0), c(0.5, 0.0)], &grid).unwrap();
        assert_eq!(est.phi_hat_half()[0], c(1.0, 0.0));
        assert!((est.phi_check()[2].re - 0.5f64.exp()).abs() < 1e-15);
    }
}

#[cfg(test)]
mod sweep_tests {
    use super::*;
    use crate::sampling::SamplingScheme;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_obs(n: usize, seed: u64) -> ObservationSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gaps: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..3.0)).collect();
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(-8.0..12.0)).collect();
        ObservationSet::new(SamplingScheme::from_gaps(gaps, 3.0).unwrap(), z).unwrap()
    }

    /// Direct evaluation of the sums with `std` transcendental functions.
    fn brute(obs: &ObservationSet, w: &WeightScheme, range: Range<usize>, k: usize) -> (Complex64, Complex64, f64) {
        let u = w.grid().node(k);
        let mut p = Complex64::default();
        let mut q = Complex64::default();
        let mut s2 = 0.0;
        for j in range {
            let (z, d) = (obs.increments()[j], obs.deltas()[j]);
            let wj = w.weight(j, k);
            let e = Complex64::cis(u * z);
            p += wj * Complex64::new(0.0, z) * e;
            q += wj * d * e;
            s2 += d * d * wj.norm_sqr();
        }
        (p, q, s2)
    }

    /// Exponent with smooth parts and occasional jumps in its increments.
    fn rough_exponent(grid: &SpectralGrid, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut acc = Complex64::default();
        grid.half_nodes()
            .iter()
            .map(|&u| {
                let v = acc;
                let spike = if rng.random_bool(0.1) { rng.random_range(-150.0..150.0) } else { 0.0 };
                acc += Complex64::new(-0.4 * u.sin().abs() + spike, 1.3 * u.cos() - spike) * grid.du();
                v
            })
            .collect()
    }

    fn assert_close(a: Complex64, b: Complex64, scale: f64) {
        assert!((a - b).norm() <= 1e-10 * scale.max(1.0), "{a} vs {b}");
    }

    #[test]
    fn unit_sweep_matches_direct_sums() {
        let obs = random_obs(37, 1);
        let grid = SpectralGrid::new(9.0, 0.013).unwrap();
        let w = WeightScheme::equal(37, grid);
        let groups = [0..10, 10..11, 11..37];
        let sums = accumulate(&obs, &w, &groups, None).unwrap();
        for k in (0..grid.half_len()).step_by(7) {
            for (g, r) in groups.iter().enumerate() {
                let (p, q, s2) = brute(&obs, &w, r.clone(), k);
                let i = k * groups.len() + g;
                assert_close(sums.p[i], p, 100.0);
                assert_close(sums.q[i], q, 100.0);
                assert!((sums.s2[i] - s2).abs() < 1e-10 * s2.max(1.0));
            }
        }
    }

    #[test]
    fn conj_exp_sweep_matches_direct_sums_and_distances() {
        let obs = random_obs(29, 2);
        let grid = SpectralGrid::new(12.0, 0.01).unwrap();
        let cur = WeightScheme::from_exponent(obs.scheme(), grid, rough_exponent(&grid, 3)).unwrap();
        let prev = WeightScheme::from_exponent(obs.scheme(), grid, rough_exponent(&grid, 4)).unwrap();
        let groups = [0..29];
        let node_weights = grid.half_weights(7.5);
        let mut dist = vec![0.0; 29];
        let sums = accumulate(
            &obs,
            &cur,
            &groups,
            Some(DistanceTracker {
                previous: &prev,
                node_weights: &node_weights,
                distances: &mut dist,
            }),
        )
        .unwrap();
        for k in 0..grid.half_len() {
            let (p, q, s2) = brute(&obs, &cur, 0..29, k);
            assert_close(sums.p[k], p, 100.0);
            assert_close(sums.q[k], q, 100.0);
            assert!((sums.s2[k] - s2).abs() < 1e-10 * s2.max(1.0));
        }
        for (j, &d) in dist.iter().enumerate() {
            let direct: f64 = (0..grid.half_len())
                .map(|k| node_weights[k] * (cur.weight(j, k) - prev.weight(j, k)).norm_sqr())
                .sum();
            assert!((d - direct).abs() < 1e-10 * direct.max(1.0), "{d} vs {direct}");
        }
    }

    #[test]
    fn unit_previous_distance_matches_direct() {
        let obs = random_obs(13, 5);
        let grid = SpectralGrid::new(6.0, 0.02).unwrap();
        let cur = WeightScheme::from_exponent(obs.scheme(), grid, rough_exponent(&grid, 6)).unwrap();
        let prev = WeightScheme::equal(13, grid);
        let node_weights = grid.half_weights(6.0);
        let mut dist = vec![0.0; 13];
        accumulate(
            &obs,
            &cur,
            &[0..13],
            Some(DistanceTracker {
                previous: &prev,
                node_weights: &node_weights,
                distances: &mut dist,
            }),
        )
        .unwrap();
        for (j, &d) in dist.iter().enumerate() {
            let direct: f64 = (0..grid.half_len())
                .map(|k| node_weights[k] * (cur.weight(j, k) - 1.0).norm_sqr())
                .sum();
            assert!((d - direct).abs() < 1e-10 * direct.max(1.0));
        }
    }

    #[test]
    fn explicit_weights_use_reference_sweep() {
        let obs = random_obs(9, 7);
        let grid = SpectralGrid::new(3.0, 0.05).unwrap();
        let vals: Vec<Vec<Complex64>> = (0..9)
            .map(|j| grid.half_nodes().iter().map(|&u| Complex64::cis(-0.3 * u * j as f64) * 0.5).collect())
            .collect();
        let w = WeightScheme::explicit(grid, vals).unwrap();
        let sums = accumulate(&obs, &w, &[0..9], None).unwrap();
        for k in 0..grid.half_len() {
            let (p, q, _) = brute(&obs, &w, 0..9, k);
            assert_close(sums.p[k], p, 10.0);
            assert_close(sums.q[k], q, 10.0);
        }
    }
}
