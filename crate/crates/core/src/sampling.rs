//! Deterministic irregular sampling schemes and the increments observed on them.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Observation instants `0 = t_0 < t_1 < ... < t_n = T` with gaps bounded by `delta_max`.
///
/// Gaps are the primary data; the times are their cumulative sums, computed once.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingScheme {
    deltas: Vec<f64>,
    times: Vec<f64>,
    delta_max: f64,
}

impl SamplingScheme {
    pub fn from_gaps(gaps: Vec<f64>, delta_max: f64) -> Result<Self> {
        if !(delta_max.is_finite() && delta_max > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "delta_max must be positive and finite, got {delta_max}"
            )));
        }
        if gaps.is_empty() {
            return Err(Error::InvalidParameter("a scheme needs at least one gap".into()));
        }
        for (index, &value) in gaps.iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::NonPositiveGap { index, value });
            }
            if value > delta_max {
                return Err(Error::GapExceedsDeltaMax {
                    index,
                    value,
                    delta_max,
                });
            }
        }
        let mut times = Vec::with_capacity(gaps.len() + 1);
        let mut t = 0.0;
        times.push(t);
        for &d in &gaps {
            t += d;
            times.push(t);
        }
        Ok(Self {
            deltas: gaps,
            times,
            delta_max,
        })
    }

    /// Homogeneous scheme with `n` gaps of length `delta`.
    pub fn homogeneous(n: usize, delta: f64) -> Result<Self> {
        Self::from_gaps(vec![delta; n], delta)
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn delta_max(&self) -> f64 {
        self.delta_max
    }

    /// `max(delta_max, 1)`, the constant entering the variance bounds.
    pub fn delta_max_bar(&self) -> f64 {
        self.delta_max.max(1.0)
    }

    /// Horizon `T = t_n`.
    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("scheme has at least one gap")
    }

    /// Number of gaps (observations of increments).
    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    /// Writes the scheme as CSV with header `index,t,delta`. Row 0 is the origin
    /// with an empty delta column.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "index,t,delta")?;
        writeln!(out, "0,{},", self.times[0])?;
        for (j, (&t, &d)) in self.times[1..].iter().zip(&self.deltas).enumerate() {
            writeln!(out, "{},{},{}", j + 1, t, d)?;
        }
        Ok(())
    }
}

/// Draws `n` i.i.d. gaps uniform on `(0, upper]`, seeded.
pub fn draw_uniform_gaps(n: usize, upper: f64, seed: u64) -> Result<SamplingScheme> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    draw_uniform_gaps_with(n, upper, &mut rng)
}

/// As [`draw_uniform_gaps`], drawing from a caller-supplied generator.
pub fn draw_uniform_gaps_with<R: Rng + ?Sized>(
    n: usize,
    upper: f64,
    rng: &mut R,
) -> Result<SamplingScheme> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if !(upper.is_finite() && upper > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gap upper bound must be positive, got {upper}"
        )));
    }
    let gaps = (0..n)
        .map(|_| loop {
            // 1 - U lies in (0, 1]; the loop only guards against an exact zero
            // produced by rounding in the product.
            let g = upper * (1.0 - rng.random::<f64>());
            if g > 0.0 {
                break g;
            }
        })
        .collect();
    SamplingScheme::from_gaps(gaps, upper)
}

/// One sampled path: the scheme and the increments `Z_j = X_{t_j} - X_{t_{j-1}}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    scheme: SamplingScheme,
    increments: Vec<f64>,
}

impl ObservationSet {
    pub fn new(scheme: SamplingScheme, increments: Vec<f64>) -> Result<Self> {
        if increments.len() != scheme.len() {
            return Err(Error::LengthMismatch {
                what: "increments",
                expected: scheme.len(),
                got: increments.len(),
            });
        }
        Ok(Self { scheme, increments })
    }

    pub fn scheme(&self) -> &SamplingScheme {
        &self.scheme
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn deltas(&self) -> &[f64] {
        self.scheme.deltas()
    }

    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.scheme.horizon()
    }

    /// Observations restricted to the given indices (scheme rebuilt from the kept gaps).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let gaps = indices.iter().map(|&j| self.scheme.deltas[j]).collect();
        let inc = indices.iter().map(|&j| self.increments[j]).collect();
        Self::new(SamplingScheme::from_gaps(gaps, self.scheme.delta_max)?, inc)
    }

    /// Writes `index,t,delta,z` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "index,t,delta,z")?;
        let times = self.scheme.times();
        for j in 0..self.len() {
            writeln!(
                out,
                "{},{},{},{}",
                j + 1,
                times[j + 1],
                self.scheme.deltas[j],
                self.increments[j]
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cumulative_times_from_unit_gaps() {
        let s = SamplingScheme::from_gaps(vec![1.0, 1.0, 1.0], 1.0).unwrap();
        assert_eq!(s.times(), &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(s.horizon(), 3.0);
    }

    #[test]
    fn cumulative_times_from_mixed_gaps() {
        let s = SamplingScheme::from_gaps(vec![0.5, 2.0], 6.0).unwrap();
        assert_eq!(s.times(), &[0.0, 0.5, 2.5]);
        assert_eq!(s.horizon(), 2.5);
    }

    #[test]
    fn rejects_gap_above_bound() {
        let err = SamplingScheme::from_gaps(vec![1.0, 7.0], 6.0).unwrap_err();
        assert!(matches!(err, Error::GapExceedsDeltaMax { index: 1, .. }));
    }

    #[test]
    fn rejects_non_positive_gap() {
        let err = SamplingScheme::from_gaps(vec![1.0, 0.0], 6.0).unwrap_err();
        assert!(matches!(err, Error::NonPositiveGap { index: 1, .. }));
        let err = SamplingScheme::from_gaps(vec![-1.0], 6.0).unwrap_err();
        assert!(matches!(err, Error::NonPositiveGap { index: 0, .. }));
    }

    #[test]
    fn uniform_gaps_sample_mean() {
        let s = draw_uniform_gaps(1000, 6.0, 1).unwrap();
        assert_eq!(s.len(), 1000);
        assert!(s.deltas().iter().all(|&d| d > 0.0 && d <= 6.0));
        // U(0,6): mean 3, sd 6/sqrt(12)
        let se = 6.0 / 12f64.sqrt() / (1000f64).sqrt();
        let mean = s.horizon() / 1000.0;
        assert!((mean - 3.0).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn single_uniform_gap_in_support() {
        let s = draw_uniform_gaps(1, 2.0, 7).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s.deltas()[0] > 0.0 && s.deltas()[0] <= 2.0);
    }

    #[test]
    fn uniform_gaps_are_deterministic() {
        assert_eq!(
            draw_uniform_gaps(50, 2.0, 99).unwrap(),
            draw_uniform_gaps(50, 2.0, 99).unwrap()
        );
    }

    #[test]
    fn large_sample_mean_within_four_se() {
        let n = 100_000;
        let s = draw_uniform_gaps(n, 2.0, 3).unwrap();
        let se = 2.0 / 12f64.sqrt() / (n as f64).sqrt();
        assert!((s.horizon() / n as f64 - 1.0).abs() < 4.0 * se);
    }

    #[test]
    fn horizon_matches_sum_of_gaps() {
        let s = draw_uniform_gaps(10_000, 6.0, 5).unwrap();
        let sum: f64 = s.deltas().iter().sum();
        assert!((sum - s.horizon()).abs() <= 1e-12 * s.horizon());
    }

    #[test]
    fn csv_header_and_rows() {
        let s = SamplingScheme::from_gaps(vec![0.5, 2.0], 6.0).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "index,t,delta\n0,0,\n1,0.5,0.5\n2,2.5,2\n");
    }

    #[test]
    fn observation_length_must_match() {
        let s = SamplingScheme::from_gaps(vec![1.0, 1.0], 1.0).unwrap();
        assert!(matches!(
            ObservationSet::new(s, vec![0.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn gaps_round_trip(gaps in prop::collection::vec(1e-6f64..6.0, 1..200)) {
                let s = SamplingScheme::from_gaps(gaps, 6.0).unwrap();
                let again = SamplingScheme::from_gaps(s.deltas().to_vec(), s.delta_max()).unwrap();
                prop_assert_eq!(again.times(), s.times());
                prop_assert!(s.times().windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
}
