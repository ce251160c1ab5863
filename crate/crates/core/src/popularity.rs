//! Truncated Zipf distributions over a library of `m` files.
//!
//! The same type serves two roles: the request popularity `f_i` (exponent
//! `gamma_r`) and the random caching distribution `p_h` (exponent `gamma_c`).
//! Ranks are 1-based throughout: rank 1 is the most popular file.

use alloc::vec::Vec;

use rand::Rng;

use crate::numeric::CompensatedSum;
use crate::{Error, Result};

/// Normalized truncated Zipf pmf with cached prefix and suffix sums.
#[derive(Debug, Clone, PartialEq)]
pub struct PopularityModel {
    gamma: f64,
    pmf: Vec<f64>,
    /// `head[k]` = mass of ranks `1..=k`; `head[0] = 0`, `head[m] = 1`.
    head: Vec<f64>,
    /// `tail[k]` = mass of ranks `k+1..=m`; summed from the rare end so that
    /// `1 - head[k]` never suffers cancellation.
    tail: Vec<f64>,
}

impl PopularityModel {
    /// Zipf law over `m` files: `pmf[i] ∝ i^-gamma`.
    pub fn zipf(m: usize, gamma: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("files", "library size must be at least 1"));
        }
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(Error::invalid(
                "gamma",
                alloc::format!("Zipf exponent must be finite and non-negative, got {gamma}"),
            ));
        }

        let weights: Vec<f64> = (1..=m).map(|i| libm::pow(i as f64, -gamma)).collect();
        let norm = weights.iter().copied().collect::<CompensatedSum>().value();
        let pmf: Vec<f64> = weights.iter().map(|w| w / norm).collect();

        let mut head = Vec::with_capacity(m + 1);
        head.push(0.0);
        let mut acc = CompensatedSum::new();
        for &p in &pmf {
            acc.add(p);
            head.push(acc.value());
        }
        head[m] = 1.0;

        let mut tail = alloc::vec![0.0; m + 1];
        let mut acc = CompensatedSum::new();
        for k in (0..m).rev() {
            acc.add(pmf[k]);
            tail[k] = acc.value();
        }
        tail[0] = 1.0;

        Ok(Self {
            gamma,
            pmf,
            head,
            tail,
        })
    }

    /// Library size `m`.
    pub fn files(&self) -> usize {
        self.pmf.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Probabilities indexed from 0 (entry 0 is rank 1).
    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    /// Probability of the file with 1-based `rank`.
    ///
    /// # Panics
    /// If `rank` is 0 or greater than `m`.
    #[inline]
    pub fn prob(&self, rank: usize) -> f64 {
        self.pmf[rank - 1]
    }

    /// Mass of the `k` most popular files, `P_CVC(k)`. Exactly 1 for `k >= m`.
    #[inline]
    pub fn head_mass(&self, k: usize) -> f64 {
        if k >= self.pmf.len() {
            1.0
        } else {
            self.head[k]
        }
    }

    /// Mass of every file ranked below `k`, i.e. `1 - head_mass(k)` computed
    /// without cancellation. Exactly 0 for `k >= m`.
    #[inline]
    pub fn tail_mass(&self, k: usize) -> f64 {
        if k >= self.pmf.len() {
            0.0
        } else {
            self.tail[k]
        }
    }

    /// Draws a 1-based rank by inverse-CDF lookup.
    ///
    /// Inversion keeps draws monotone in the uniform variate, so two models
    /// driven by the same stream produce coupled samples.
    pub fn sample_rank<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.rank_for_quantile(u)
    }

    /// Smallest rank whose cumulative mass exceeds `u` (`u` in `[0, 1)`).
    pub fn rank_for_quantile(&self, u: f64) -> usize {
        let m = self.pmf.len();
        // head[1..=m] is non-decreasing and ends at exactly 1.
        let idx = self.head[1..].partition_point(|&c| c <= u);
        (idx + 1).min(m)
    }

    /// Expected request mass landing on a file drawn from `caching`:
    /// `Σ_h p_h f_h` for `self` as the request law.
    pub fn overlap(&self, caching: &PopularityModel) -> f64 {
        self.pmf
            .iter()
            .zip(&caching.pmf)
            .map(|(f, p)| f * p)
            .collect::<CompensatedSum>()
            .value()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::{substream, Family};

    #[test]
    fn uniform_when_gamma_is_zero() {
        let p = PopularityModel::zipf(4, 0.0).unwrap();
        assert_eq!(p.pmf(), &[0.25, 0.25, 0.25, 0.25]);
    }

    #[test]
    fn two_files_harmonic() {
        let p = PopularityModel::zipf(2, 1.0).unwrap();
        assert!((p.prob(1) - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.prob(2) - 1.0 / 3.0).abs() < 1e-15);
        assert!((p.head_mass(1) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(p.head_mass(2), 1.0);
        assert_eq!(p.head_mass(0), 0.0);
        assert_eq!(p.head_mass(17), 1.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(
            PopularityModel::zipf(0, 1.0).unwrap_err().field(),
            Some("files")
        );
        assert!(PopularityModel::zipf(3, -0.1).is_err());
        assert!(PopularityModel::zipf(3, f64::NAN).is_err());
        assert!(PopularityModel::zipf(3, f64::INFINITY).is_err());
    }

    #[test]
    fn tail_complements_head() {
        let p = PopularityModel::zipf(50, 1.3).unwrap();
        for k in 0..=60 {
            assert!((p.head_mass(k) + p.tail_mass(k) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn single_file_always_sampled() {
        let p = PopularityModel::zipf(1, 2.5).unwrap();
        let mut rng = substream(1, Family::GeoTrials, 0);
        assert!((0..1000).all(|_| p.sample_rank(&mut rng) == 1));
    }

    #[test]
    fn quantile_lookup_edges() {
        let p = PopularityModel::zipf(4, 0.0).unwrap();
        assert_eq!(p.rank_for_quantile(0.0), 1);
        assert_eq!(p.rank_for_quantile(0.2499), 1);
        assert_eq!(p.rank_for_quantile(0.25), 2);
        assert_eq!(p.rank_for_quantile(0.9999999), 4);
    }

    #[test]
    fn uniform_sampling_frequencies() {
        let p = PopularityModel::zipf(4, 0.0).unwrap();
        let mut rng = substream(7, Family::GeoTrials, 0);
        let draws = 1_000_000;
        let mut counts = [0usize; 4];
        for _ in 0..draws {
            counts[p.sample_rank(&mut rng) - 1] += 1;
        }
        let sigma = (draws as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!(
                (c as f64 - 0.25 * draws as f64).abs() < 3.0 * sigma,
                "{counts:?}"
            );
        }
    }

    #[test]
    fn sampled_head_mass_matches_analytic() {
        let p = PopularityModel::zipf(1000, 0.6).unwrap();
        let mut rng = substream(11, Family::GeoTrials, 3);
        let draws = 1_000_000;
        let hits = (0..draws).filter(|_| p.sample_rank(&mut rng) <= 10).count();
        let q = p.head_mass(10);
        let sigma = (draws as f64 * q * (1.0 - q)).sqrt();
        assert!((hits as f64 - q * draws as f64).abs() < 3.0 * sigma);
    }
}
