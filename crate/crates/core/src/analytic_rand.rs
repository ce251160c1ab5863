//! Expected active clusters under random caching: every user independently
//! caches one file drawn from a Zipf law with exponent `gamma_c`.
//!
//! Given the cache contents `H` of a cluster, requests are independent, so
//! the cluster is idle with probability `Π_i (1 - (Σ_{h∈H̃} f_h - f_{h_i}))`
//! where `H̃` is the set of distinct cached files. `E[a | K = k]` is the
//! expectation of that product over `H`. The alternative reading, a product
//! of per-user marginals, is available as [`RandVariant::ProductOfMarginals`].

use alloc::vec::Vec;

use crate::analytic_det::{check_library, DetPoint};
use crate::cell::{CellConfig, OccupancyPmf};
use crate::exec::map_collect;
use crate::numeric::CompensatedSum;
use crate::popularity::PopularityModel;
use crate::stream::{substream, Family};
use crate::{Error, Result};

/// Default Monte Carlo budget per evaluation point.
pub const DEFAULT_MC_SAMPLES: usize = 10_000;

/// Occupancy levels with `Pr[K = k]` below this are skipped; each can move
/// `E[a]` by at most its own probability.
const STRATUM_CUTOFF: f64 = 1e-12;

/// Work limit for [`rand_expected_active_exact`], in cache profiles `m^k`.
pub const ENUMERATION_LIMIT: f64 = 1e7;

/// How the per-cluster activity probability combines the users.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RandVariant {
    /// `1 - E_H[Π_i Pr[u_i = 1 | H]]`: users are independent only given `H`.
    #[default]
    ConditionalProduct,
    /// `1 - Π_i E_H[Pr[u_i = 1 | H]]`: the product taken outside the
    /// expectation, as if users were independent. Kept for comparison.
    ProductOfMarginals,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandCachingParams {
    /// Caching Zipf exponent, `gamma_c`.
    pub caching_gamma: f64,
    /// Monte Carlo cache profiles per evaluation point, spread over the
    /// occupancy strata in proportion to `Pr[K = k]`.
    pub mc_samples: usize,
    pub seed: u64,
    pub variant: RandVariant,
}

impl RandCachingParams {
    pub fn new(caching_gamma: f64, mc_samples: usize, seed: u64) -> Result<Self> {
        let p = Self {
            caching_gamma,
            mc_samples,
            seed,
            variant: RandVariant::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_variant(self, variant: RandVariant) -> Self {
        Self { variant, ..self }
    }

    pub fn with_gamma(self, caching_gamma: f64) -> Self {
        Self {
            caching_gamma,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.caching_gamma.is_finite() || self.caching_gamma < 0.0 {
            return Err(Error::invalid(
                "caching_gamma",
                "must be finite and non-negative",
            ));
        }
        if self.mc_samples == 0 {
            return Err(Error::invalid("mc_samples", "need at least one sample"));
        }
        Ok(())
    }
}

/// Files cached by the users of one cluster, `H = [h_1, ..., h_k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheProfile {
    assignments: Vec<usize>,
    distinct_mass: f64,
}

impl CacheProfile {
    pub fn new(pop_req: &PopularityModel, assignments: Vec<usize>) -> Result<Self> {
        let m = pop_req.files();
        if let Some(&bad) = assignments.iter().find(|&&h| h == 0 || h > m) {
            return Err(Error::invalid(
                "assignments",
                alloc::format!("cached rank {bad} outside 1..={m}"),
            ));
        }
        let mut distinct: Vec<usize> = assignments.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let distinct_mass = distinct
            .iter()
            .map(|&h| pop_req.prob(h))
            .collect::<CompensatedSum>()
            .value();
        Ok(Self {
            assignments,
            distinct_mass,
        })
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    /// Request mass of the distinct cached files, `Σ_{h∈H̃} f_h`.
    pub fn distinct_mass(&self) -> f64 {
        self.distinct_mass
    }
}

/// Probability that a cluster caching `profile` has at least one D2D
/// opportunity: `1 - Π_i (1 - (Σ_{h∈H̃} f_h - f_{h_i}))`.
pub fn rand_active_given_profile(pop_req: &PopularityModel, profile: &CacheProfile) -> f64 {
    active_given_cached(pop_req, &profile.assignments, profile.distinct_mass)
}

#[inline]
fn active_given_cached(pop_req: &PopularityModel, cached: &[usize], distinct_mass: f64) -> f64 {
    let outside = 1.0 - distinct_mass;
    let idle: f64 = cached
        .iter()
        .map(|&h| (outside + pop_req.prob(h)).min(1.0))
        .product();
    (1.0 - idle).clamp(0.0, 1.0)
}

/// Mean miss probability over the users of one profile (marginal variant).
#[inline]
fn mean_miss(pop_req: &PopularityModel, cached: &[usize], distinct_mass: f64) -> f64 {
    let outside = 1.0 - distinct_mass;
    cached
        .iter()
        .map(|&h| (outside + pop_req.prob(h)).min(1.0))
        .sum::<f64>()
        / cached.len() as f64
}

/// Result of a random-caching evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandEstimate {
    pub point: DetPoint,
    /// Standard error of `point.expected_active` (0 for exact evaluation).
    pub active_std_error: f64,
    /// Cache profiles drawn (0 for exact evaluation).
    pub samples: usize,
}

/// `n_self`: each user self-requests with probability `Σ_h p_h f_h`, so the
/// expected count over a cluster of `k` users is `k` times that, duplicates
/// included.
fn expected_self(cfg: &CellConfig, occupancy: &OccupancyPmf, overlap: f64) -> f64 {
    let per_cluster = occupancy
        .iter()
        .map(|(k, p)| p * k as f64 * overlap)
        .collect::<CompensatedSum>()
        .value();
    cfg.cluster_count() * per_cluster
}

fn assemble(cfg: &CellConfig, active_prob: f64, expected_self: f64) -> DetPoint {
    let active_prob = active_prob.clamp(0.0, 1.0);
    DetPoint {
        r: cfg.r,
        expected_active: cfg.cluster_count() * active_prob,
        expected_self,
        active_prob,
    }
}

/// Exact `E[A]` by summing over all `m^k` cache profiles of every relevant
/// occupancy level.
///
/// Fails with [`Error::EnumerationInfeasible`] when the largest level with
/// `Pr[K = k] > 1e-12` needs more than [`ENUMERATION_LIMIT`] profiles.
pub fn rand_expected_active_exact(
    cfg: &CellConfig,
    pop_req: &PopularityModel,
    params: &RandCachingParams,
) -> Result<RandEstimate> {
    cfg.validate()?;
    params.validate()?;
    check_library(cfg, pop_req)?;
    let caching = PopularityModel::zipf(cfg.files, params.caching_gamma)?;
    let occupancy = OccupancyPmf::for_cell(cfg);
    let m = cfg.files;

    let k_max = occupancy
        .iter()
        .filter(|&(_, p)| p > STRATUM_CUTOFF)
        .map(|(k, _)| k)
        .max()
        .unwrap_or(0);
    let profiles = libm::pow(m as f64, k_max as f64);
    if k_max >= 2 && profiles > ENUMERATION_LIMIT {
        return Err(Error::EnumerationInfeasible {
            profiles,
            limit: ENUMERATION_LIMIT,
            suggested_mc_samples: params.mc_samples.max(DEFAULT_MC_SAMPLES),
        });
    }

    let strata: Vec<(usize, f64)> = occupancy
        .iter()
        .filter(|&(k, p)| k >= 2 && p > STRATUM_CUTOFF)
        .collect();
    let conditional = map_collect(&strata, |&(k, pk)| {
        pk * exact_active_given_k(pop_req, &caching, k, params.variant)
    });
    let active_prob = conditional.into_iter().collect::<CompensatedSum>().value();
    let n_self = expected_self(cfg, &occupancy, pop_req.overlap(&caching));
    Ok(RandEstimate {
        point: assemble(cfg, active_prob, n_self),
        active_std_error: 0.0,
        samples: 0,
    })
}

/// `E[a | K = k]` by enumerating `{1..m}^k`.
pub fn exact_active_given_k(
    pop_req: &PopularityModel,
    caching: &PopularityModel,
    k: usize,
    variant: RandVariant,
) -> f64 {
    if k < 2 {
        return 0.0;
    }
    let m = pop_req.files();
    let mut profile = alloc::vec![1usize; k];
    let mut stamps = Stamps::new(m);
    let mut expected_idle = CompensatedSum::new();
    let mut expected_miss = CompensatedSum::new();
    loop {
        let prob: f64 = profile.iter().map(|&h| caching.prob(h)).product();
        if prob > 0.0 {
            let dm = stamps.distinct_mass(pop_req, &profile);
            match variant {
                RandVariant::ConditionalProduct => {
                    expected_idle.add(prob * (1.0 - active_given_cached(pop_req, &profile, dm)));
                }
                RandVariant::ProductOfMarginals => {
                    expected_miss.add(prob * mean_miss(pop_req, &profile, dm));
                }
            }
        }
        let mut pos = 0;
        loop {
            if pos == k {
                return match variant {
                    RandVariant::ConditionalProduct => 1.0 - expected_idle.value(),
                    RandVariant::ProductOfMarginals => {
                        1.0 - libm::pow(expected_miss.value(), k as f64)
                    }
                }
                .clamp(0.0, 1.0);
            }
            profile[pos] += 1;
            if profile[pos] <= m {
                break;
            }
            profile[pos] = 1;
            pos += 1;
        }
    }
}

/// Marks files already seen in the current profile without clearing an
/// `m`-sized buffer between profiles.
struct Stamps {
    marks: Vec<u32>,
    epoch: u32,
}

impl Stamps {
    fn new(m: usize) -> Self {
        Self {
            marks: alloc::vec![0; m + 1],
            epoch: 0,
        }
    }

    fn distinct_mass(&mut self, pop_req: &PopularityModel, cached: &[usize]) -> f64 {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.marks.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
        let mut mass = 0.0;
        for &h in cached {
            if self.marks[h] != self.epoch {
                self.marks[h] = self.epoch;
                mass += pop_req.prob(h);
            }
        }
        mass
    }
}

/// Per-stratum Monte Carlo summary.
#[derive(Debug, Clone, Copy)]
struct Stratum {
    weight: f64,
    mean: f64,
    variance_of_mean: f64,
    samples: usize,
}

/// Stratified Monte Carlo estimate of `E[A]`.
///
/// Occupancy level `k` gets `ceil(mc_samples * Pr[K = k])` (at least two)
/// cache profiles drawn from its own substream of `seed`, so re-evaluating
/// with another `r` or `gamma_c` reuses the same uniforms (common random
/// numbers) and the result is bit-identical across thread counts.
pub fn rand_expected_active_mc(
    cfg: &CellConfig,
    pop_req: &PopularityModel,
    params: &RandCachingParams,
) -> Result<RandEstimate> {
    cfg.validate()?;
    params.validate()?;
    check_library(cfg, pop_req)?;
    let caching = PopularityModel::zipf(cfg.files, params.caching_gamma)?;
    let occupancy = OccupancyPmf::for_cell(cfg);

    let strata: Vec<(usize, f64)> = occupancy
        .iter()
        .filter(|&(k, p)| k >= 2 && p > STRATUM_CUTOFF)
        .collect();
    let results = map_collect(&strata, |&(k, pk)| {
        let draws = (libm::ceil(params.mc_samples as f64 * pk) as usize).max(2);
        sample_stratum(pop_req, &caching, k, pk, draws, params)
    });

    let mut active = CompensatedSum::new();
    let mut variance = 0.0;
    let mut samples = 0;
    for s in &results {
        active.add(s.weight * s.mean);
        variance += s.weight * s.weight * s.variance_of_mean;
        samples += s.samples;
    }
    let n_self = expected_self(cfg, &occupancy, pop_req.overlap(&caching));
    let point = assemble(cfg, active.value(), n_self);
    Ok(RandEstimate {
        point,
        active_std_error: cfg.cluster_count() * libm::sqrt(variance),
        samples,
    })
}

fn sample_stratum(
    pop_req: &PopularityModel,
    caching: &PopularityModel,
    k: usize,
    weight: f64,
    draws: usize,
    params: &RandCachingParams,
) -> Stratum {
    let mut rng = substream(params.seed, Family::CacheProfiles, k as u64);
    let mut stamps = Stamps::new(pop_req.files());
    let mut profile = alloc::vec![0usize; k];
    // Welford accumulators over the per-profile statistic.
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for t in 0..draws {
        for h in profile.iter_mut() {
            *h = caching.sample_rank(&mut rng);
        }
        let dm = stamps.distinct_mass(pop_req, &profile);
        let x = match params.variant {
            RandVariant::ConditionalProduct => active_given_cached(pop_req, &profile, dm),
            RandVariant::ProductOfMarginals => mean_miss(pop_req, &profile, dm),
        };
        let delta = x - mean;
        mean += delta / (t + 1) as f64;
        m2 += delta * (x - mean);
    }
    let var_x = if draws > 1 {
        m2 / (draws - 1) as f64
    } else {
        0.0
    };
    let var_mean = var_x / draws as f64;
    let (mean, variance_of_mean) = match params.variant {
        RandVariant::ConditionalProduct => (mean, var_mean),
        RandVariant::ProductOfMarginals => {
            // delta method for 1 - q^k
            let kf = k as f64;
            let slope = kf * libm::pow(mean, kf - 1.0);
            (1.0 - libm::pow(mean, kf), slope * slope * var_mean)
        }
    };
    Stratum {
        weight,
        mean,
        variance_of_mean,
        samples: draws,
    }
}
