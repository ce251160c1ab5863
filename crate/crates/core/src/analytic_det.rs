//! Expected active clusters, self-requests and download delay under
//! deterministic caching: a cluster with `k` users caches exactly the `k` most
//! popular files, one per user, without repetition.

use crate::cell::{CellConfig, OccupancyPmf};
use crate::numeric::CompensatedSum;
use crate::popularity::PopularityModel;
use crate::{Error, Result};

/// `E[A]` and related quantities at one collaboration distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetPoint {
    pub r: f64,
    /// Expected number of active clusters, `E[A]`.
    pub expected_active: f64,
    /// Expected number of users served from their own cache, `n_self`.
    pub expected_self: f64,
    /// Probability that a given cluster is active, `E[a]`.
    pub active_prob: f64,
}

/// 1-based rank cached by the `i`-th user (1-based) of a cluster under the
/// deterministic rule. Users beyond `m` wrap around to the top of the library.
#[inline]
pub fn det_cached_rank(i: usize, files: usize) -> usize {
    (i - 1) % files + 1
}

/// `E[a | K = k] = 1 - Π_i (1 - (P_CVC(k) - f_{h_i}))`.
///
/// User `i` fails to find its file at a neighbour with probability
/// `1 - (P_CVC(k) - f_{h_i})`; the subtracted term is the self-request. For
/// `k > m` the library is fully cached (`P_CVC = 1`) and users past rank `m`
/// hold duplicates, so each user only misses by requesting its own file.
pub fn det_active_given_k(pop: &PopularityModel, k: usize) -> f64 {
    if k <= 1 {
        return 0.0;
    }
    let m = pop.files();
    let mut miss_all = 1.0;
    if k <= m {
        let outside = pop.tail_mass(k);
        for rank in 1..=k {
            miss_all *= outside + pop.prob(rank);
        }
    } else {
        for i in 1..=k {
            miss_all *= pop.prob(det_cached_rank(i, m));
            if miss_all == 0.0 {
                break;
            }
        }
    }
    1.0 - miss_all
}

/// Expected number of self-requests in a cluster of `k` users:
/// `Σ_i f_{h_i}`, which is `P_CVC(k)` whenever `k <= m`.
pub fn det_self_given_k(pop: &PopularityModel, k: usize) -> f64 {
    let m = pop.files();
    (k / m) as f64 + pop.head_mass(k % m)
}

/// `E[A] = (2/r^2) Σ_k E[a|K=k] Pr[K=k]`, plus `n_self` with the same
/// `2/r^2` prefactor.
pub fn det_expected_active(cfg: &CellConfig, pop: &PopularityModel) -> Result<DetPoint> {
    cfg.validate()?;
    check_library(cfg, pop)?;
    let occupancy = OccupancyPmf::for_cell(cfg);
    let mut active = CompensatedSum::new();
    let mut selfreq = CompensatedSum::new();
    for (k, pk) in occupancy.iter() {
        active.add(pk * det_active_given_k(pop, k));
        selfreq.add(pk * det_self_given_k(pop, k));
    }
    let clusters = cfg.cluster_count();
    let active_prob = active.value().clamp(0.0, 1.0);
    Ok(DetPoint {
        r: cfg.r,
        expected_active: clusters * active_prob,
        expected_self: clusters * selfreq.value(),
        active_prob,
    })
}

pub(crate) fn check_library(cfg: &CellConfig, pop: &PopularityModel) -> Result<()> {
    if cfg.files != pop.files() {
        return Err(Error::invalid(
            "files",
            alloc::format!(
                "cell has {} files but the popularity model has {}",
                cfg.files,
                pop.files()
            ),
        ));
    }
    Ok(())
}

/// Average download times through the base station and over D2D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayWeights {
    pub omega_bs: f64,
    pub omega_d2d: f64,
}

impl DelayWeights {
    pub fn new(omega_bs: f64, omega_d2d: f64) -> Result<Self> {
        let w = Self {
            omega_bs,
            omega_d2d,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_bs.is_finite() && self.omega_bs >= 0.0) {
            return Err(Error::invalid(
                "omega_bs",
                "must be finite and non-negative",
            ));
        }
        if !(self.omega_d2d.is_finite() && self.omega_d2d >= 0.0) {
            return Err(Error::invalid(
                "omega_d2d",
                "must be finite and non-negative",
            ));
        }
        if self.omega_bs < self.omega_d2d {
            log::warn!(
                "omega_bs ({}) < omega_d2d ({}): D2D is slower than the base station",
                self.omega_bs,
                self.omega_d2d
            );
        }
        Ok(())
    }

    /// `(n - n_self - E[A]) ω_BS + E[A] ω_D2D`.
    pub fn total_delay(&self, users: usize, expected_active: f64, expected_self: f64) -> f64 {
        (users as f64 - expected_self - expected_active) * self.omega_bs
            + expected_active * self.omega_d2d
    }
}

/// Average total download delay for the cell under deterministic caching.
pub fn det_delay_objective(
    cfg: &CellConfig,
    pop: &PopularityModel,
    weights: DelayWeights,
) -> Result<f64> {
    weights.validate()?;
    let point = det_expected_active(cfg, pop)?;
    Ok(weights.total_delay(cfg.users, point.expected_active, point.expected_self))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    /// Exhaustive oracle: enumerate every joint request vector for users
    /// holding `caches` and sum the probability that somebody finds its file
    /// at a different user (self-requests never count).
    fn enumerate_active(pop: &PopularityModel, caches: &[usize]) -> f64 {
        let k = caches.len();
        let m = pop.files();
        let mut requests = alloc::vec![1usize; k];
        let mut total = 0.0;
        loop {
            let prob: f64 = requests.iter().map(|&q| pop.prob(q)).product();
            let active = (0..k).any(|i| {
                requests[i] != caches[i] && (0..k).any(|j| j != i && caches[j] == requests[i])
            });
            if active {
                total += prob;
            }
            let mut pos = 0;
            loop {
                if pos == k {
                    return total;
                }
                requests[pos] += 1;
                if requests[pos] <= m {
                    break;
                }
                requests[pos] = 1;
                pos += 1;
            }
        }
    }

    #[test]
    fn lone_or_absent_user_never_activates() {
        let pop = PopularityModel::zipf(5, 0.8).unwrap();
        assert_eq!(det_active_given_k(&pop, 0), 0.0);
        assert_eq!(det_active_given_k(&pop, 1), 0.0);
    }

    #[test]
    fn two_users_two_files() {
        let pop = PopularityModel::zipf(2, 1.0).unwrap();
        let oracle = enumerate_active(&pop, &[1, 2]);
        assert!((oracle - 7.0 / 9.0).abs() < 1e-15);
        assert!((det_active_given_k(&pop, 2) - 7.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn closed_form_matches_enumeration() {
        for m in 1..=4 {
            for gamma in [0.0, 0.6, 1.4] {
                let pop = PopularityModel::zipf(m, gamma).unwrap();
                for k in 0..=5 {
                    let caches: Vec<usize> = (1..=k).map(|i| det_cached_rank(i, m)).collect();
                    let oracle = enumerate_active(&pop, &caches);
                    let got = det_active_given_k(&pop, k);
                    assert!((got - oracle).abs() < 1e-13, "m={m} g={gamma} k={k}");
                }
            }
        }
    }

    #[test]
    fn closed_form_matches_request_sampling() {
        use crate::stream::{substream, Family};
        let pop = PopularityModel::zipf(1000, 0.6).unwrap();
        let k = 20;
        let trials = 1_000_000;
        let mut rng = substream(2024, Family::GeoTrials, 0);
        let mut active = 0usize;
        let mut requests = [0usize; 20];
        for _ in 0..trials {
            for q in requests.iter_mut() {
                *q = pop.sample_rank(&mut rng);
            }
            // user i holds rank i + 1; a request hits a neighbour iff it is a
            // top-k rank other than the user's own.
            if requests
                .iter()
                .enumerate()
                .any(|(i, &q)| q <= k && q != i + 1)
            {
                active += 1;
            }
        }
        let p = det_active_given_k(&pop, k);
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        let est = active as f64 / trials as f64;
        assert!((est - p).abs() < 3.0 * se, "analytic {p}, sampled {est}");
    }

    #[test]
    fn single_user_cell_has_no_active_clusters() {
        let pop = PopularityModel::zipf(10, 0.6).unwrap();
        for r in [0.1, 0.5, 1.4] {
            let cfg = CellConfig::new(1, 10, r, 0.6).unwrap();
            assert_eq!(
                det_expected_active(&cfg, &pop).unwrap().expected_active,
                0.0
            );
        }
    }

    #[test]
    fn point_is_self_consistent() {
        let pop = PopularityModel::zipf(1000, 0.6).unwrap();
        for r in [0.05, 0.2, 0.7, 1.2, crate::CELL_SIDE] {
            let cfg = CellConfig::new(500, 1000, r, 0.6).unwrap();
            let pt = det_expected_active(&cfg, &pop).unwrap();
            assert!((0.0..=1.0).contains(&pt.active_prob));
            assert!(pt.expected_active <= cfg.cluster_count() + 1e-12);
            assert!((pt.expected_active - cfg.cluster_count() * pt.active_prob).abs() < 1e-9);
            assert!(pt.expected_self >= 0.0 && pt.expected_self <= 500.0 + 1e-9);
        }
    }

    #[test]
    fn whole_cell_cluster_has_at_most_one_link() {
        let pop = PopularityModel::zipf(1000, 0.6).unwrap();
        let cfg = CellConfig::new(500, 1000, crate::CELL_SIDE, 0.6).unwrap();
        let pt = det_expected_active(&cfg, &pop).unwrap();
        assert!(pt.expected_active <= 1.0 + 1e-12);
    }

    #[test]
    fn library_mismatch_is_rejected() {
        let pop = PopularityModel::zipf(10, 0.6).unwrap();
        let cfg = CellConfig::new(5, 11, 0.3, 0.6).unwrap();
        assert_eq!(
            det_expected_active(&cfg, &pop).unwrap_err().field(),
            Some("files")
        );
    }

    #[test]
    fn skewed_requests_dominate_at_small_r() {
        let flat = PopularityModel::zipf(1000, 0.6).unwrap();
        let steep = PopularityModel::zipf(1000, 1.4).unwrap();
        for i in 1..=20 {
            let cfg = CellConfig::new(500, 1000, 0.01 * i as f64, 0.6).unwrap();
            let a = det_expected_active(&cfg, &flat).unwrap().expected_active;
            let b = det_expected_active(&cfg, &steep).unwrap().expected_active;
            assert!(b >= a, "r={} {b} < {a}", cfg.r);
        }
    }

    #[test]
    fn delay_with_equal_weights_ignores_d2d() {
        let pop = PopularityModel::zipf(100, 1.0).unwrap();
        let cfg = CellConfig::new(50, 100, 0.4, 1.0).unwrap();
        let pt = det_expected_active(&cfg, &pop).unwrap();
        let d = det_delay_objective(&cfg, &pop, DelayWeights::new(3.0, 3.0).unwrap()).unwrap();
        assert!((d - (50.0 - pt.expected_self) * 3.0).abs() < 1e-9);
        let d0 = DelayWeights::new(2.0, 0.0)
            .unwrap()
            .total_delay(50, pt.expected_active, 0.0);
        assert!((d0 - (50.0 - pt.expected_active) * 2.0).abs() < 1e-12);
    }

    #[test]
    fn negative_delay_rejected() {
        assert_eq!(
            DelayWeights::new(-1.0, 0.0).unwrap_err().field(),
            Some("omega_bs")
        );
        assert_eq!(
            DelayWeights::new(1.0, -0.5).unwrap_err().field(),
            Some("omega_d2d")
        );
        // slower D2D is a warning, not an error
        assert!(DelayWeights::new(1.0, 2.0).is_ok());
    }

    proptest! {
        #[test]
        fn activity_non_decreasing_in_k(m in 1usize..60, gamma in 0.0f64..2.5) {
            let pop = PopularityModel::zipf(m, gamma).unwrap();
            let mut prev = 0.0;
            for k in 0..(2 * m + 3) {
                let a = det_active_given_k(&pop, k);
                prop_assert!((0.0..=1.0).contains(&a));
                prop_assert!(a >= prev - 1e-12, "k={} {} < {}", k, a, prev);
                prev = a;
            }
        }
    }
}
