//! Cell configuration and the binomial law of users per cluster.

use alloc::vec::Vec;

use crate::numeric::CompensatedSum;
use crate::{Error, Result, CELL_SIDE};

/// Users, library and collaboration distance for one cell.
///
/// Distances are in units where the analytic model has `2 / r^2` clusters,
/// i.e. the simulated cell has side `sqrt(2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellConfig {
    /// Users per cell, `n`.
    pub users: usize,
    /// Library size, `m`.
    pub files: usize,
    /// Collaboration distance (cluster side), `r`.
    pub r: f64,
    /// Request Zipf exponent, `gamma_r`.
    pub request_gamma: f64,
}

impl CellConfig {
    pub fn new(users: usize, files: usize, r: f64, request_gamma: f64) -> Result<Self> {
        let cfg = Self {
            users,
            files,
            r,
            request_gamma,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.users == 0 {
            return Err(Error::invalid("users", "need at least one user"));
        }
        if self.files == 0 {
            return Err(Error::invalid("files", "library size must be at least 1"));
        }
        validate_r(self.r)?;
        if !self.request_gamma.is_finite() || self.request_gamma < 0.0 {
            return Err(Error::invalid(
                "request_gamma",
                "must be finite and non-negative",
            ));
        }
        Ok(())
    }

    /// Same cell with a different collaboration distance.
    pub fn with_r(&self, r: f64) -> Self {
        Self { r, ..*self }
    }

    /// Fraction of the cell covered by one cluster, `r^2 / 2`.
    pub fn area_fraction(&self) -> f64 {
        (self.r * self.r / 2.0).min(1.0)
    }

    /// Analytic number of clusters, `2 / r^2` (not rounded).
    pub fn cluster_count(&self) -> f64 {
        2.0 / (self.r * self.r)
    }
}

pub(crate) fn validate_r(r: f64) -> Result<()> {
    if !(r.is_finite() && r > 0.0 && r <= CELL_SIDE * (1.0 + 1e-12)) {
        return Err(Error::invalid(
            "r",
            alloc::format!("collaboration distance must lie in (0, sqrt(2)], got {r}"),
        ));
    }
    Ok(())
}

/// Binomial pmf of the cluster occupancy `K ~ B(n, r^2/2)`, stored only over
/// the support where it is numerically non-negligible.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyPmf {
    users: usize,
    first: usize,
    probs: Vec<f64>,
}

/// Terms smaller than this fraction of the modal probability are dropped.
/// With at most `n + 1` of them the discarded mass stays below `1e-14` for
/// `n` up to `10^5`.
const RELATIVE_CUTOFF: f64 = 1e-20;

impl OccupancyPmf {
    /// `B(users, p)`, computed by the ratio recurrence outward from the mode
    /// so no intermediate value can overflow or underflow prematurely.
    pub fn binomial(users: usize, p: f64) -> Self {
        let n = users;
        if p <= 0.0 {
            return Self {
                users,
                first: 0,
                probs: alloc::vec![1.0],
            };
        }
        if p >= 1.0 {
            return Self {
                users,
                first: n,
                probs: alloc::vec![1.0],
            };
        }
        let odds = p / (1.0 - p);
        let mode = (libm::floor((n as f64 + 1.0) * p) as usize).min(n);

        let mut up = Vec::new();
        let mut w = 1.0;
        for k in mode..n {
            w *= (n - k) as f64 / (k + 1) as f64 * odds;
            if w < RELATIVE_CUTOFF {
                break;
            }
            up.push(w);
        }
        let mut down = Vec::new();
        let mut w = 1.0;
        for k in (1..=mode).rev() {
            w *= k as f64 / (n - k + 1) as f64 / odds;
            if w < RELATIVE_CUTOFF {
                break;
            }
            down.push(w);
        }

        let first = mode - down.len();
        let mut probs = Vec::with_capacity(down.len() + 1 + up.len());
        probs.extend(down.iter().rev());
        probs.push(1.0);
        probs.extend(up);
        let total = probs.iter().copied().collect::<CompensatedSum>().value();
        for q in &mut probs {
            *q /= total;
        }
        Self {
            users,
            first,
            probs,
        }
    }

    /// Occupancy law for one cluster of `cfg`.
    pub fn for_cell(cfg: &CellConfig) -> Self {
        Self::binomial(cfg.users, cfg.area_fraction())
    }

    pub fn users(&self) -> usize {
        self.users
    }

    /// `Pr[K = k]` (zero outside the stored support).
    pub fn prob(&self, k: usize) -> f64 {
        k.checked_sub(self.first)
            .and_then(|i| self.probs.get(i))
            .copied()
            .unwrap_or(0.0)
    }

    /// Smallest and largest `k` with a stored probability.
    pub fn support(&self) -> core::ops::RangeInclusive<usize> {
        self.first..=self.first + self.probs.len() - 1
    }

    /// `(k, Pr[K = k])` over the stored support, ascending in `k`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(move |(i, &p)| (self.first + i, p))
    }

    /// Dense vector of length `users + 1`.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.users + 1];
        for (k, p) in self.iter() {
            out[k] = p;
        }
        out
    }
}

/// `Pr[K = k]` for `k = 0..=n`: `C(n,k) (r^2/2)^k (1 - r^2/2)^(n-k)`.
pub fn cluster_occupancy_pmf(cfg: &CellConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    Ok(OccupancyPmf::for_cell(cfg).to_dense())
}
