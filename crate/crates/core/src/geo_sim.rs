//! Protocol-model geometric simulator.
//!
//! Users are dropped uniformly in a square cell of side `sqrt(2)`, which is
//! tiled by `floor(sqrt(2)/r)^2` square clusters of side `r`. Any strip left
//! over along two edges belongs to no cluster; its users are served by the
//! base station. Each trial assigns caches, draws requests and counts the
//! clusters holding at least one potential link.

use alloc::vec::Vec;

use rand::Rng;

use crate::analytic_det::check_library;
use crate::cell::{validate_r, CellConfig};
use crate::exec::map_collect;
use crate::popularity::PopularityModel;
use crate::stream::{substream, Family};
use crate::{Error, Result, CELL_SIDE};

/// Trials sharing one random substream. Fixed so results do not depend on
/// how work is spread over threads.
const TRIALS_PER_BATCH: usize = 256;

/// How users fill their single-file caches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CachingMode {
    /// The `k` users of a cluster cache ranks `1..=k`, one each, in user order.
    Deterministic,
    /// Each user caches a rank drawn from Zipf(`caching_gamma`).
    Random { caching_gamma: f64 },
    /// Everyone caches rank 1.
    MostPopular,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn distance(&self, other: &Point) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }
}

/// Square tiling of the cell by clusters of side `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterGrid {
    r: f64,
    per_side: usize,
}

impl ClusterGrid {
    pub fn new(r: f64) -> Result<Self> {
        validate_r(r)?;
        let per_side = (libm::floor(CELL_SIDE / r * (1.0 + 1e-12)) as usize).max(1);
        Ok(Self { r, per_side })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn per_side(&self) -> usize {
        self.per_side
    }

    /// Number of full clusters in the cell.
    pub fn clusters(&self) -> usize {
        self.per_side * self.per_side
    }

    /// Cluster holding `p`, or `None` for the uncovered edge strip.
    pub fn cluster_of(&self, p: &Point) -> Option<usize> {
        let ix = libm::floor(p.x / self.r);
        let iy = libm::floor(p.y / self.r);
        if ix < 0.0 || iy < 0.0 {
            return None;
        }
        let (ix, iy) = (ix as usize, iy as usize);
        (ix < self.per_side && iy < self.per_side).then(|| iy * self.per_side + ix)
    }
}

/// A potential D2D link: `rx` requests the file `tx` caches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Link {
    pub tx: usize,
    pub rx: usize,
}

/// One sampled snapshot of the cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRealization {
    pub grid: ClusterGrid,
    pub positions: Vec<Point>,
    pub cluster_index: Vec<Option<usize>>,
    /// Cached rank per user; `None` for uncovered users under deterministic
    /// caching, which has no cluster to place files in.
    pub caches: Vec<Option<usize>>,
    pub requests: Vec<usize>,
}

/// Counts from one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrialOutcome {
    /// Clusters with at least one potential link (one credit each).
    pub active_clusters: usize,
    /// Users whose request equals their own cached file, anywhere in the cell.
    pub self_requests: usize,
    /// Self-requests by users inside the cluster grid.
    pub clustered_self_requests: usize,
    /// Ordered (tx, rx) pairs that could carry a D2D transfer.
    pub potential_links: usize,
    pub nonempty_clusters: usize,
}

/// Caching mode with its sampling table resolved.
#[derive(Debug, Clone)]
pub enum Placement {
    Deterministic,
    Random(PopularityModel),
    MostPopular,
}

impl Placement {
    pub fn new(mode: CachingMode, files: usize) -> Result<Self> {
        Ok(match mode {
            CachingMode::Deterministic => Placement::Deterministic,
            CachingMode::Random { caching_gamma } => {
                if !caching_gamma.is_finite() || caching_gamma < 0.0 {
                    return Err(Error::invalid(
                        "caching_gamma",
                        "must be finite and non-negative",
                    ));
                }
                Placement::Random(PopularityModel::zipf(files, caching_gamma)?)
            }
            CachingMode::MostPopular => Placement::MostPopular,
        })
    }
}

/// Everything about a snapshot that does not depend on `r`: positions,
/// requests and (random mode) cache draws.
#[derive(Debug, Clone, PartialEq)]
pub struct UserDrop {
    pub positions: Vec<Point>,
    pub requests: Vec<usize>,
    pub random_caches: Option<Vec<usize>>,
}

impl UserDrop {
    /// Draws positions, then requests, then (random mode only) caches. The
    /// number of variates consumed never depends on `r`.
    pub fn sample<R: Rng + ?Sized>(
        users: usize,
        pop_req: &PopularityModel,
        placement: &Placement,
        rng: &mut R,
    ) -> Self {
        let positions = (0..users)
            .map(|_| Point {
                x: rng.random::<f64>() * CELL_SIDE,
                y: rng.random::<f64>() * CELL_SIDE,
            })
            .collect();
        let requests = (0..users).map(|_| pop_req.sample_rank(rng)).collect();
        let random_caches = match placement {
            Placement::Random(caching) => {
                Some((0..users).map(|_| caching.sample_rank(rng)).collect())
            }
            _ => None,
        };
        Self {
            positions,
            requests,
            random_caches,
        }
    }
}

impl ClusterRealization {
    /// Samples a fresh drop and clusters it on `grid`.
    pub fn sample<R: Rng + ?Sized>(
        users: usize,
        grid: ClusterGrid,
        pop_req: &PopularityModel,
        placement: &Placement,
        rng: &mut R,
    ) -> Self {
        let drop = UserDrop::sample(users, pop_req, placement, rng);
        Self::from_drop(&drop, grid, pop_req.files(), placement)
    }

    /// Clusters an existing drop on `grid` and fills caches per `placement`.
    pub fn from_drop(
        drop: &UserDrop,
        grid: ClusterGrid,
        files: usize,
        placement: &Placement,
    ) -> Self {
        let users = drop.positions.len();
        let cluster_index: Vec<Option<usize>> =
            drop.positions.iter().map(|p| grid.cluster_of(p)).collect();
        let caches = match (placement, &drop.random_caches) {
            (Placement::Random(_), Some(c)) => c.iter().map(|&h| Some(h)).collect(),
            (Placement::Random(_), None) => panic!("drop was sampled without random caches"),
            (Placement::MostPopular, _) => alloc::vec![Some(1); users],
            (Placement::Deterministic, _) => {
                let mut filled = alloc::vec![0usize; grid.clusters()];
                cluster_index
                    .iter()
                    .map(|c| {
                        c.map(|c| {
                            filled[c] += 1;
                            (filled[c] - 1) % files + 1
                        })
                    })
                    .collect()
            }
        };
        Self {
            grid,
            positions: drop.positions.clone(),
            cluster_index,
            caches,
            requests: drop.requests.clone(),
        }
    }

    /// User indices of each cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut members = alloc::vec![Vec::new(); self.grid.clusters()];
        for (u, c) in self.cluster_index.iter().enumerate() {
            if let Some(c) = c {
                members[*c].push(u);
            }
        }
        members
    }

    pub fn is_self_request(&self, user: usize) -> bool {
        self.caches[user] == Some(self.requests[user])
    }

    /// Potential links of each cluster, sorted by `(rx, tx)`. Self-requests
    /// create no link even when a neighbour holds the same file.
    pub fn potential_links(&self) -> Vec<Vec<Link>> {
        let mut holders: Vec<(usize, usize)> = Vec::new();
        self.members()
            .iter()
            .map(|users| {
                holders.clear();
                holders.extend(users.iter().filter_map(|&u| self.caches[u].map(|f| (f, u))));
                holders.sort_unstable();
                let mut links = Vec::new();
                for &rx in users {
                    if self.is_self_request(rx) {
                        continue;
                    }
                    let want = self.requests[rx];
                    let start = holders.partition_point(|&(f, _)| f < want);
                    for &(f, tx) in &holders[start..] {
                        if f != want {
                            break;
                        }
                        links.push(Link { tx, rx });
                    }
                }
                links
            })
            .collect()
    }

    pub fn outcome(&self) -> TrialOutcome {
        let links = self.potential_links();
        let members = self.members();
        let self_requests = (0..self.requests.len())
            .filter(|&u| self.is_self_request(u))
            .count();
        let clustered_self_requests = (0..self.requests.len())
            .filter(|&u| self.cluster_index[u].is_some() && self.is_self_request(u))
            .count();
        TrialOutcome {
            active_clusters: links.iter().filter(|l| !l.is_empty()).count(),
            self_requests,
            clustered_self_requests,
            potential_links: links.iter().map(Vec::len).sum(),
            nonempty_clusters: members.iter().filter(|m| !m.is_empty()).count(),
        }
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeanSe {
    pub mean: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    sum: u64,
    sum_sq: u64,
}

impl Moments {
    fn push(&mut self, x: usize) {
        let x = x as u64;
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn merge(&mut self, other: &Moments) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    fn summary(&self) -> MeanSe {
        let n = self.n as f64;
        let mean = self.sum as f64 / n;
        let var = if self.n > 1 {
            ((self.sum_sq as f64 - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        MeanSe {
            mean,
            std_error: libm::sqrt(var / n),
        }
    }
}

/// Aggregated simulator output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoSummary {
    pub trials: usize,
    pub r: f64,
    /// Full clusters in the simulated grid, `floor(sqrt(2)/r)^2`.
    pub grid_clusters: usize,
    pub active: MeanSe,
    pub self_requests: MeanSe,
    pub clustered_self_requests: MeanSe,
    pub potential_links: MeanSe,
}

impl GeoSummary {
    /// Per-cluster activity probability implied by the simulation.
    pub fn active_prob(&self) -> MeanSe {
        let c = self.grid_clusters as f64;
        MeanSe {
            mean: self.active.mean / c,
            std_error: self.active.std_error / c,
        }
    }
}

/// Runs `trials` independent snapshots and aggregates their counts.
pub fn run_trials(
    cfg: &CellConfig,
    pop_req: &PopularityModel,
    mode: CachingMode,
    trials: usize,
    seed: u64,
) -> Result<GeoSummary> {
    cfg.validate()?;
    check_library(cfg, pop_req)?;
    if trials == 0 {
        return Err(Error::invalid("trials", "need at least one trial"));
    }
    let grid = ClusterGrid::new(cfg.r)?;
    let placement = Placement::new(mode, cfg.files)?;
    let batches: Vec<usize> = (0..trials.div_ceil(TRIALS_PER_BATCH)).collect();
    let partial = map_collect(&batches, |&b| {
        let mut rng = substream(seed, Family::GeoTrials, b as u64);
        let count = TRIALS_PER_BATCH.min(trials - b * TRIALS_PER_BATCH);
        let mut m = [Moments::default(); 4];
        for _ in 0..count {
            let real = ClusterRealization::sample(cfg.users, grid, pop_req, &placement, &mut rng);
            if matches!(placement, Placement::Deterministic) {
                debug_assert!(deterministic_rule_holds(&real));
            }
            let o = real.outcome();
            m[0].push(o.active_clusters);
            m[1].push(o.self_requests);
            m[2].push(o.clustered_self_requests);
            m[3].push(o.potential_links);
        }
        m
    });
    let mut total = [Moments::default(); 4];
    for m in &partial {
        for (t, x) in total.iter_mut().zip(m) {
            t.merge(x);
        }
    }
    Ok(GeoSummary {
        trials,
        r: cfg.r,
        grid_clusters: grid.clusters(),
        active: total[0].summary(),
        self_requests: total[1].summary(),
        clustered_self_requests: total[2].summary(),
        potential_links: total[3].summary(),
    })
}

/// Every cluster of `k <= m` users caches exactly ranks `1..=k`.
pub fn deterministic_rule_holds(real: &ClusterRealization) -> bool {
    let m = real
        .requests
        .iter()
        .copied()
        .chain(real.caches.iter().flatten().copied())
        .max()
        .unwrap_or(1);
    real.members().iter().all(|users| {
        let mut ranks: Vec<usize> = users.iter().filter_map(|&u| real.caches[u]).collect();
        if ranks.len() != users.len() {
            return false;
        }
        ranks.sort_unstable();
        users.len() > m || ranks.iter().enumerate().all(|(i, &h)| h == i + 1)
    })
}
