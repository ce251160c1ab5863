//! Physical-layer simulator: power-law pathloss with log-normal shadowing,
//! one scheduled link per cluster chosen by an iterative best-response rule,
//! and sum rate `Σ log2(1 + SINR)` over the scheduled links.
//!
//! Scheduling starts from the strongest link of each cluster. Each later
//! round visits clusters in ascending index order and moves a cluster to the
//! potential link with the best SINR under the interference of the links
//! currently scheduled elsewhere. Rounds repeat until nothing changes.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::analytic_det::check_library;
use crate::cell::CellConfig;
use crate::exec::map_collect;
use crate::geo_sim::{
    CachingMode, ClusterGrid, ClusterRealization, Link, Placement, Point, UserDrop,
};
use crate::popularity::PopularityModel;
use crate::stream::{substream, Family};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub pathloss_exponent: f64,
    pub shadowing_sigma_db: f64,
    /// Common transmit power of every device (linear, arbitrary units).
    pub tx_power: f64,
    /// Receiver noise power (linear, same units as received power).
    pub noise_power: f64,
    /// Distances below this are clamped before applying the pathloss.
    pub min_distance: f64,
}

pub const DEFAULT_PATHLOSS_EXPONENT: f64 = 2.6;
pub const DEFAULT_SHADOWING_SIGMA_DB: f64 = 4.0;
pub const DEFAULT_MIN_DISTANCE: f64 = 1e-3;

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            pathloss_exponent: DEFAULT_PATHLOSS_EXPONENT,
            shadowing_sigma_db: DEFAULT_SHADOWING_SIGMA_DB,
            tx_power: 1.0,
            noise_power: 0.0,
            min_distance: DEFAULT_MIN_DISTANCE,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.pathloss_exponent.is_finite() && self.pathloss_exponent > 2.0) {
            return Err(Error::invalid("pathloss_exponent", "must exceed 2"));
        }
        if !(self.shadowing_sigma_db.is_finite() && self.shadowing_sigma_db >= 0.0) {
            return Err(Error::invalid("shadowing_sigma_db", "must be non-negative"));
        }
        if !(self.tx_power.is_finite() && self.tx_power > 0.0) {
            return Err(Error::invalid("tx_power", "must be positive"));
        }
        if !(self.noise_power.is_finite() && self.noise_power >= 0.0) {
            return Err(Error::invalid("noise_power", "must be non-negative"));
        }
        if !(self.min_distance.is_finite() && self.min_distance > 0.0) {
            return Err(Error::invalid("min_distance", "must be positive"));
        }
        Ok(())
    }

    /// Noise power giving `snr_db` to an unshadowed link of length `distance`.
    pub fn noise_for_reference_snr(&self, snr_db: f64, distance: f64) -> f64 {
        self.tx_power * pathloss(distance, self) / db_to_linear(snr_db)
    }
}

/// Noise floor, either fixed or tied to a reference link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseFloor {
    Absolute(f64),
    /// `snr_db` at `distance`; `None` means half the collaboration distance
    /// of each sweep point, so the floor scales with the cluster size.
    ReferenceSnr {
        snr_db: f64,
        distance: Option<f64>,
    },
}

impl NoiseFloor {
    pub fn resolve(&self, channel: &ChannelParams, r: f64) -> f64 {
        match *self {
            NoiseFloor::Absolute(p) => p,
            NoiseFloor::ReferenceSnr { snr_db, distance } => {
                channel.noise_for_reference_snr(snr_db, distance.unwrap_or(r / 2.0))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseFloor::Absolute(p) if !(p.is_finite() && p >= 0.0) => {
                Err(Error::invalid("noise_power", "must be non-negative"))
            }
            NoiseFloor::ReferenceSnr { snr_db, .. } if !snr_db.is_finite() => {
                Err(Error::invalid("reference_snr_db", "must be finite"))
            }
            NoiseFloor::ReferenceSnr {
                distance: Some(d), ..
            } if !(d.is_finite() && d > 0.0) => {
                Err(Error::invalid("reference_distance", "must be positive"))
            }
            _ => Ok(()),
        }
    }
}

#[inline]
fn db_to_linear(db: f64) -> f64 {
    libm::exp(db * core::f64::consts::LN_10 / 10.0)
}

#[inline]
fn pathloss(distance: f64, channel: &ChannelParams) -> f64 {
    libm::pow(
        distance.max(channel.min_distance),
        -channel.pathloss_exponent,
    )
}

/// Linear channel gain `max(d, d_min)^-alpha * 10^(shadow_db / 10)`.
pub fn gain(tx: &Point, rx: &Point, shadow_db: f64, channel: &ChannelParams) -> f64 {
    pathloss(tx.distance(rx), channel) * db_to_linear(shadow_db)
}

/// Shadowing in dB for every ordered (tx, rx) pair, drawn once per snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowField {
    users: usize,
    db: Vec<f64>,
}

impl ShadowField {
    /// No shadowing.
    pub fn none(users: usize) -> Self {
        Self {
            users,
            db: Vec::new(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(users: usize, sigma_db: f64, rng: &mut R) -> Self {
        if sigma_db == 0.0 {
            return Self::none(users);
        }
        let normal = Normal::new(0.0, sigma_db).expect("sigma validated");
        Self {
            users,
            db: (0..users * users).map(|_| normal.sample(rng)).collect(),
        }
    }

    #[inline]
    pub fn db(&self, tx: usize, rx: usize) -> f64 {
        if self.db.is_empty() {
            0.0
        } else {
            self.db[tx * self.users + rx]
        }
    }
}

/// Order in which clusters revise their link within a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateOrder {
    /// Clusters switch one after another in ascending index; later clusters
    /// see earlier switches of the same round.
    #[default]
    Sequential,
    /// Every cluster responds to the schedule at the start of the round.
    Simultaneous,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulerConfig {
    pub max_iterations: usize,
    /// A switch needs `sinr_new > sinr_current * (1 + switch_tolerance)`.
    pub switch_tolerance: f64,
    pub order: UpdateOrder,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            switch_tolerance: 1e-6,
            order: UpdateOrder::Sequential,
        }
    }
}

/// Received power `tx_power * gain` for every ordered user pair of one
/// snapshot. It does not depend on `r`, so one matrix serves a whole sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMatrix {
    users: usize,
    power: Vec<f64>,
}

impl GainMatrix {
    pub fn new(positions: &[Point], shadow: &ShadowField, channel: &ChannelParams) -> Self {
        let users = positions.len();
        let mut power = Vec::with_capacity(users * users);
        for (tx, a) in positions.iter().enumerate() {
            for (rx, b) in positions.iter().enumerate() {
                power.push(channel.tx_power * gain(a, b, shadow.db(tx, rx), channel));
            }
        }
        Self { users, power }
    }

    #[inline]
    pub fn received(&self, tx: usize, rx: usize) -> f64 {
        self.power[tx * self.users + rx]
    }
}

/// Scheduling input: received powers and the potential links of each
/// cluster, already sorted into a stable order.
#[derive(Debug, Clone, Copy)]
pub struct LinkSet<'a> {
    pub gains: &'a GainMatrix,
    pub candidates: &'a [Vec<Link>],
}

impl LinkSet<'_> {
    fn interference_at(&self, rx: usize, cluster: usize, choice: &[Option<usize>]) -> f64 {
        choice
            .iter()
            .enumerate()
            .filter(|&(c, _)| c != cluster)
            .filter_map(|(c, sel)| sel.map(|i| self.candidates[c][i].tx))
            .map(|tx| self.gains.received(tx, rx))
            .sum()
    }

    /// SINR of candidate `i` of `cluster` against the other clusters' picks.
    fn sinr(
        &self,
        cluster: usize,
        i: usize,
        choice: &[Option<usize>],
        channel: &ChannelParams,
    ) -> f64 {
        let link = self.candidates[cluster][i];
        let signal = self.gains.received(link.tx, link.rx);
        signal / (self.interference_at(link.rx, cluster, choice) + channel.noise_power)
    }

    /// Materializes a per-cluster choice into scheduled links with rates.
    pub fn evaluate(
        &self,
        choice: &[Option<usize>],
        channel: &ChannelParams,
    ) -> Vec<ScheduledLink> {
        choice
            .iter()
            .enumerate()
            .filter_map(|(c, sel)| sel.map(|i| (c, i)))
            .map(|(c, i)| {
                let link = self.candidates[c][i];
                let received_power = self.gains.received(link.tx, link.rx);
                let interference = self.interference_at(link.rx, c, choice);
                let sinr = received_power / (interference + channel.noise_power);
                ScheduledLink {
                    cluster: c,
                    tx: link.tx,
                    rx: link.rx,
                    received_power,
                    interference,
                    sinr,
                    rate: libm::log2(1.0 + sinr),
                }
            })
            .collect()
    }

    pub fn sum_rate(&self, choice: &[Option<usize>], channel: &ChannelParams) -> f64 {
        self.evaluate(choice, channel).iter().map(|l| l.rate).sum()
    }

    /// Strongest candidate of every cluster (ties to the earlier candidate).
    fn strongest(&self) -> Vec<Option<usize>> {
        self.candidates
            .iter()
            .map(|links| {
                let mut best: Option<(usize, f64)> = None;
                for (i, l) in links.iter().enumerate() {
                    let p = self.gains.received(l.tx, l.rx);
                    if best.map_or(true, |(_, bp)| p > bp) {
                        best = Some((i, p));
                    }
                }
                best.map(|(i, _)| i)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduledLink {
    pub cluster: usize,
    pub tx: usize,
    pub rx: usize,
    pub received_power: f64,
    /// Power received from scheduled transmitters of all other clusters.
    pub interference: f64,
    pub sinr: f64,
    /// `log2(1 + sinr)`, bits/s/Hz.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhyLinkSchedule {
    /// Candidate index chosen in each cluster (`None` for clusters without
    /// potential links).
    pub choice: Vec<Option<usize>>,
    pub links: Vec<ScheduledLink>,
    pub sum_rate: f64,
    /// Rounds in which at least one cluster switched.
    pub iterations_to_converge: usize,
    /// `false` when `max_iterations` ran out; the schedule is then the best
    /// (by sum rate) seen along the way.
    pub converged: bool,
}

/// Runs the iterative scheduler on `set`.
pub fn schedule(
    set: &LinkSet<'_>,
    channel: &ChannelParams,
    cfg: &SchedulerConfig,
) -> PhyLinkSchedule {
    let initial = set.strongest();
    let mut choice = initial.clone();
    let mut best_choice = choice.clone();
    let mut best_rate = set.sum_rate(&choice, channel);
    let mut iterations = 0;
    let mut converged = false;

    for _ in 0..cfg.max_iterations {
        let snapshot = choice.clone();
        let mut changed = false;
        for c in 0..set.candidates.len() {
            let Some(current) = choice[c] else { continue };
            if set.candidates[c].len() < 2 {
                continue;
            }
            let view = match cfg.order {
                UpdateOrder::Sequential => &choice,
                UpdateOrder::Simultaneous => &snapshot,
            };
            let current_sinr = set.sinr(c, current, view, channel);
            // Start from the round-0 pick so exact ties favour it.
            let anchor = initial[c].expect("cluster has candidates");
            let mut best = (anchor, set.sinr(c, anchor, view, channel));
            for i in 0..set.candidates[c].len() {
                let s = set.sinr(c, i, view, channel);
                if s > best.1 {
                    best = (i, s);
                }
            }
            if best.0 != current && best.1 > current_sinr * (1.0 + cfg.switch_tolerance) {
                debug_assert!(best.1 >= current_sinr);
                choice[c] = Some(best.0);
                changed = true;
            }
        }
        if !changed {
            converged = true;
            break;
        }
        iterations += 1;
        let rate = set.sum_rate(&choice, channel);
        if rate > best_rate {
            best_rate = rate;
            best_choice = choice.clone();
        }
    }

    let final_choice = if converged { choice } else { best_choice };
    let links = set.evaluate(&final_choice, channel);
    let sum_rate = links.iter().map(|l| l.rate).sum();
    PhyLinkSchedule {
        choice: final_choice,
        links,
        sum_rate,
        iterations_to_converge: iterations,
        converged,
    }
}

/// Best sum rate over every combination of one candidate per cluster.
/// Exponential; meant for small verification instances.
pub fn exhaustive_best(set: &LinkSet<'_>, channel: &ChannelParams) -> (Vec<Option<usize>>, f64) {
    let mut choice: Vec<Option<usize>> = set
        .candidates
        .iter()
        .map(|l| (!l.is_empty()).then_some(0))
        .collect();
    let mut best = (choice.clone(), set.sum_rate(&choice, channel));
    loop {
        let mut c = 0;
        loop {
            if c == choice.len() {
                return best;
            }
            if let Some(i) = choice[c] {
                if i + 1 < set.candidates[c].len() {
                    choice[c] = Some(i + 1);
                    break;
                }
                choice[c] = Some(0);
            }
            c += 1;
        }
        let rate = set.sum_rate(&choice, channel);
        if rate > best.1 {
            best = (choice.clone(), rate);
        }
    }
}

/// Schedules one realization, drawing its shadowing from `seed`.
pub fn schedule_links(
    real: &ClusterRealization,
    channel: &ChannelParams,
    seed: u64,
    cfg: &SchedulerConfig,
) -> Result<PhyLinkSchedule> {
    channel.validate()?;
    let mut rng = substream(seed, Family::PhyTrials, u64::MAX);
    let shadow = ShadowField::sample(real.positions.len(), channel.shadowing_sigma_db, &mut rng);
    let gains = GainMatrix::new(&real.positions, &shadow, channel);
    let candidates = real.potential_links();
    let set = LinkSet {
        gains: &gains,
        candidates: &candidates,
    };
    Ok(schedule(&set, channel, cfg))
}

/// Mean total rate at one collaboration distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub r: f64,
    pub mean_rate: f64,
    pub std_error: f64,
    pub mean_links: f64,
    pub nonconverged_fraction: f64,
    pub noise_power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateSweep {
    pub points: Vec<RatePoint>,
    /// `r` with the highest mean rate (ties to the smaller `r`).
    pub r_opt: f64,
}

/// Mean total rate versus `r`. Each trial's drop and shadowing are shared by
/// every grid point, so the curve compares distances on common snapshots.
#[allow(clippy::too_many_arguments)]
pub fn rate_vs_r_sweep(
    cfg: &CellConfig,
    pop_req: &PopularityModel,
    mode: CachingMode,
    channel: &ChannelParams,
    noise: NoiseFloor,
    r_values: &[f64],
    trials: usize,
    seed: u64,
    sched: &SchedulerConfig,
) -> Result<RateSweep> {
    cfg.validate()?;
    check_library(cfg, pop_req)?;
    channel.validate()?;
    noise.validate()?;
    if trials == 0 {
        return Err(Error::invalid("trials", "need at least one trial"));
    }
    if r_values.is_empty() {
        return Err(Error::invalid("r_values", "empty grid"));
    }
    let grids = r_values
        .iter()
        .map(|&r| ClusterGrid::new(r))
        .collect::<Result<Vec<_>>>()?;
    let channels: Vec<ChannelParams> = r_values
        .iter()
        .map(|&r| ChannelParams {
            noise_power: noise.resolve(channel, r),
            ..*channel
        })
        .collect();
    let placement = Placement::new(mode, cfg.files)?;

    let trial_ids: Vec<u64> = (0..trials as u64).collect();
    // per trial: (rate, links, converged) for each grid point
    let per_trial = map_collect(&trial_ids, |&t| {
        let mut rng = substream(seed, Family::PhyTrials, t);
        let drop = UserDrop::sample(cfg.users, pop_req, &placement, &mut rng);
        let shadow = ShadowField::sample(cfg.users, channel.shadowing_sigma_db, &mut rng);
        let gains = GainMatrix::new(&drop.positions, &shadow, channel);
        grids
            .iter()
            .zip(&channels)
            .map(|(grid, ch)| {
                let real = ClusterRealization::from_drop(&drop, *grid, cfg.files, &placement);
                let candidates = real.potential_links();
                let set = LinkSet {
                    gains: &gains,
                    candidates: &candidates,
                };
                let s = schedule(&set, ch, sched);
                (s.sum_rate, s.links.len(), s.converged)
            })
            .collect::<Vec<_>>()
    });

    let n = trials as f64;
    let points: Vec<RatePoint> = r_values
        .iter()
        .enumerate()
        .map(|(j, &r)| {
            let (mut sum, mut sum_sq, mut links, mut failed) = (0.0, 0.0, 0usize, 0usize);
            for trial in &per_trial {
                let (rate, l, ok) = trial[j];
                sum += rate;
                sum_sq += rate * rate;
                links += l;
                failed += usize::from(!ok);
            }
            let mean = sum / n;
            let var = if trials > 1 {
                ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
            } else {
                0.0
            };
            RatePoint {
                r,
                mean_rate: mean,
                std_error: libm::sqrt(var / n),
                mean_links: links as f64 / n,
                nonconverged_fraction: failed as f64 / n,
                noise_power: channels[j].noise_power,
            }
        })
        .collect();
    let mut best = 0;
    for (j, p) in points.iter().enumerate() {
        if p.mean_rate > points[best].mean_rate {
            best = j;
        }
    }
    Ok(RateSweep {
        r_opt: points[best].r,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_channel(noise: f64) -> ChannelParams {
        ChannelParams {
            shadowing_sigma_db: 0.0,
            noise_power: noise,
            ..ChannelParams::default()
        }
    }

    #[test]
    fn unit_distance_unit_gain() {
        let ch = flat_channel(0.0);
        let a = Point { x: 0.0, y: 0.0 };
        let b = Point { x: 1.0, y: 0.0 };
        let c = Point { x: 2.0, y: 0.0 };
        assert!((gain(&a, &b, 0.0, &ch) - 1.0).abs() < 1e-15);
        let ratio = gain(&a, &c, 0.0, &ch) / gain(&a, &b, 0.0, &ch);
        assert!((ratio - 2f64.powf(-2.6)).abs() < 1e-15);
        assert!((gain(&a, &b, 10.0, &ch) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn co_located_users_are_regularized() {
        let ch = flat_channel(0.0);
        let a = Point { x: 0.3, y: 0.3 };
        assert!((gain(&a, &a, 0.0, &ch) - 1e-3f64.powf(-2.6)).abs() / 1e-3f64.powf(-2.6) < 1e-12);
    }

    #[test]
    fn shadowing_has_requested_spread() {
        let mut rng = substream(5, Family::PhyTrials, 0);
        let field = ShadowField::sample(1000, 4.0, &mut rng);
        let n = 1_000_000.0;
        let mean: f64 = field.db.iter().sum::<f64>() / n;
        let var: f64 = field.db.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var.sqrt() - 4.0).abs() / 4.0 < 0.01);
    }

    #[test]
    fn reference_snr_noise() {
        let ch = flat_channel(0.0);
        let noise = ch.noise_for_reference_snr(30.0, 0.1);
        let snr = ch.tx_power
            * gain(
                &Point { x: 0.0, y: 0.0 },
                &Point { x: 0.1, y: 0.0 },
                0.0,
                &ch,
            )
            / noise;
        assert!((snr - 1000.0).abs() < 1e-9);
        let floor = NoiseFloor::ReferenceSnr {
            snr_db: 30.0,
            distance: None,
        };
        assert!((floor.resolve(&ch, 0.2) - noise).abs() < 1e-12 * noise);
    }

    #[test]
    fn isolated_link_rate() {
        let ch = flat_channel(0.01);
        let positions = [Point { x: 0.0, y: 0.0 }, Point { x: 0.5, y: 0.0 }];
        let candidates = alloc::vec![alloc::vec![Link { tx: 0, rx: 1 }]];
        let shadow = ShadowField::none(2);
        let gains = GainMatrix::new(&positions, &shadow, &ch);
        let set = LinkSet {
            gains: &gains,
            candidates: &candidates,
        };
        let s = schedule(&set, &ch, &SchedulerConfig::default());
        assert!(s.converged);
        assert_eq!(s.iterations_to_converge, 0);
        let want = (1.0 + 0.5f64.powf(-2.6) / 0.01).log2();
        assert!((s.sum_rate - want).abs() < 1e-12);
        assert_eq!(s.links[0].interference, 0.0);
    }

    #[test]
    fn single_candidates_fix_immediately() {
        let ch = flat_channel(1e-3);
        let positions = [
            Point { x: 0.0, y: 0.0 },
            Point { x: 0.1, y: 0.0 },
            Point { x: 1.0, y: 1.0 },
            Point { x: 1.1, y: 1.0 },
        ];
        let candidates = alloc::vec![
            alloc::vec![Link { tx: 0, rx: 1 }],
            alloc::vec![Link { tx: 2, rx: 3 }],
        ];
        let shadow = ShadowField::none(4);
        let gains = GainMatrix::new(&positions, &shadow, &ch);
        let set = LinkSet {
            gains: &gains,
            candidates: &candidates,
        };
        let s = schedule(&set, &ch, &SchedulerConfig::default());
        assert!(s.converged);
        assert_eq!(s.iterations_to_converge, 0);
        assert_eq!(s.links.len(), 2);
        assert!(s.links.iter().all(|l| l.interference > 0.0));
    }

    /// Cluster A (x < 1) has a strong link whose receiver sits next to
    /// cluster B's transmitter, and a weaker link far from it.
    fn crafted() -> ([Point; 6], Vec<Vec<Link>>) {
        let positions = [
            Point { x: 0.50, y: 0.50 }, // 0: A tx, strong link
            Point { x: 0.90, y: 0.50 }, // 1: A rx, close to B's tx
            Point { x: 0.10, y: 0.50 }, // 2: A tx, weak link
            Point { x: 0.05, y: 0.95 }, // 3: A rx, far from B
            Point { x: 1.00, y: 0.50 }, // 4: B tx
            Point { x: 1.30, y: 0.50 }, // 5: B rx
        ];
        let candidates = alloc::vec![
            alloc::vec![Link { tx: 0, rx: 1 }, Link { tx: 2, rx: 3 }],
            alloc::vec![Link { tx: 4, rx: 5 }],
        ];
        (positions, candidates)
    }

    #[test]
    fn crafted_instance_switches_to_the_quiet_link() {
        let ch = flat_channel(1e-4);
        let (positions, candidates) = crafted();
        let shadow = ShadowField::none(6);
        let gains = GainMatrix::new(&positions, &shadow, &ch);
        let set = LinkSet {
            gains: &gains,
            candidates: &candidates,
        };
        let round0 = set.strongest();
        assert_eq!(round0, [Some(0), Some(0)]);
        let s = schedule(&set, &ch, &SchedulerConfig::default());
        assert!(s.converged);
        assert_eq!(s.choice, [Some(1), Some(0)]);
        assert!(s.sum_rate > set.sum_rate(&round0, &ch));
        // exhaustive over the 2 x 1 combinations agrees
        let (best, rate) = exhaustive_best(&set, &ch);
        assert_eq!(best, s.choice);
        assert!((rate - s.sum_rate).abs() < 1e-12);
    }

    #[test]
    fn scheduled_links_are_potential_links() {
        let pop = PopularityModel::zipf(50, 1.0).unwrap();
        let grid = ClusterGrid::new(0.3).unwrap();
        let placement = Placement::Deterministic;
        let ch = ChannelParams {
            noise_power: 1e-3,
            ..ChannelParams::default()
        };
        let mut rng = substream(3, Family::PhyTrials, 0);
        for t in 0..30 {
            let real = ClusterRealization::sample(150, grid, &pop, &placement, &mut rng);
            let a = schedule_links(&real, &ch, t, &SchedulerConfig::default()).unwrap();
            let b = schedule_links(&real, &ch, t, &SchedulerConfig::default()).unwrap();
            assert_eq!(a, b);
            let candidates = real.potential_links();
            let mut seen = alloc::vec![false; candidates.len()];
            for l in &a.links {
                assert!(!seen[l.cluster]);
                seen[l.cluster] = true;
                assert!(candidates[l.cluster].contains(&Link { tx: l.tx, rx: l.rx }));
                assert!(l.rate >= 0.0 && l.rate.is_finite());
            }
            let active = candidates.iter().filter(|c| !c.is_empty()).count();
            assert_eq!(a.links.len(), active);
        }
    }

    #[test]
    fn sweep_reports_every_grid_point() {
        let pop = PopularityModel::zipf(100, 1.0).unwrap();
        let cfg = CellConfig::new(80, 100, 0.3, 1.0).unwrap();
        let ch = ChannelParams::default();
        let rs = [0.1, 0.2, 0.3, 0.4];
        let noise = NoiseFloor::ReferenceSnr {
            snr_db: 30.0,
            distance: None,
        };
        let a = rate_vs_r_sweep(
            &cfg,
            &pop,
            CachingMode::Deterministic,
            &ch,
            noise,
            &rs,
            20,
            1,
            &SchedulerConfig::default(),
        )
        .unwrap();
        assert_eq!(a.points.len(), 4);
        assert!(a
            .points
            .iter()
            .all(|p| p.mean_rate.is_finite() && p.mean_rate >= 0.0));
        let b = rate_vs_r_sweep(
            &cfg,
            &pop,
            CachingMode::Deterministic,
            &ch,
            noise,
            &rs,
            20,
            1,
            &SchedulerConfig::default(),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_channel_rejected() {
        let bad = ChannelParams {
            pathloss_exponent: 2.0,
            ..ChannelParams::default()
        };
        assert_eq!(
            bad.validate().unwrap_err().field(),
            Some("pathloss_exponent")
        );
        let bad = ChannelParams {
            tx_power: 0.0,
            ..ChannelParams::default()
        };
        assert_eq!(bad.validate().unwrap_err().field(), Some("tx_power"));
    }
}
