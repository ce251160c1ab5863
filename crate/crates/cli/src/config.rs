//! Experiment configuration: a TOML file with one table per module, plus
//! `section.key=value` overrides applied on top.

use std::path::Path;

use d2dcache_core::analytic_det::DelayWeights;
use d2dcache_core::geo_sim::CachingMode;
use d2dcache_core::optimize::{linspace, LibraryRule, SweepGrid};
use d2dcache_core::phy_sim::{ChannelParams, NoiseFloor, SchedulerConfig, UpdateOrder};
use d2dcache_core::{CellConfig, PopularityModel, RandCachingParams, RandVariant};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Required by every command that draws random numbers.
    pub seed: Option<u64>,
    pub cell: CellSection,
    pub grid: GridSection,
    pub random: RandomSection,
    pub geo: GeoSection,
    pub phy: PhySection,
    pub delay: DelaySection,
    pub asymptotics: AsymptoticsSection,
    pub figure: FigureSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CellSection {
    pub users: usize,
    pub files: usize,
    pub request_gamma: f64,
}

impl Default for CellSection {
    fn default() -> Self {
        Self {
            users: 500,
            files: 1000,
            request_gamma: 0.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// Explicit `r` grid; when absent, `r_points` values from `r_min` to `r_max`.
    pub r_values: Option<Vec<f64>>,
    pub r_min: f64,
    pub r_max: f64,
    pub r_points: usize,
    pub gamma_c_values: Option<Vec<f64>>,
    pub gamma_c_min: f64,
    pub gamma_c_max: f64,
    pub gamma_c_points: usize,
    pub refinement_levels: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            r_values: None,
            r_min: 0.05,
            r_max: 1.0,
            r_points: 30,
            gamma_c_values: None,
            gamma_c_min: 0.0,
            gamma_c_max: 3.0,
            gamma_c_points: 13,
            refinement_levels: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RandMethod {
    Mc,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantName {
    Conditional,
    Marginal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomSection {
    pub caching_gamma: f64,
    pub mc_samples: usize,
    pub method: RandMethod,
    pub variant: VariantName,
}

impl Default for RandomSection {
    fn default() -> Self {
        Self {
            caching_gamma: 1.5,
            mc_samples: 10_000,
            method: RandMethod::Mc,
            variant: VariantName::Conditional,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CachingName {
    Deterministic,
    Random,
    MostPopular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeoSection {
    pub trials: usize,
    /// `random` uses `random.caching_gamma`.
    pub caching: CachingName,
}

impl Default for GeoSection {
    fn default() -> Self {
        Self {
            trials: 10_000,
            caching: CachingName::Deterministic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderName {
    Sequential,
    Simultaneous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhySection {
    pub pathloss_exponent: f64,
    pub shadowing_sigma_db: f64,
    pub tx_power: f64,
    pub min_distance: f64,
    /// SNR of an unshadowed link at `reference_distance`. Must be given
    /// unless `noise_power` is.
    pub reference_snr_db: Option<f64>,
    /// Defaults to `r / 2` at every sweep point.
    pub reference_distance: Option<f64>,
    /// Fixed noise power; overrides the reference SNR.
    pub noise_power: Option<f64>,
    pub trials: usize,
    pub max_iterations: usize,
    pub switch_tolerance: f64,
    pub update_order: OrderName,
    pub caching: CachingName,
    pub r_values: Option<Vec<f64>>,
    pub r_min: f64,
    pub r_max: f64,
    pub r_points: usize,
}

impl Default for PhySection {
    fn default() -> Self {
        let ch = ChannelParams::default();
        let sched = SchedulerConfig::default();
        Self {
            pathloss_exponent: ch.pathloss_exponent,
            shadowing_sigma_db: ch.shadowing_sigma_db,
            tx_power: ch.tx_power,
            min_distance: ch.min_distance,
            reference_snr_db: None,
            reference_distance: None,
            noise_power: None,
            trials: 200,
            max_iterations: sched.max_iterations,
            switch_tolerance: sched.switch_tolerance,
            update_order: OrderName::Sequential,
            caching: CachingName::Deterministic,
            r_values: None,
            r_min: 0.025,
            r_max: 0.5,
            r_points: 20,
        }
    }
}

/// Average download times; no defaults, only their ratio matters.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DelaySection {
    pub omega_bs: Option<f64>,
    pub omega_d2d: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsymptoticsSection {
    pub gamma_r: f64,
    pub n_values: Vec<usize>,
    /// `m = round(m_coefficient * sqrt(n))`.
    pub m_coefficient: f64,
}

impl Default for AsymptoticsSection {
    fn default() -> Self {
        Self {
            gamma_r: 0.6,
            n_values: vec![100, 200, 500, 1000, 2000],
            m_coefficient: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FigureSection {
    /// Request exponents drawn as separate curves.
    pub curve_gamma_r_values: Vec<f64>,
    /// Request exponents swept along the x axis of the optimum figures.
    pub gamma_r_values: Vec<f64>,
    /// Request exponents for the rate figure.
    pub rate_gamma_r_values: Vec<f64>,
    pub m_values: Vec<usize>,
    /// Caching exponents drawn as separate curves.
    pub gamma_c_values: Vec<f64>,
    /// Collaboration distance at which the best caching exponent is tracked.
    pub fixed_r: f64,
    pub gamma_c_scan_points: usize,
}

impl Default for FigureSection {
    fn default() -> Self {
        Self {
            curve_gamma_r_values: vec![0.6, 0.8, 1.0, 1.2, 1.4],
            gamma_r_values: vec![0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4],
            rate_gamma_r_values: vec![0.6, 1.0, 1.4],
            m_values: vec![250, 500, 1000, 2000],
            gamma_c_values: vec![0.5, 1.0, 1.5, 2.0],
            fixed_r: 0.2,
            gamma_c_scan_points: 61,
        }
    }
}

/// Reads `path` (if any), applies `overrides` and deserializes the result.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| {
                CliError::Other(anyhow::anyhow!("cannot read {}: {e}", p.display()))
            })?;
            text.parse::<toml::Table>()
                .map_err(|e| CliError::validation("config", e.to_string()))?
        }
        None => toml::Table::new(),
    };
    for item in overrides {
        apply_override(&mut table, item)?;
    }
    // Round-trip through text so type errors quote the offending line.
    let text = toml::to_string(&table).map_err(|e| CliError::Other(e.into()))?;
    toml::from_str(&text)
        .map_err(|e| CliError::validation("config", e.to_string().trim_end().to_owned()))
}

/// Applies one `section.key=value` override. The value is read as a TOML
/// literal and falls back to a plain string.
pub fn apply_override(table: &mut toml::Table, item: &str) -> Result<(), CliError> {
    let (key, raw) = item.split_once('=').ok_or_else(|| {
        CliError::validation("--set", format!("expected key=value, got `{item}`"))
    })?;
    let key = key.trim();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()));
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| CliError::validation("--set", "empty key"))?;
    let mut node = table;
    for part in parts {
        let entry = node
            .entry(part.to_owned())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::validation("--set", format!("`{part}` is not a section")))?;
    }
    node.insert(last.to_owned(), value);
    Ok(())
}

fn axis(explicit: &Option<Vec<f64>>, lo: f64, hi: f64, points: usize) -> Vec<f64> {
    explicit.clone().unwrap_or_else(|| linspace(lo, hi, points))
}

impl ExperimentConfig {
    pub fn seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| {
            CliError::validation(
                "seed",
                "this command is stochastic; pass --seed or set `seed`",
            )
        })
    }

    /// Cell at the first grid `r`; callers replace `r` per point.
    pub fn cell(&self) -> Result<CellConfig, CliError> {
        self.cell_with(self.cell.request_gamma, self.cell.users, self.cell.files)
    }

    pub fn cell_with(
        &self,
        gamma_r: f64,
        users: usize,
        files: usize,
    ) -> Result<CellConfig, CliError> {
        CellConfig::new(users, files, 0.1, gamma_r).map_err(CliError::in_section("cell"))
    }

    pub fn popularity(&self) -> Result<PopularityModel, CliError> {
        PopularityModel::zipf(self.cell.files, self.cell.request_gamma)
            .map_err(CliError::in_section("cell"))
    }

    /// `r` grid with the `gamma_c` axis attached.
    pub fn sweep_grid(&self) -> Result<SweepGrid, CliError> {
        let g = &self.grid;
        SweepGrid::new(
            axis(&g.r_values, g.r_min, g.r_max, g.r_points),
            Some(axis(
                &g.gamma_c_values,
                g.gamma_c_min,
                g.gamma_c_max,
                g.gamma_c_points,
            )),
            g.refinement_levels,
        )
        .map_err(CliError::in_section("grid"))
    }

    pub fn r_values(&self) -> Result<Vec<f64>, CliError> {
        Ok(self.sweep_grid()?.r_values)
    }

    pub fn rand_params(&self) -> Result<RandCachingParams, CliError> {
        let r = &self.random;
        let seed = match r.method {
            RandMethod::Mc => self.seed()?,
            RandMethod::Exact => self.seed.unwrap_or(0),
        };
        let variant = match r.variant {
            VariantName::Conditional => RandVariant::ConditionalProduct,
            VariantName::Marginal => RandVariant::ProductOfMarginals,
        };
        RandCachingParams::new(r.caching_gamma, r.mc_samples, seed)
            .map(|p| p.with_variant(variant))
            .map_err(CliError::in_section("random"))
    }

    pub fn caching_mode(&self, name: CachingName) -> CachingMode {
        match name {
            CachingName::Deterministic => CachingMode::Deterministic,
            CachingName::Random => CachingMode::Random {
                caching_gamma: self.random.caching_gamma,
            },
            CachingName::MostPopular => CachingMode::MostPopular,
        }
    }

    pub fn geo_trials(&self) -> Result<usize, CliError> {
        if self.geo.trials == 0 {
            return Err(CliError::validation(
                "geo.trials",
                "need at least one trial",
            ));
        }
        Ok(self.geo.trials)
    }

    pub fn delay_weights(&self) -> Result<DelayWeights, CliError> {
        let d = &self.delay;
        let bs = d
            .omega_bs
            .ok_or_else(|| CliError::validation("delay.omega_bs", "must be set explicitly"))?;
        let d2d = d
            .omega_d2d
            .ok_or_else(|| CliError::validation("delay.omega_d2d", "must be set explicitly"))?;
        DelayWeights::new(bs, d2d).map_err(CliError::in_section("delay"))
    }

    pub fn channel(&self) -> Result<ChannelParams, CliError> {
        let p = &self.phy;
        let ch = ChannelParams {
            pathloss_exponent: p.pathloss_exponent,
            shadowing_sigma_db: p.shadowing_sigma_db,
            tx_power: p.tx_power,
            noise_power: 0.0,
            min_distance: p.min_distance,
        };
        ch.validate().map_err(CliError::in_section("phy"))?;
        Ok(ch)
    }

    pub fn noise(&self) -> Result<NoiseFloor, CliError> {
        let p = &self.phy;
        let floor = match (p.noise_power, p.reference_snr_db) {
            (Some(n), _) => NoiseFloor::Absolute(n),
            (None, Some(snr_db)) => NoiseFloor::ReferenceSnr {
                snr_db,
                distance: p.reference_distance,
            },
            (None, None) => {
                return Err(CliError::validation(
                    "phy.reference_snr_db",
                    "must be set explicitly (or give phy.noise_power)",
                ))
            }
        };
        floor.validate().map_err(CliError::in_section("phy"))?;
        Ok(floor)
    }

    pub fn noise_note(&self) -> Result<String, CliError> {
        Ok(match self.noise()? {
            NoiseFloor::Absolute(n) => format!("fixed noise power {n:e}"),
            NoiseFloor::ReferenceSnr { snr_db, distance } => match distance {
                Some(d) => {
                    format!("noise set for {snr_db} dB SNR at distance {d} without shadowing")
                }
                None => {
                    format!("noise set per r for {snr_db} dB SNR at distance r/2 without shadowing")
                }
            },
        })
    }

    pub fn scheduler(&self) -> Result<SchedulerConfig, CliError> {
        let p = &self.phy;
        if p.max_iterations == 0 {
            return Err(CliError::validation(
                "phy.max_iterations",
                "must be positive",
            ));
        }
        if !(p.switch_tolerance.is_finite() && p.switch_tolerance >= 0.0) {
            return Err(CliError::validation(
                "phy.switch_tolerance",
                "must be non-negative",
            ));
        }
        Ok(SchedulerConfig {
            max_iterations: p.max_iterations,
            switch_tolerance: p.switch_tolerance,
            order: match p.update_order {
                OrderName::Sequential => UpdateOrder::Sequential,
                OrderName::Simultaneous => UpdateOrder::Simultaneous,
            },
        })
    }

    pub fn phy_r_values(&self) -> Result<Vec<f64>, CliError> {
        let p = &self.phy;
        let rs = axis(&p.r_values, p.r_min, p.r_max, p.r_points);
        // reuse the grid checks
        SweepGrid::new(rs, None, 0)
            .map(|g| g.r_values)
            .map_err(|e| CliError::validation("phy.r_values", e.to_string()))
    }

    pub fn phy_trials(&self) -> Result<usize, CliError> {
        if self.phy.trials == 0 {
            return Err(CliError::validation(
                "phy.trials",
                "need at least one trial",
            ));
        }
        Ok(self.phy.trials)
    }

    pub fn library_rule(&self) -> LibraryRule {
        LibraryRule {
            coefficient: self.asymptotics.m_coefficient,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
