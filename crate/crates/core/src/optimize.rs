//! Searches for the best collaboration distance `r` (and caching exponent
//! `gamma_c` under random caching), plus log-log fits of how the optimum
//! scales with the number of users.

use alloc::vec::Vec;

use crate::analytic_det::{det_expected_active, DelayWeights};
use crate::analytic_rand::{rand_expected_active_mc, RandCachingParams};
use crate::cell::CellConfig;
use crate::numeric::{golden_section_max, linear_fit};
use crate::popularity::PopularityModel;
use crate::{Error, Result, CELL_SIDE};

/// Golden-section stopping width for the deterministic refinement.
pub const REFINE_TOLERANCE: f64 = 1e-5;

/// Curves varying by less than this are reported as flat.
pub const FLAT_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub r_values: Vec<f64>,
    pub gamma_c_values: Option<Vec<f64>>,
    /// Refinement passes after the grid scan; 0 keeps the best grid point.
    pub refinement_levels: usize,
}

/// `count` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => alloc::vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

impl SweepGrid {
    pub fn new(
        r_values: Vec<f64>,
        gamma_c_values: Option<Vec<f64>>,
        refinement_levels: usize,
    ) -> Result<Self> {
        let g = Self {
            r_values,
            gamma_c_values,
            refinement_levels,
        };
        g.validate()?;
        Ok(g)
    }

    /// 30 points on `[0.05, 1]`, one refinement pass.
    pub fn deterministic_default() -> Self {
        Self {
            r_values: linspace(0.05, 1.0, 30),
            gamma_c_values: None,
            refinement_levels: 1,
        }
    }

    /// `r` from 0.05 to 0.5 and `gamma_c` from 0 to 3, both in quarter-ish
    /// steps, with two zoom passes.
    pub fn random_default() -> Self {
        Self {
            r_values: linspace(0.05, 0.5, 19),
            gamma_c_values: Some(linspace(0.0, 3.0, 13)),
            refinement_levels: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_axis("r_values", &self.r_values)?;
        if self
            .r_values
            .iter()
            .any(|&r| !(r.is_finite() && r > 0.0 && r < CELL_SIDE))
        {
            return Err(Error::invalid(
                "r_values",
                "every r must lie in (0, sqrt 2)",
            ));
        }
        if let Some(g) = &self.gamma_c_values {
            check_axis("gamma_c_values", g)?;
            if g.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
                return Err(Error::invalid("gamma_c_values", "must be non-negative"));
            }
        }
        if self.refinement_levels > 8 {
            return Err(Error::invalid("refinement_levels", "at most 8"));
        }
        Ok(())
    }
}

#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn check_axis(field: &'static str, values: &[f64]) -> Result<()> {
    if values.len() < 3 {
        return Err(Error::invalid(field, "need at least 3 points"));
    }
    // negated so NaN is rejected too
    if values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid(field, "must be strictly increasing"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    MaxActive,
    MinDelay,
    MaxRate,
}

/// Objective for the deterministic search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetObjective {
    /// Maximize `E[A]`.
    MaxActive,
    /// Minimize the expected total download time.
    MinDelay(DelayWeights),
}

impl DetObjective {
    pub fn kind(&self) -> ObjectiveKind {
        match self {
            DetObjective::MaxActive => ObjectiveKind::MaxActive,
            DetObjective::MinDelay(_) => ObjectiveKind::MinDelay,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub r: f64,
    pub gamma_c: Option<f64>,
    pub value: f64,
    /// Monte Carlo standard error, 0 for analytic values.
    pub std_error: f64,
    /// `false` for points added by refinement.
    pub on_grid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizeWarning {
    /// The objective varies by less than [`FLAT_THRESHOLD`] over the grid.
    FlatObjective,
    /// The two best grid cells differ by less than one standard error.
    TopCellsWithinOneSe,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimumReport {
    pub r_opt: f64,
    pub gamma_c_opt: Option<f64>,
    pub objective_at_opt: f64,
    pub std_error_at_opt: f64,
    pub objective_kind: ObjectiveKind,
    /// Grid points in scan order (row-major in `r` then `gamma_c`), with
    /// refinement points inserted in sorted position.
    pub curve: Vec<CurvePoint>,
    pub warnings: Vec<OptimizeWarning>,
}

impl OptimumReport {
    pub fn grid_points(&self) -> impl Iterator<Item = &CurvePoint> {
        self.curve.iter().filter(|p| p.on_grid)
    }
}

fn det_value(
    cfg: &CellConfig,
    pop: &PopularityModel,
    objective: DetObjective,
    r: f64,
) -> Result<f64> {
    let p = det_expected_active(&cfg.with_r(r), pop)?;
    Ok(match objective {
        DetObjective::MaxActive => p.expected_active,
        DetObjective::MinDelay(w) => w.total_delay(cfg.users, p.expected_active, p.expected_self),
    })
}

/// Index of the best value; ties keep the earlier index.
fn argbest(values: impl Iterator<Item = f64>, maximize: bool) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        let better = match best {
            None => true,
            Some((_, b)) => {
                if maximize {
                    v > b
                } else {
                    v < b
                }
            }
        };
        if better {
            best = Some((i, v));
        }
    }
    best.map_or(0, |(i, _)| i)
}

fn flat(values: impl Iterator<Item = f64>) -> bool {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    hi - lo < FLAT_THRESHOLD
}

/// Best `r` under deterministic caching: scan the grid, then golden-section
/// search between the neighbours of the best grid point. The refined point
/// replaces the grid optimum only if it is strictly better.
///
/// `cfg.r` is ignored.
pub fn optimize_r_deterministic(
    cfg: &CellConfig,
    pop: &PopularityModel,
    objective: DetObjective,
    grid: &SweepGrid,
) -> Result<OptimumReport> {
    grid.validate()?;
    if let DetObjective::MinDelay(w) = objective {
        w.validate()?;
    }
    let maximize = matches!(objective, DetObjective::MaxActive);
    let mut curve = grid
        .r_values
        .iter()
        .map(|&r| {
            Ok(CurvePoint {
                r,
                gamma_c: None,
                value: det_value(cfg, pop, objective, r)?,
                std_error: 0.0,
                on_grid: true,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut warnings = Vec::new();
    if flat(curve.iter().map(|p| p.value)) {
        log::warn!("objective is flat over the r grid");
        warnings.push(OptimizeWarning::FlatObjective);
    }

    let i = argbest(curve.iter().map(|p| p.value), maximize);
    let mut best = curve[i];
    if grid.refinement_levels > 0 && !warnings.contains(&OptimizeWarning::FlatObjective) {
        let rs = &grid.r_values;
        let lo = rs[i.saturating_sub(1)];
        let hi = rs[(i + 1).min(rs.len() - 1)];
        let sign = if maximize { 1.0 } else { -1.0 };
        // Inputs were validated above, so evaluation inside the bracket
        // cannot fail.
        let (r, v) = golden_section_max(
            |r| sign * det_value(cfg, pop, objective, r).unwrap_or(f64::NEG_INFINITY),
            lo,
            hi,
            REFINE_TOLERANCE,
        );
        let v = sign * v;
        let improves = if maximize {
            v > best.value
        } else {
            v < best.value
        };
        if improves {
            best = CurvePoint {
                r,
                gamma_c: None,
                value: v,
                std_error: 0.0,
                on_grid: false,
            };
            let at = curve.partition_point(|p| p.r < r);
            curve.insert(at, best);
        }
    }
    Ok(OptimumReport {
        r_opt: best.r,
        gamma_c_opt: None,
        objective_at_opt: best.value,
        std_error_at_opt: 0.0,
        objective_kind: objective.kind(),
        curve,
        warnings,
    })
}

fn rand_point(
    cfg: &CellConfig,
    pop_req: &PopularityModel,
    params: &RandCachingParams,
    r: f64,
    gamma_c: f64,
    on_grid: bool,
) -> Result<CurvePoint> {
    let est = rand_expected_active_mc(&cfg.with_r(r), pop_req, &params.with_gamma(gamma_c))?;
    Ok(CurvePoint {
        r,
        gamma_c: Some(gamma_c),
        value: est.point.expected_active,
        std_error: est.active_std_error,
        on_grid,
    })
}

/// Best `(r, gamma_c)` for `E[A]` under random caching.
///
/// Every grid point reuses `params.seed`, so all points see the same random
/// cache profiles per occupancy level and the surface is smooth in both
/// axes. Each refinement pass halves the step and evaluates the 3 x 3 block
/// around the incumbent. Ties go to the smaller `r`, then the smaller
/// `gamma_c`.
///
/// `cfg.r` and `params.caching_gamma` are ignored.
pub fn optimize_r_gamma_random(
    cfg: &CellConfig,
    pop_req: &PopularityModel,
    grid: &SweepGrid,
    params: &RandCachingParams,
) -> Result<OptimumReport> {
    grid.validate()?;
    params.validate()?;
    let gammas = grid
        .gamma_c_values
        .as_ref()
        .ok_or_else(|| Error::invalid("gamma_c_values", "random caching needs a gamma_c axis"))?;

    let mut curve = Vec::with_capacity(grid.r_values.len() * gammas.len());
    for &r in &grid.r_values {
        for &g in gammas {
            curve.push(rand_point(cfg, pop_req, params, r, g, true)?);
        }
    }

    let mut warnings = Vec::new();
    if flat(curve.iter().map(|p| p.value)) {
        log::warn!("objective is flat over the (r, gamma_c) grid");
        warnings.push(OptimizeWarning::FlatObjective);
    }
    let i = argbest(curve.iter().map(|p| p.value), true);
    let top = curve[i];
    let runner_up = curve
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, p)| p.value)
        .fold(f64::NEG_INFINITY, f64::max);
    if !warnings.contains(&OptimizeWarning::FlatObjective) && top.value - runner_up < top.std_error
    {
        log::warn!("top two grid cells are within one standard error");
        warnings.push(OptimizeWarning::TopCellsWithinOneSe);
    }

    let mut best = top;
    let r_lo = grid.r_values[0];
    let r_hi = grid.r_values[grid.r_values.len() - 1];
    let g_lo = gammas[0];
    let g_hi = gammas[gammas.len() - 1];
    let mut dr = min_step(&grid.r_values);
    let mut dg = min_step(gammas);
    for _ in 0..grid.refinement_levels {
        if warnings.contains(&OptimizeWarning::FlatObjective) {
            break;
        }
        dr /= 2.0;
        dg /= 2.0;
        let centre = best;
        let gc = centre.gamma_c.expect("random curve has gamma_c");
        for a in -1i32..=1 {
            for b in -1i32..=1 {
                let r = centre.r + f64::from(a) * dr;
                let g = gc + f64::from(b) * dg;
                if (a, b) == (0, 0) || r < r_lo || r > r_hi || g < g_lo || g > g_hi {
                    continue;
                }
                if curve.iter().any(|p| p.r == r && p.gamma_c == Some(g)) {
                    continue;
                }
                let p = rand_point(cfg, pop_req, params, r, g, false)?;
                let at = curve.partition_point(|q| (q.r, q.gamma_c.unwrap_or(0.0)) < (r, g));
                curve.insert(at, p);
                let wins = p.value > best.value
                    || (p.value == best.value && (p.r, g) < (best.r, best.gamma_c.unwrap_or(0.0)));
                if wins {
                    best = p;
                }
            }
        }
    }
    Ok(OptimumReport {
        r_opt: best.r,
        gamma_c_opt: best.gamma_c,
        objective_at_opt: best.value,
        std_error_at_opt: best.std_error,
        objective_kind: ObjectiveKind::MaxActive,
        curve,
        warnings,
    })
}

fn min_step(values: &[f64]) -> f64 {
    values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}

/// Library size as a function of the user count, `m = round(c * sqrt(n))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LibraryRule {
    pub coefficient: f64,
}

impl Default for LibraryRule {
    fn default() -> Self {
        Self { coefficient: 30.0 }
    }
}

impl LibraryRule {
    pub fn files(&self, users: usize) -> usize {
        (libm::round(self.coefficient * libm::sqrt(users as f64)) as usize).max(1)
    }
}

/// `(1 - gamma_r) / (2 - gamma_r)`.
pub fn scaling_eta(gamma_r: f64) -> f64 {
    (1.0 - gamma_r) / (2.0 - gamma_r)
}

/// Theoretical shapes of `r_opt(n)` and `E[A](n)` up to constants.
pub fn theory_forms(gamma_r: f64, users: usize, files: usize) -> (f64, f64) {
    let n = users as f64;
    if gamma_r < 1.0 {
        let m_eta = libm::pow(files as f64, scaling_eta(gamma_r));
        (libm::sqrt(m_eta / n), n / m_eta)
    } else {
        (libm::sqrt(1.0 / n), n)
    }
}

/// Per-`n` optimum used in a scaling fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingSample {
    pub users: usize,
    pub files: usize,
    pub r_opt: f64,
    pub expected_active: f64,
    pub r_theory: f64,
    pub active_theory: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticFit {
    pub gamma_r: f64,
    pub eta: f64,
    /// Slope of `log r_opt` against `log r_theory`.
    pub fitted_exponent: f64,
    /// `exp(intercept)` of that regression.
    pub fitted_constant: f64,
    /// Slope of `log E[A]` at the optimum against `log active_theory`.
    pub active_exponent: f64,
    pub active_constant: f64,
    pub n_values: Vec<usize>,
    pub m_rule: LibraryRule,
    pub samples: Vec<ScalingSample>,
}

/// Fits `r_opt(n)` and `E[A](n)` at the optimum against their theoretical
/// shapes over `n_values`, with `m` given by `m_rule` and `E[A]` maximized
/// by [`optimize_r_deterministic`] on `grid`.
pub fn fit_asymptotics(
    gamma_r: f64,
    n_values: &[usize],
    m_rule: LibraryRule,
    grid: &SweepGrid,
) -> Result<AsymptoticFit> {
    if !gamma_r.is_finite() || gamma_r < 0.0 {
        return Err(Error::invalid("gamma_r", "must be finite and non-negative"));
    }
    if gamma_r == 1.0 {
        return Err(Error::invalid(
            "gamma_r",
            "the scaling law changes regime at 1",
        ));
    }
    if n_values.len() < 4 {
        return Err(Error::invalid("n_values", "need at least 4 points"));
    }
    if n_values.windows(2).any(|w| w[1] <= w[0]) || n_values[0] == 0 {
        return Err(Error::invalid(
            "n_values",
            "must be positive and strictly increasing",
        ));
    }
    if !(m_rule.coefficient.is_finite() && m_rule.coefficient > 0.0) {
        return Err(Error::invalid("m_rule", "coefficient must be positive"));
    }
    grid.validate()?;

    let mut samples = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let m = m_rule.files(n);
        let cfg = CellConfig::new(n, m, grid.r_values[0], gamma_r)?;
        let pop = PopularityModel::zipf(m, gamma_r)?;
        let rep = optimize_r_deterministic(&cfg, &pop, DetObjective::MaxActive, grid)?;
        let (r_theory, active_theory) = theory_forms(gamma_r, n, m);
        samples.push(ScalingSample {
            users: n,
            files: m,
            r_opt: rep.r_opt,
            expected_active: rep.objective_at_opt,
            r_theory,
            active_theory,
        });
    }
    let log =
        |f: fn(&ScalingSample) -> f64| samples.iter().map(|s| libm::log(f(s))).collect::<Vec<_>>();
    let (r_slope, r_icpt) = linear_fit(&log(|s| s.r_theory), &log(|s| s.r_opt));
    let (a_slope, a_icpt) = linear_fit(&log(|s| s.active_theory), &log(|s| s.expected_active));
    Ok(AsymptoticFit {
        gamma_r,
        eta: scaling_eta(gamma_r),
        fitted_exponent: r_slope,
        fitted_constant: libm::exp(r_icpt),
        active_exponent: a_slope,
        active_constant: libm::exp(a_icpt),
        n_values: n_values.to_vec(),
        m_rule,
        samples,
    })
}
