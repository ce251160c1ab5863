//! One function per subcommand, each producing CSV tables.

use d2dcache_core::analytic_det::{det_expected_active, DetPoint};
use d2dcache_core::geo_sim::{run_trials, CachingMode};
use d2dcache_core::optimize::{
    fit_asymptotics, linspace, optimize_r_deterministic, optimize_r_gamma_random, AsymptoticFit,
    DetObjective, OptimumReport, SweepGrid,
};
use d2dcache_core::phy_sim::rate_vs_r_sweep;
use d2dcache_core::{
    rand_expected_active_exact, rand_expected_active_mc, CellConfig, PopularityModel, RandEstimate,
};

use crate::config::{ExperimentConfig, RandMethod};
use crate::error::CliError;
use crate::output::{format_real, Cell, Table};

type Res<T> = Result<T, CliError>;

fn zipf(files: usize, gamma: f64) -> Res<PopularityModel> {
    PopularityModel::zipf(files, gamma).map_err(CliError::in_section("cell"))
}

fn warnings_note(rep: &OptimumReport) -> Option<String> {
    (!rep.warnings.is_empty()).then(|| format!("warnings: {:?}", rep.warnings))
}

pub fn analytic_det(cfg: &ExperimentConfig) -> Res<Table> {
    let cell = cfg.cell()?;
    let pop = cfg.popularity()?;
    let rs = cfg.r_values()?;
    let weights = match (cfg.delay.omega_bs, cfg.delay.omega_d2d) {
        (None, None) => None,
        _ => Some(cfg.delay_weights()?),
    };
    let mut cols = vec![
        "r",
        "clusters",
        "active_prob",
        "expected_active",
        "expected_self",
    ];
    if weights.is_some() {
        cols.push("total_delay");
    }
    let mut t = Table::new("analytic_det", &cols);
    for r in rs {
        let p = det_expected_active(&cell.with_r(r), &pop)?;
        let mut row: Vec<Cell> = vec![
            r.into(),
            cell.with_r(r).cluster_count().into(),
            p.active_prob.into(),
            p.expected_active.into(),
            p.expected_self.into(),
        ];
        if let Some(w) = weights {
            row.push(
                w.total_delay(cell.users, p.expected_active, p.expected_self)
                    .into(),
            );
        }
        t.push(row);
    }
    Ok(t)
}

fn rand_eval(
    cfg: &ExperimentConfig,
    cell: &CellConfig,
    pop: &PopularityModel,
    gamma_c: f64,
) -> Res<RandEstimate> {
    let params = cfg.rand_params()?.with_gamma(gamma_c);
    Ok(match cfg.random.method {
        RandMethod::Mc => rand_expected_active_mc(cell, pop, &params)?,
        RandMethod::Exact => rand_expected_active_exact(cell, pop, &params)?,
    })
}

pub fn analytic_rand(cfg: &ExperimentConfig) -> Res<Table> {
    let cell = cfg.cell()?;
    let pop = cfg.popularity()?;
    let rs = cfg.r_values()?;
    let gamma_c = cfg.random.caching_gamma;
    let mut t = Table::new(
        "analytic_rand",
        &[
            "r",
            "gamma_c",
            "active_prob",
            "expected_active",
            "std_error",
            "expected_self",
            "samples",
        ],
    );
    t.note(format!(
        "method: {:?}, variant: {:?}",
        cfg.random.method, cfg.random.variant
    ));
    for r in rs {
        let e = rand_eval(cfg, &cell.with_r(r), &pop, gamma_c)?;
        t.push(vec![
            r.into(),
            gamma_c.into(),
            e.point.active_prob.into(),
            e.point.expected_active.into(),
            e.active_std_error.into(),
            e.point.expected_self.into(),
            e.samples.into(),
        ]);
    }
    Ok(t)
}

pub fn geo_sim(cfg: &ExperimentConfig) -> Res<Table> {
    let cell = cfg.cell()?;
    let pop = cfg.popularity()?;
    let rs = cfg.r_values()?;
    let trials = cfg.geo_trials()?;
    let seed = cfg.seed()?;
    let mode = cfg.caching_mode(cfg.geo.caching);
    let mut t = Table::new(
        "geo_sim",
        &[
            "r",
            "grid_clusters",
            "active_mean",
            "active_se",
            "analytic_active",
            "self_mean",
            "self_se",
            "potential_links_mean",
        ],
    );
    t.note(format!(
        "caching: {:?}, trials per point: {trials}",
        cfg.geo.caching
    ));
    t.note("analytic_active = analytic per-cluster activity x grid_clusters");
    for r in rs {
        let c = cell.with_r(r);
        let s = run_trials(&c, &pop, mode, trials, seed)?;
        let analytic_prob = match mode {
            CachingMode::Deterministic => det_expected_active(&c, &pop)?.active_prob,
            CachingMode::Random { caching_gamma } => {
                rand_eval(cfg, &c, &pop, caching_gamma)?.point.active_prob
            }
            CachingMode::MostPopular => 0.0,
        };
        t.push(vec![
            r.into(),
            s.grid_clusters.into(),
            s.active.mean.into(),
            s.active.std_error.into(),
            (analytic_prob * s.grid_clusters as f64).into(),
            s.self_requests.mean.into(),
            s.self_requests.std_error.into(),
            s.potential_links.mean.into(),
        ]);
    }
    Ok(t)
}

/// Rate sweep for one request exponent.
fn rate_sweep(cfg: &ExperimentConfig, gamma_r: f64) -> Res<(d2dcache_core::RateSweep, Vec<f64>)> {
    let cell = cfg.cell_with(gamma_r, cfg.cell.users, cfg.cell.files)?;
    let pop = zipf(cfg.cell.files, gamma_r)?;
    let rs = cfg.phy_r_values()?;
    let sweep = rate_vs_r_sweep(
        &cell,
        &pop,
        cfg.caching_mode(cfg.phy.caching),
        &cfg.channel()?,
        cfg.noise()?,
        &rs,
        cfg.phy_trials()?,
        cfg.seed()?,
        &cfg.scheduler()?,
    )?;
    Ok((sweep, rs))
}

pub fn phy_sim(cfg: &ExperimentConfig) -> Res<Table> {
    let (sweep, _) = rate_sweep(cfg, cfg.cell.request_gamma)?;
    let mut t = Table::new(
        "phy_sim",
        &[
            "r",
            "noise_power",
            "mean_rate",
            "std_error",
            "mean_links",
            "nonconverged_fraction",
        ],
    );
    t.note(format!("noise: {}", cfg.noise_note()?));
    t.note(format!("rate-optimal r: {}", format_real(sweep.r_opt)));
    for p in &sweep.points {
        t.push(vec![
            p.r.into(),
            p.noise_power.into(),
            p.mean_rate.into(),
            p.std_error.into(),
            p.mean_links.into(),
            p.nonconverged_fraction.into(),
        ]);
    }
    Ok(t)
}

fn det_grid(cfg: &ExperimentConfig) -> Res<SweepGrid> {
    let mut g = cfg.sweep_grid()?;
    g.gamma_c_values = None;
    Ok(g)
}

pub fn det_optimum(
    cfg: &ExperimentConfig,
    gamma_r: f64,
    files: usize,
    objective: DetObjective,
) -> Res<OptimumReport> {
    let cell = cfg.cell_with(gamma_r, cfg.cell.users, files)?;
    let pop = zipf(files, gamma_r)?;
    Ok(optimize_r_deterministic(
        &cell,
        &pop,
        objective,
        &det_grid(cfg)?,
    )?)
}

pub fn rand_optimum(cfg: &ExperimentConfig, gamma_r: f64) -> Res<OptimumReport> {
    let cell = cfg.cell_with(gamma_r, cfg.cell.users, cfg.cell.files)?;
    let pop = zipf(cfg.cell.files, gamma_r)?;
    Ok(optimize_r_gamma_random(
        &cell,
        &pop,
        &cfg.sweep_grid()?,
        &cfg.rand_params()?,
    )?)
}

pub fn optimize_det(cfg: &ExperimentConfig, objective: DetObjective) -> Res<Table> {
    let rep = det_optimum(cfg, cfg.cell.request_gamma, cfg.cell.files, objective)?;
    let mut t = Table::new("optimize_det", &["r", "objective", "on_grid"]);
    t.note(format!("objective: {:?}", rep.objective_kind));
    t.note(format!("r_opt: {}", format_real(rep.r_opt)));
    t.note(format!(
        "objective at optimum: {}",
        format_real(rep.objective_at_opt)
    ));
    if let Some(w) = warnings_note(&rep) {
        t.note(w);
    }
    for p in &rep.curve {
        t.push(vec![
            p.r.into(),
            p.value.into(),
            usize::from(p.on_grid).into(),
        ]);
    }
    Ok(t)
}

pub fn optimize_rand(cfg: &ExperimentConfig) -> Res<Table> {
    let rep = rand_optimum(cfg, cfg.cell.request_gamma)?;
    let mut t = Table::new(
        "optimize_rand",
        &["r", "gamma_c", "expected_active", "std_error", "on_grid"],
    );
    t.note(format!("r_opt: {}", format_real(rep.r_opt)));
    t.note(format!("gamma_c_opt: {}", Cell::from(rep.gamma_c_opt)));
    t.note(format!(
        "objective at optimum: {} +- {}",
        format_real(rep.objective_at_opt),
        format_real(rep.std_error_at_opt)
    ));
    if let Some(w) = warnings_note(&rep) {
        t.note(w);
    }
    for p in &rep.curve {
        t.push(vec![
            p.r.into(),
            p.gamma_c.into(),
            p.value.into(),
            p.std_error.into(),
            usize::from(p.on_grid).into(),
        ]);
    }
    Ok(t)
}

fn asymptotic_fit(cfg: &ExperimentConfig, gamma_r: f64) -> Res<AsymptoticFit> {
    let a = &cfg.asymptotics;
    fit_asymptotics(gamma_r, &a.n_values, cfg.library_rule(), &det_grid(cfg)?)
        .map_err(CliError::in_section("asymptotics"))
}

fn asymptotics_table(name: &str, fit: &AsymptoticFit) -> Table {
    let mut t = Table::new(
        name,
        &[
            "n",
            "m",
            "r_opt",
            "r_theory",
            "r_fit",
            "expected_active",
            "active_theory",
            "active_fit",
        ],
    );
    t.note(format!(
        "gamma_r: {}, eta: {}",
        fit.gamma_r,
        format_real(fit.eta)
    ));
    t.note(format!("m = round({} * sqrt(n))", fit.m_rule.coefficient));
    t.note(format!(
        "r_opt fit: slope {} constant {}",
        format_real(fit.fitted_exponent),
        format_real(fit.fitted_constant)
    ));
    t.note(format!(
        "E[A] fit: slope {} constant {}",
        format_real(fit.active_exponent),
        format_real(fit.active_constant)
    ));
    for s in &fit.samples {
        t.push(vec![
            s.users.into(),
            s.files.into(),
            s.r_opt.into(),
            s.r_theory.into(),
            (fit.fitted_constant * s.r_theory.powf(fit.fitted_exponent)).into(),
            s.expected_active.into(),
            s.active_theory.into(),
            (fit.active_constant * s.active_theory.powf(fit.active_exponent)).into(),
        ]);
    }
    t
}

pub fn asymptotics(cfg: &ExperimentConfig) -> Res<Table> {
    let fit = asymptotic_fit(cfg, cfg.asymptotics.gamma_r)?;
    Ok(asymptotics_table("asymptotics", &fit))
}

/// Deterministic, random (at its best `gamma_c`) and most-popular-only
/// caching side by side.
pub fn compare(cfg: &ExperimentConfig, name: &str) -> Res<Table> {
    let cell = cfg.cell()?;
    let pop = cfg.popularity()?;
    let rs = cfg.r_values()?;
    let trials = cfg.geo_trials()?;
    let seed = cfg.seed()?;
    let best = rand_optimum(cfg, cfg.cell.request_gamma)?;
    let gamma_c = best.gamma_c_opt.expect("random optimum has gamma_c");
    let mut t = Table::new(
        name,
        &[
            "r",
            "ea_det",
            "ea_rand",
            "ea_rand_se",
            "ea_nself_det",
            "ea_nself_rand",
            "ea_nself_rand_se",
            "ea_mostpop",
            "nself_mostpop",
            "nself_mostpop_se",
        ],
    );
    t.note(format!(
        "random caching at its optimal gamma_c = {}",
        format_real(gamma_c)
    ));
    t.note(format!(
        "most-popular columns simulated with {trials} trials per point"
    ));
    for r in rs {
        let c = cell.with_r(r);
        let det: DetPoint = det_expected_active(&c, &pop)?;
        let rand = rand_eval(cfg, &c, &pop, gamma_c)?;
        let mp = run_trials(&c, &pop, CachingMode::MostPopular, trials, seed)?;
        t.push(vec![
            r.into(),
            det.expected_active.into(),
            rand.point.expected_active.into(),
            rand.active_std_error.into(),
            (det.expected_active + det.expected_self).into(),
            (rand.point.expected_active + rand.point.expected_self).into(),
            rand.active_std_error.into(),
            mp.active.mean.into(),
            mp.self_requests.mean.into(),
            mp.self_requests.std_error.into(),
        ]);
    }
    Ok(t)
}

pub fn figure(cfg: &ExperimentConfig, number: u8) -> Res<Table> {
    let name = format!("fig{number:02}");
    let f = &cfg.figure;
    match number {
        3 => {
            let rs = cfg.r_values()?;
            let mut t = Table::new(name, &["gamma_r", "r", "expected_active", "expected_self"]);
            for &g in &f.curve_gamma_r_values {
                let cell = cfg.cell_with(g, cfg.cell.users, cfg.cell.files)?;
                let pop = zipf(cfg.cell.files, g)?;
                let rep = det_optimum(cfg, g, cfg.cell.files, DetObjective::MaxActive)?;
                t.note(format!("gamma_r {g}: r_opt {}", format_real(rep.r_opt)));
                for &r in &rs {
                    let p = det_expected_active(&cell.with_r(r), &pop)?;
                    t.push(vec![
                        g.into(),
                        r.into(),
                        p.expected_active.into(),
                        p.expected_self.into(),
                    ]);
                }
            }
            Ok(t)
        }
        4 => {
            let mut t = Table::new(
                name,
                &[
                    "gamma_r",
                    "r",
                    "mean_rate",
                    "std_error",
                    "mean_links",
                    "nonconverged_fraction",
                ],
            );
            t.note(format!("noise: {}", cfg.noise_note()?));
            for &g in &f.rate_gamma_r_values {
                let (sweep, _) = rate_sweep(cfg, g)?;
                let det = det_optimum(cfg, g, cfg.cell.files, DetObjective::MaxActive)?;
                t.note(format!(
                    "gamma_r {g}: rate-optimal r {} (active-optimal r {})",
                    format_real(sweep.r_opt),
                    format_real(det.r_opt)
                ));
                for p in &sweep.points {
                    t.push(vec![
                        g.into(),
                        p.r.into(),
                        p.mean_rate.into(),
                        p.std_error.into(),
                        p.mean_links.into(),
                        p.nonconverged_fraction.into(),
                    ]);
                }
            }
            Ok(t)
        }
        5 => {
            let mut t = Table::new(
                name,
                &[
                    "gamma_r",
                    "r_opt",
                    "clusters_at_opt",
                    "expected_active_at_opt",
                    "active_prob_at_opt",
                ],
            );
            for &g in &f.gamma_r_values {
                let rep = det_optimum(cfg, g, cfg.cell.files, DetObjective::MaxActive)?;
                let clusters = cfg.cell()?.with_r(rep.r_opt).cluster_count();
                t.push(vec![
                    g.into(),
                    rep.r_opt.into(),
                    clusters.into(),
                    rep.objective_at_opt.into(),
                    (rep.objective_at_opt / clusters).into(),
                ]);
            }
            Ok(t)
        }
        6 => {
            let w = cfg.delay_weights()?;
            let mut t = Table::new(
                name,
                &[
                    "gamma_r",
                    "r_opt_active",
                    "r_opt_delay",
                    "expected_active_at_active_opt",
                    "delay_at_delay_opt",
                ],
            );
            t.note(format!("omega_bs {} omega_d2d {}", w.omega_bs, w.omega_d2d));
            for &g in &f.gamma_r_values {
                let a = det_optimum(cfg, g, cfg.cell.files, DetObjective::MaxActive)?;
                let d = det_optimum(cfg, g, cfg.cell.files, DetObjective::MinDelay(w))?;
                t.push(vec![
                    g.into(),
                    a.r_opt.into(),
                    d.r_opt.into(),
                    a.objective_at_opt.into(),
                    d.objective_at_opt.into(),
                ]);
            }
            Ok(t)
        }
        7 => {
            let mut t = Table::new(name, &["gamma_r", "m", "r_opt", "expected_active_at_opt"]);
            for &g in &f.curve_gamma_r_values {
                for &m in &f.m_values {
                    let rep = det_optimum(cfg, g, m, DetObjective::MaxActive)?;
                    t.push(vec![
                        g.into(),
                        m.into(),
                        rep.r_opt.into(),
                        rep.objective_at_opt.into(),
                    ]);
                }
            }
            Ok(t)
        }
        8 => Ok(asymptotics_table(&name, &asymptotic_fit(cfg, 1.4)?)),
        9 => Ok(asymptotics_table(&name, &asymptotic_fit(cfg, 0.6)?)),
        10 => {
            let rep = rand_optimum(cfg, cfg.cell.request_gamma)?;
            let mut t = Table::new(name, &["r", "gamma_c", "expected_active", "std_error"]);
            let top = rep
                .grid_points()
                .fold(
                    None::<&d2dcache_core::optimize::CurvePoint>,
                    |b, p| match b {
                        Some(q) if q.value >= p.value => Some(q),
                        _ => Some(p),
                    },
                )
                .expect("non-empty grid");
            t.note(format!(
                "argmax grid row: r {} gamma_c {} E[A] {}",
                format_real(top.r),
                Cell::from(top.gamma_c),
                format_real(top.value)
            ));
            t.note(format!(
                "refined optimum: r {} gamma_c {} E[A] {} +- {}",
                format_real(rep.r_opt),
                Cell::from(rep.gamma_c_opt),
                format_real(rep.objective_at_opt),
                format_real(rep.std_error_at_opt)
            ));
            if let Some(w) = warnings_note(&rep) {
                t.note(w);
            }
            for p in rep.grid_points() {
                t.push(vec![
                    p.r.into(),
                    p.gamma_c.into(),
                    p.value.into(),
                    p.std_error.into(),
                ]);
            }
            Ok(t)
        }
        11 => {
            let cell = cfg.cell()?;
            let pop = cfg.popularity()?;
            let rs = cfg.r_values()?;
            let mut t = Table::new(name, &["gamma_c", "r", "expected_active", "std_error"]);
            for &gc in &f.gamma_c_values {
                for &r in &rs {
                    let e = rand_eval(cfg, &cell.with_r(r), &pop, gc)?;
                    t.push(vec![
                        gc.into(),
                        r.into(),
                        e.point.expected_active.into(),
                        e.active_std_error.into(),
                    ]);
                }
            }
            Ok(t)
        }
        12 => {
            let g = &cfg.grid;
            let gammas = linspace(g.gamma_c_min, g.gamma_c_max, f.gamma_c_scan_points);
            if gammas.len() < 3 {
                return Err(CliError::validation(
                    "figure.gamma_c_scan_points",
                    "need at least 3 points",
                ));
            }
            if !(f.fixed_r > 0.0 && f.fixed_r < d2dcache_core::CELL_SIDE) {
                return Err(CliError::validation(
                    "figure.fixed_r",
                    "must lie in (0, sqrt 2)",
                ));
            }
            let mut t = Table::new(
                name,
                &[
                    "gamma_r",
                    "gamma_c_opt",
                    "expected_active_at_opt",
                    "std_error",
                ],
            );
            t.note(format!("r fixed at {}", format_real(f.fixed_r)));
            for &gr in &f.gamma_r_values {
                let cell = cfg
                    .cell_with(gr, cfg.cell.users, cfg.cell.files)?
                    .with_r(f.fixed_r);
                let pop = zipf(cfg.cell.files, gr)?;
                let mut best: Option<(f64, RandEstimate)> = None;
                for &gc in &gammas {
                    let e = rand_eval(cfg, &cell, &pop, gc)?;
                    if best.as_ref().map_or(true, |(_, b)| {
                        e.point.expected_active > b.point.expected_active
                    }) {
                        best = Some((gc, e));
                    }
                }
                let (gc, e) = best.expect("non-empty scan");
                t.push(vec![
                    gr.into(),
                    gc.into(),
                    e.point.expected_active.into(),
                    e.active_std_error.into(),
                ]);
            }
            Ok(t)
        }
        13 => compare(cfg, &name),
        14 => {
            let cell = cfg.cell()?;
            let pop = cfg.popularity()?;
            let rs = cfg.r_values()?;
            let gc = cfg.random.caching_gamma;
            let mut t = Table::new(name, &["r", "nself_det", "nself_rand", "nself_mostpop"]);
            t.note(format!("random caching gamma_c {}", format_real(gc)));
            let mostpop = cell.users as f64 * pop.prob(1);
            for r in rs {
                let c = cell.with_r(r);
                let det = det_expected_active(&c, &pop)?;
                let rand = rand_eval(cfg, &c, &pop, gc)?;
                t.push(vec![
                    r.into(),
                    det.expected_self.into(),
                    rand.point.expected_self.into(),
                    mostpop.into(),
                ]);
            }
            Ok(t)
        }
        _ => Err(CliError::validation(
            "figure",
            format!("no figure {number}; choose 3 to 14"),
        )),
    }
}
