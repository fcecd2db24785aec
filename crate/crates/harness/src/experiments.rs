//! The numerical experiments: projection rates, deterministic and Monte-Carlo
//! error tables, support tracking and space-time noise runs.

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use spme_core::assembly::BoxIndicator;
use spme_core::reference::{
    discrete_support, ErrorRules, SpacetimeError, StochasticBarenblatt, SUPPORT_THRESHOLD,
};
use spme_core::transfer::{Projection, TildeRestriction};
use spme_core::{
    Assembler, BarenblattParams, BasisCoefficients, Grid, IncrementTable, NoiseModel, QuadratureRule, Scheme,
    SchemeConfig, Trajectory,
};

use crate::config::ExperimentConfig;
use crate::stats::{fit_last, KahanSum, SampleStats, SlopeFit};

/// Time at which the smooth projection target is taken.
pub const PROJECTION_TIME: f64 = 0.1;

/// Half-width of the indicator target's box.
pub const INDICATOR_HALF_WIDTH: f64 = 0.5;

/// Fraction of failed Monte-Carlo paths above which a run is aborted.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

/// Levels used by slope fits.
pub const FIT_LEVELS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionTarget {
    Barenblatt,
    Indicator,
}

impl ProjectionTarget {
    pub fn name(self) -> &'static str {
        match self {
            Self::Barenblatt => "barenblatt",
            Self::Indicator => "indicator",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionRow {
    pub target: ProjectionTarget,
    pub cells: usize,
    pub h: f64,
    pub norm_exponent: f64,
    pub projection_error: f64,
    pub restriction_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionStudy {
    pub rows: Vec<ProjectionRow>,
}

impl ProjectionStudy {
    /// Slope of the `P_h` (`restriction = false`) or `tilde R_h` error in `h`.
    pub fn fit(&self, target: ProjectionTarget, restriction: bool) -> Option<SlopeFit> {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.target == target)
            .map(|r| (r.h, if restriction { r.restriction_error } else { r.projection_error }))
            .collect();
        fit_last(&pts, FIT_LEVELS)
    }
}

/// `L^q` errors of `P_h v` and `tilde R_h v` for the Barenblatt profile at
/// `t = 0.1` and the indicator of `(-0.5, 0.5)^d`, with `q` the configured
/// norm exponent.
pub fn run_projection_study(cfg: &ExperimentConfig) -> Result<ProjectionStudy> {
    cfg.validate()?;
    let params = BarenblattParams::unit(cfg.p, cfg.d)?;
    let q = cfg.norm_exponent.unwrap_or(cfg.p);
    let rows: Result<Vec<Vec<ProjectionRow>>> = cfg
        .j_list
        .par_iter()
        .map(|&j| {
            let grid = Grid::new(cfg.half_width, j, cfg.d)?;
            let asm = Assembler::new(&grid, QuadratureRule::gauss_legendre(cfg.quad_order));
            let proj = Projection::new(&asm)?;
            let rest = TildeRestriction::new(&grid)?;
            let smooth = |x: &[f64]| params.value(PROJECTION_TIME, x).unwrap_or(0.0);
            let indicator = BoxIndicator::centered_cube(INDICATOR_HALF_WIDTH, cfg.d);
            let lp = |c: &BasisCoefficients, target: &dyn Fn(&[f64]) -> f64, ind: bool| -> f64 {
                let pow = if ind {
                    asm.lp_distance_pow(c, &indicator, q)
                } else {
                    asm.lp_distance_pow(c, &|x: &[f64]| target(x), q)
                };
                pow.powf(1.0 / q)
            };
            let h = grid.h();
            let ps = proj.apply(&asm, &smooth)?;
            let rs = rest.apply(&asm, &smooth)?;
            let pi = proj.apply(&asm, &indicator)?;
            let ri = rest.apply(&asm, &indicator)?;
            Ok(vec![
                ProjectionRow {
                    target: ProjectionTarget::Barenblatt,
                    cells: j,
                    h,
                    norm_exponent: q,
                    projection_error: lp(&ps, &smooth, false),
                    restriction_error: lp(&rs, &smooth, false),
                },
                ProjectionRow {
                    target: ProjectionTarget::Indicator,
                    cells: j,
                    h,
                    norm_exponent: q,
                    projection_error: lp(&pi, &smooth, true),
                    restriction_error: lp(&ri, &smooth, true),
                },
            ])
        })
        .collect();
    let mut rows: Vec<ProjectionRow> = rows?.into_iter().flatten().collect();
    rows.sort_by_key(|r| (r.target == ProjectionTarget::Indicator, r.cells));
    Ok(ProjectionStudy { rows })
}

/// One entry of a deterministic error table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceCell {
    pub cells: usize,
    pub steps: usize,
    /// Error under [`ErrorRules::tabulated`].
    pub error: f64,
    /// Error under `q`-point Gauss rules in space and time.
    pub error_gauss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub dim: usize,
    pub half_width: f64,
    pub final_time: f64,
    pub cells: Vec<ConvergenceCell>,
}

impl ConvergenceTable {
    pub fn get(&self, j: usize, n: usize) -> Option<&ConvergenceCell> {
        self.cells.iter().find(|c| c.cells == j && c.steps == n)
    }

    /// Slope in `h` at fixed `N` over the given `J` values.
    pub fn spatial_fit(&self, n: usize, js: &[usize]) -> Option<SlopeFit> {
        let pts: Vec<(f64, f64)> = js
            .iter()
            .filter_map(|&j| self.get(j, n).map(|c| (2.0 * self.half_width / j as f64, c.error)))
            .collect();
        fit_last(&pts, pts.len())
    }

    /// Slope in `τ` at fixed `J` over the given `N` values.
    pub fn temporal_fit(&self, j: usize, ns: &[usize]) -> Option<SlopeFit> {
        let pts: Vec<(f64, f64)> =
            ns.iter().filter_map(|&n| self.get(j, n).map(|c| (self.final_time / n as f64, c.error))).collect();
        fit_last(&pts, pts.len())
    }

    pub fn js(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.cells.iter().map(|c| c.cells).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn ns(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.cells.iter().map(|c| c.steps).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

fn deterministic_scheme(cfg: &ExperimentConfig, j: usize, n: usize) -> Result<Scheme> {
    let grid = Grid::new(cfg.half_width, j, cfg.d)?;
    let sc = SchemeConfig::new(cfg.final_time, n, cfg.p).with_quad_order(cfg.quad_order);
    Ok(Scheme::new(&grid, sc)?)
}

/// Barenblatt error for one `(J, N)`; states are consumed as they are produced.
pub fn deterministic_error(cfg: &ExperimentConfig, j: usize, n: usize) -> Result<ConvergenceCell> {
    let scheme = deterministic_scheme(cfg, j, n)?;
    let params = BarenblattParams::unit(cfg.p, cfg.d)?;
    let grid = *scheme.grid();
    let tab = ErrorRules::tabulated(cfg.d);
    let gauss = ErrorRules::gauss(cfg.quad_order);
    let asm_tab = Assembler::new(&grid, tab.space);
    let asm_gauss = Assembler::new(&grid, gauss.space);
    let tau = scheme.tau();
    let mut e_tab = SpacetimeError::new(cfg.p, cfg.t_lo, cfg.final_time, tau, tab.time);
    let mut e_gauss = SpacetimeError::new(cfg.p, cfg.t_lo, cfg.final_time, tau, gauss.time);
    let exact = |t: f64, x: &[f64]| params.value(t, x).unwrap_or(0.0);
    let table = scheme.increments(cfg.seed)?;
    scheme
        .run_observed(&table, |k, u| {
            e_tab.add_step(&asm_tab, k, u, exact);
            e_gauss.add_step(&asm_gauss, k, u, exact);
            Ok(())
        })
        .with_context(|| format!("deterministic run J={j} N={n}"))?;
    Ok(ConvergenceCell { cells: j, steps: n, error: e_tab.value(), error_gauss: e_gauss.value() })
}

pub fn run_convergence_det(cfg: &ExperimentConfig) -> Result<ConvergenceTable> {
    cfg.validate()?;
    if cfg.p <= 2.0 {
        bail!("the Barenblatt reference needs p > 2");
    }
    let cells: Result<Vec<ConvergenceCell>> =
        cfg.pairs().par_iter().map(|&(j, n)| deterministic_error(cfg, j, n)).collect();
    Ok(ConvergenceTable { dim: cfg.d, half_width: cfg.half_width, final_time: cfg.final_time, cells: cells? })
}

/// Monte-Carlo statistics for one `(J, N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticCell {
    pub cells: usize,
    pub steps: usize,
    /// Sample mean and standard error of the pathwise errors.
    pub stats: SampleStats,
    /// `(mean of error^p)^{1/p}`, the `L^p(Ω × (t_lo, T) × D)` estimate.
    pub lp_omega: f64,
    pub failures: usize,
    /// Paths whose analytic support reached the domain boundary.
    pub boundary_hits: usize,
    /// Pathwise errors in path order.
    pub path_errors: Vec<f64>,
}

fn linear_noise_scheme(cfg: &ExperimentConfig, j: usize, n: usize) -> Result<Scheme> {
    let grid = Grid::new(cfg.half_width, j, 1)?;
    let sc = SchemeConfig::new(cfg.final_time, n, 3.0)
        .with_quad_order(cfg.quad_order)
        .with_noise(NoiseModel::Linear { amplitude: cfg.sigma });
    Ok(Scheme::new(&grid, sc)?)
}

/// Pathwise error and boundary flag for one seed.
pub fn stochastic_path_error(scheme: &Scheme, cfg: &ExperimentConfig, seed: u64) -> Result<(f64, bool)> {
    let params = BarenblattParams::unit(3.0, 1)?;
    let table = scheme.increments(seed)?;
    let exact = StochasticBarenblatt::new(params, &table, cfg.sigma)?;
    let rules = ErrorRules::tabulated(1);
    let asm = Assembler::new(scheme.grid(), rules.space);
    let mut err = SpacetimeError::new(3.0, cfg.t_lo, cfg.final_time, scheme.tau(), rules.time);
    scheme.run_observed(&table, |k, u| {
        err.add_step(&asm, k, u, |t, x| exact.value_at(t, x).unwrap_or(0.0));
        Ok(())
    })?;
    let reach = (0..=table.steps()).map(|k| exact.support_radius(k)).fold(0.0, f64::max);
    Ok((err.value(), reach >= cfg.half_width))
}

pub fn stochastic_cell(cfg: &ExperimentConfig, j: usize, n: usize) -> Result<StochasticCell> {
    let scheme = linear_noise_scheme(cfg, j, n)?;
    let results: Vec<Result<(f64, bool)>> = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|k| stochastic_path_error(&scheme, cfg, cfg.seed + k))
        .collect();
    let failures = results.iter().filter(|r| r.is_err()).count();
    if failures as f64 > MAX_FAILURE_FRACTION * cfg.samples as f64 {
        let first = results.into_iter().find_map(|r| r.err()).expect("a failure");
        return Err(first.context(format!("{failures} of {} paths failed at J={j} N={n}", cfg.samples)));
    }
    let ok: Vec<(f64, bool)> = results.into_iter().filter_map(|r| r.ok()).collect();
    let path_errors: Vec<f64> = ok.iter().map(|r| r.0).collect();
    let boundary_hits = ok.iter().filter(|r| r.1).count();
    let stats = SampleStats::from_samples(&path_errors);
    let pow = path_errors.iter().map(|e| e.powi(3)).collect::<KahanSum>().value() / path_errors.len() as f64;
    Ok(StochasticCell {
        cells: j,
        steps: n,
        stats,
        lp_omega: pow.cbrt(),
        failures,
        boundary_hits,
        path_errors,
    })
}

pub fn run_convergence_stoch(cfg: &ExperimentConfig) -> Result<Vec<StochasticCell>> {
    cfg.validate()?;
    if cfg.d != 1 || cfg.p != 3.0 {
        bail!("the stochastic reference solution exists for d = 1, p = 3 only");
    }
    cfg.pairs().iter().map(|&(j, n)| stochastic_cell(cfg, j, n)).collect()
}

/// Support of one state in one dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportRow {
    pub seed: u64,
    pub step: usize,
    pub time: f64,
    /// Outer cell faces of the leftmost and rightmost support cells; NaN if empty.
    pub left: f64,
    pub right: f64,
    pub radius: f64,
    /// Largest distance of a support cell centre from the origin; NaN if empty.
    pub extent: f64,
    /// Every support cell centre lies within `radius + 2h`.
    pub contained: bool,
    pub touches_boundary: bool,
}

pub fn support_row(asm: &Assembler, seed: u64, step: usize, time: f64, u: &BasisCoefficients, radius: f64) -> SupportRow {
    let grid = asm.grid();
    let h = grid.h();
    let cells = discrete_support(asm, u, SUPPORT_THRESHOLD);
    let j = grid.cells_per_dir();
    let mut left = f64::NAN;
    let mut right = f64::NAN;
    let mut contained = true;
    let mut touches = false;
    let mut extent = f64::NAN;
    for &c in &cells {
        let idx = grid.unflatten(c);
        let mut x = [0.0; 2];
        grid.cell_center(idx, &mut x);
        let r = x[..grid.dim()].iter().map(|v| v * v).sum::<f64>().sqrt();
        contained &= r <= radius + 2.0 * h;
        extent = if extent.is_nan() { r } else { extent.max(r) };
        touches |= idx.components().iter().any(|&k| k == 0 || k == j - 1);
        if grid.dim() == 1 {
            left = if left.is_nan() { x[0] - 0.5 * h } else { left.min(x[0] - 0.5 * h) };
            right = if right.is_nan() { x[0] + 0.5 * h } else { right.max(x[0] + 0.5 * h) };
        }
    }
    SupportRow { seed, step, time, left, right, radius, extent, contained, touches_boundary: touches }
}

/// Per-step supports against the analytic radius: deterministic when
/// `sigma = 0`, otherwise pathwise for `σ(u) = sigma u` over `samples` seeds.
/// Uses the first `(J, N)` pair.
pub fn run_support_study(cfg: &ExperimentConfig) -> Result<Vec<SupportRow>> {
    cfg.validate()?;
    if cfg.d != 1 {
        bail!("the support study is one-dimensional");
    }
    let (j, n) = cfg.pairs()[0];
    let params = BarenblattParams::unit(cfg.p, 1)?;
    if cfg.sigma == 0.0 {
        let scheme = deterministic_scheme(cfg, j, n)?;
        let traj = scheme.run_path(cfg.seed)?;
        return Ok(traj
            .states()
            .iter()
            .enumerate()
            .map(|(k, u)| {
                let t = traj.time(k);
                support_row(scheme.assembler(), cfg.seed, k, t, u, params.support_radius(t))
            })
            .collect());
    }
    if cfg.p != 3.0 {
        bail!("the pathwise support radius is known for p = 3 only");
    }
    let scheme = linear_noise_scheme(cfg, j, n)?;
    let per_path: Result<Vec<Vec<SupportRow>>> = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|k| {
            let seed = cfg.seed + k;
            let table = scheme.increments(seed)?;
            let exact = StochasticBarenblatt::new(params, &table, cfg.sigma)?;
            let mut rows = Vec::with_capacity(n + 1);
            scheme.run_observed(&table, |step, u| {
                let t = step as f64 * scheme.tau();
                rows.push(support_row(scheme.assembler(), seed, step, t, u, exact.support_radius(step)));
                Ok(())
            })?;
            Ok(rows)
        })
        .collect();
    Ok(per_path?.into_iter().flatten().collect())
}

/// One space-time-noise realization.
#[derive(Debug, Clone, PartialEq)]
pub struct SpacetimeRun {
    pub seed: u64,
    pub trajectory: Trajectory,
    /// Supports measured against the deterministic Barenblatt radius.
    pub support: Vec<SupportRow>,
}

/// Space-time noise `σ₀ Σ_k u χ_k / |D_k| dβ_k` for `samples` seeds, using
/// the first `(J, N)` pair.
pub fn run_spacetime(cfg: &ExperimentConfig) -> Result<Vec<SpacetimeRun>> {
    cfg.validate()?;
    if cfg.d != 1 {
        bail!("the space-time noise study is one-dimensional");
    }
    let (j, n) = cfg.pairs()[0];
    let grid = Grid::new(cfg.half_width, j, 1)?;
    let noise = NoiseModel::SpaceTime { amplitude: cfg.sigma0, lambda_b: cfg.lambda_b };
    let sc = SchemeConfig::new(cfg.final_time, n, cfg.p).with_quad_order(cfg.quad_order).with_noise(noise);
    let scheme = Scheme::new(&grid, sc)?;
    let params = BarenblattParams::unit(cfg.p, 1)?;
    (0..cfg.samples as u64)
        .into_par_iter()
        .map(|k| {
            let seed = cfg.seed + k;
            let trajectory = scheme.run_path(seed)?;
            let support = trajectory
                .states()
                .iter()
                .enumerate()
                .map(|(step, u)| {
                    let t = trajectory.time(step);
                    support_row(scheme.assembler(), seed, step, t, u, params.support_radius(t))
                })
                .collect();
            Ok(SpacetimeRun { seed, trajectory, support })
        })
        .collect()
}

/// Increments for external use, e.g. dumping a path.
pub fn path_increments(scheme: &Scheme, seed: u64) -> Result<IncrementTable> {
    Ok(scheme.increments(seed)?)
}
