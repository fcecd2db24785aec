use std::path::PathBuf;
use std::time::Instant;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use spme_core::stepper::InitialCondition;
use spme_core::{Assembler, Grid, NoiseModel, QuadratureRule, Scheme, SchemeConfig};
use spme_harness::config::{ExperimentConfig, ExperimentKind};
use spme_harness::experiments::{self, ProjectionTarget};
use spme_harness::output::{self, fmt6};

#[derive(Parser)]
#[command(name = "spme", version, about = "Very-weak finite elements for stochastic porous-medium equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its CSV files.
    Run(RunArgs),
    /// Print the mass matrix `(φ_j, ψ_i)` as `i j value` lines.
    Mass {
        #[arg(long = "J")]
        cells: usize,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long = "L", default_value_t = 1.5)]
        half_width: f64,
    },
    /// Run one path and write `n,t,c_1,...` rows.
    Trajectory {
        #[arg(long = "J")]
        cells: usize,
        #[arg(long = "N")]
        steps: usize,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, default_value_t = 3.0)]
        p: f64,
        #[arg(long = "L", default_value_t = 1.5)]
        half_width: f64,
        #[arg(long = "T", default_value_t = 0.1)]
        final_time: f64,
        /// Amplitude of linear noise `σ(u) = sigma u`; 0 is deterministic.
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    experiment: Option<ExperimentKind>,
    /// TOML file; flags given here override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "J-list", value_delimiter = ',')]
    j_list: Option<Vec<usize>>,
    #[arg(long = "N-list", value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    /// Pair the lists elementwise instead of crossing them.
    #[arg(long)]
    paired: bool,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long = "L")]
    half_width: Option<f64>,
    #[arg(long = "T")]
    final_time: Option<f64>,
    #[arg(long)]
    t_lo: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    sigma0: Option<f64>,
    #[arg(long)]
    lambda_b: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    quad_order: Option<usize>,
    /// Error norm exponent for the projection study (defaults to p).
    #[arg(long = "norm-p")]
    norm_exponent: Option<f64>,
}

impl RunArgs {
    fn resolve(self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = self.$field { c.$field = v; } )* };
        }
        set!(experiment, j_list, n_list, p, d, half_width, final_time, t_lo, sigma, sigma0, samples, seed, out, quad_order);
        if self.lambda_b.is_some() {
            c.lambda_b = self.lambda_b;
        }
        if self.norm_exponent.is_some() {
            c.norm_exponent = self.norm_exponent;
        }
        c.paired |= self.paired;
        c.validate()?;
        Ok(c)
    }
}

fn run(cfg: &ExperimentConfig) -> Result<()> {
    let start = Instant::now();
    let name = cfg.experiment.name();
    match cfg.experiment {
        ExperimentKind::Project => {
            let study = experiments::run_projection_study(cfg)?;
            output::write_projection(&cfg.out.join("project.csv"), &study)?;
            for r in &study.rows {
                println!(
                    "{:<10} J={:<4} P_h={:<12} tildeR_h={}",
                    r.target.name(),
                    r.cells,
                    fmt6(r.projection_error),
                    fmt6(r.restriction_error)
                );
            }
            for target in [ProjectionTarget::Barenblatt, ProjectionTarget::Indicator] {
                for (label, restr) in [("P_h", false), ("tildeR_h", true)] {
                    if let Some(f) = study.fit(target, restr) {
                        println!("slope {} {label}: {}", target.name(), fmt6(f.slope));
                    }
                }
            }
        }
        ExperimentKind::ConvergeDet => {
            let table = experiments::run_convergence_det(cfg)?;
            output::write_convergence_long(&cfg.out.join(format!("{name}_{}d_long.csv", cfg.d)), &table)?;
            output::write_convergence_wide(&cfg.out.join(format!("{name}_{}d.csv", cfg.d)), &table)?;
            for c in &table.cells {
                println!("J={:<4} N={:<5} error={:<12} gauss={}", c.cells, c.steps, fmt6(c.error), fmt6(c.error_gauss));
            }
        }
        ExperimentKind::ConvergeStoch => {
            let cells = experiments::run_convergence_stoch(cfg)?;
            output::write_stochastic(&cfg.out.join(format!("{name}.csv")), &cells)?;
            for c in &cells {
                println!(
                    "J={:<4} N={:<5} mean={:<12} se={:<12} lp={:<12} failures={} boundary={}",
                    c.cells,
                    c.steps,
                    fmt6(c.stats.mean),
                    fmt6(c.stats.std_error),
                    fmt6(c.lp_omega),
                    c.failures,
                    c.boundary_hits
                );
            }
        }
        ExperimentKind::Support => {
            let rows = experiments::run_support_study(cfg)?;
            output::write_support(&cfg.out.join("support.csv"), &rows)?;
            let bad = rows.iter().filter(|r| !r.contained).count();
            let touch = rows.iter().filter(|r| r.touches_boundary).count();
            println!("{} rows, {bad} not contained, {touch} touching the boundary", rows.len());
        }
        ExperimentKind::Spacetime => {
            let runs = experiments::run_spacetime(cfg)?;
            output::write_spacetime(&cfg.out, &runs)?;
            let bad: usize = runs.iter().map(|r| r.support.iter().filter(|s| !s.contained).count()).sum();
            println!("{} paths, {bad} states outside the deterministic radius + 2h", runs.len());
        }
    }
    eprintln!("{name} finished in {:.1?}, output in {}", start.elapsed(), cfg.out.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run(&args.resolve()?),
        Command::Mass { cells, d, half_width } => {
            let grid = Grid::new(half_width, cells, d)?;
            let asm = Assembler::new(&grid, QuadratureRule::gauss_legendre(3));
            output::write_matrix(&mut std::io::stdout().lock(), &asm.mass_matrix())
        }
        Command::Trajectory { cells, steps, d, p, half_width, final_time, sigma, seed, out } => {
            let grid = Grid::new(half_width, cells, d)?;
            let noise = if sigma == 0.0 { NoiseModel::None } else { NoiseModel::Linear { amplitude: sigma } };
            let sc = SchemeConfig::new(final_time, steps, p).with_noise(noise).with_initial(InitialCondition::DeltaRegularized);
            let traj = Scheme::new(&grid, sc)?.run_path(seed)?;
            output::write_trajectory(&out, &traj)
        }
    }
}
