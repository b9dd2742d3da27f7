//! Experiment runner behind the `tauquant` binary: JSON config in, CSV out.

pub mod config;
pub mod table;

use std::time::Instant;

use tauquant::feynman_kac::{mc_estimate, mc_estimate_girsanov, McEstimate};
use tauquant::generator::SmoothTestFunction;
use tauquant::grid::GridFunction;
use tauquant::kernels::StepKernel;
use tauquant::phase_space::{hff_evaluate, OscillatoryQuadSpec};
use tauquant::presets::Preset;
use tauquant::reference::{exact_solution_on_grid, ConstantCoeffProblem};
use tauquant::semigroup::{chernoff_iterate, chernoff_sweep};
use tauquant::symbols::{tau_transform, HamiltonSymbol, Point};

pub use config::{Experiment, ExperimentConfig};
pub use table::{Cell, Table};

pub const CONVERGE_HEADER: &[&str] = &["n", "l1_error_vs_reference", "l1_norm", "wall_ms"];
pub const TAU_COMPARE_HEADER: &[&str] = &["n", "gap_tau_pair", "gap_transformed"];
pub const MC_VALIDATE_HEADER: &[&str] = &["estimator", "mean", "stderr", "grid_value", "z_score"];
pub const NORM_GROWTH_HEADER: &[&str] = &["n", "t", "k_emp", "k_bound"];
pub const HFF_CHECK_HEADER: &[&str] = &["n", "hff_value", "lff_value", "abs_diff"];

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Guard(tauquant::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Guard(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<tauquant::Error> for CliError {
    fn from(e: tauquant::Error) -> Self {
        match e {
            tauquant::Error::NumericalGuard { .. } => CliError::Guard(e),
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Converge,
    TauCompare,
    McValidate,
    NormGrowth,
    HffCheck,
}

pub fn run(command: Command, exp: &Experiment) -> Result<Table, CliError> {
    match command {
        Command::Converge => run_converge(exp),
        Command::TauCompare => run_tau_compare(exp),
        Command::McValidate => run_mc_validate(exp),
        Command::NormGrowth => run_norm_growth(exp),
        Command::HffCheck => run_hff_check(exp),
    }
}

fn datum_on_grid(exp: &Experiment) -> GridFunction<1> {
    exp.datum.sample(&exp.grid)
}

/// L1 distance of each Chernoff iterate from the exact solution (constant preset) or the finest-n iterate.
pub fn run_converge(exp: &Experiment) -> Result<Table, CliError> {
    let ns = exp.require_sweep()?;
    let phi = datum_on_grid(exp);
    let sweep = chernoff_sweep(&exp.symbol, exp.tau, exp.t, ns, &phi)?;
    let reference = if exp.preset == Preset::Constant {
        let prob = ConstantCoeffProblem::from_symbol(&exp.symbol)?;
        exact_solution_on_grid(&prob, exp.t, &exp.datum, &exp.grid)?
    } else {
        let finest = sweep.iter().max_by_key(|row| row.n).expect("sweep is nonempty");
        finest.iterate.clone()
    };
    let mut table = Table::new(CONVERGE_HEADER);
    for row in &sweep {
        table.push(vec![
            Cell::Int(row.n),
            Cell::Float(row.iterate.l1_distance(&reference)),
            Cell::Float(row.l1_norm),
            Cell::Float(row.wall_ms),
        ]);
    }
    Ok(table)
}

/// Gaps of the τ-iterate from the 1-iterate of the same symbol and of the transformed symbol.
pub fn run_tau_compare(exp: &Experiment) -> Result<Table, CliError> {
    let ns = exp.require_sweep()?;
    let phi = datum_on_grid(exp);
    let transformed = tau_transform(&exp.symbol, exp.tau)?;
    let mut table = Table::new(TAU_COMPARE_HEADER);
    for &n in ns {
        let u = chernoff_iterate(&exp.symbol, exp.tau, exp.t, n, &phi)?;
        let pair = chernoff_iterate(&exp.symbol, 1.0, exp.t, n, &phi)?;
        let moved = chernoff_iterate(&transformed, 1.0, exp.t, n, &phi)?;
        table.push(vec![
            Cell::Int(n),
            Cell::Float(u.l1_distance(&pair)),
            Cell::Float(u.l1_distance(&moved)),
        ]);
    }
    Ok(table)
}

fn has_drift(h: &HamiltonSymbol<1>, exp: &Experiment) -> bool {
    let b = h.quad().b();
    (0..exp.grid.len()).any(|i| b.value(&exp.grid.node(i))[0] != 0.0)
}

fn mc_row(name: &str, est: &McEstimate, grid_value: f64) -> Vec<Cell> {
    vec![
        Cell::Text(name.into()),
        Cell::Float(est.mean),
        Cell::Float(est.stderr),
        Cell::Float(grid_value),
        Cell::Float(est.z_score(grid_value)),
    ]
}

/// Monte Carlo estimates at the grid node nearest the origin against the `n = steps` grid iterate.
pub fn run_mc_validate(exp: &Experiment) -> Result<Table, CliError> {
    let mc = exp.require_mc()?;
    let phi = datum_on_grid(exp);
    let q0 = exp.origin_node();
    let datum = exp.datum;
    let f = move |q: &Point<1>| datum.eval(q);
    let grid_value = |h: &HamiltonSymbol<1>| -> Result<f64, CliError> {
        let u = chernoff_iterate(h, 1.0, exp.t, mc.steps, &phi)?;
        Ok(u.value_at(&q0).expect("origin node lies on the grid"))
    };

    let mut table = Table::new(MC_VALIDATE_HEADER);
    let drift = mc_estimate(&exp.symbol, exp.tau, exp.t, &q0, &f, mc.steps, mc.paths, mc.seed)?;
    let transformed = tau_transform(&exp.symbol, exp.tau)?;
    table.push(mc_row("drift", &drift, grid_value(&transformed)?));
    if has_drift(&exp.symbol, exp) {
        if exp.symbol.jumps().is_empty() {
            let g = mc_estimate_girsanov(&exp.symbol, exp.t, &q0, &f, mc.steps, mc.paths, mc.seed)?;
            table.push(mc_row("girsanov", &g, grid_value(&exp.symbol)?));
        } else {
            log::warn!("skipping the reweighted estimator: it is defined without jumps");
        }
    }
    Ok(table)
}

/// Empirical growth rate of the iterates against `max(0, −min c)`.
pub fn run_norm_growth(exp: &Experiment) -> Result<Table, CliError> {
    let ns = exp.require_sweep()?;
    let phi = datum_on_grid(exp);
    let norm = phi.l1_norm();
    let bound = (-exp.preset.min_potential()).max(0.0);
    let mut table = Table::new(NORM_GROWTH_HEADER);
    for &n in ns {
        let u = chernoff_iterate(&exp.symbol, exp.tau, exp.t, n, &phi)?;
        table.push(vec![
            Cell::Int(n),
            Cell::Float(exp.t),
            Cell::Float((u.l1_norm() / norm).ln() / exp.t),
            Cell::Float(bound),
        ]);
    }
    Ok(table)
}

/// Phase-space n-slice integral against the Chernoff iterate at the grid node nearest the origin.
pub fn run_hff_check(exp: &Experiment) -> Result<Table, CliError> {
    let ns = exp.require_sweep()?;
    let phi = SmoothTestFunction::gaussian(exp.datum.mean, 1.0);
    let sampled = phi.sample(&exp.grid);
    let x = exp.origin_node();
    let quad = exp.symbol.quad();
    let sup_b = (0..exp.grid.len())
        .map(|i| quad.b().value(&exp.grid.node(i)).norm())
        .fold(0.0, f64::max);
    let mut table = Table::new(HFF_CHECK_HEADER);
    for &n in ns {
        let dt = exp.t / n as f64;
        let start = Instant::now();
        let reach = StepKernel::new(&exp.symbol, exp.tau, dt)?.reach(sup_b);
        let spec = OscillatoryQuadSpec::for_kernel(quad.a0(), exp.preset.min_potential(), dt, reach, reach)?;
        let hff = hff_evaluate(&exp.symbol, exp.tau, exp.t, n, &phi, x[0], &spec, &exp.grid, reach)?;
        let lff = chernoff_iterate(&exp.symbol, exp.tau, exp.t, n, &sampled)?
            .value_at(&x)
            .expect("origin node lies on the grid");
        log::info!("hff n={n} took {:.1} ms", start.elapsed().as_secs_f64() * 1e3);
        table.push(vec![
            Cell::Int(n),
            Cell::Float(hff.re),
            Cell::Float(lff),
            Cell::Float((hff.re - lff).hypot(hff.im)),
        ]);
    }
    Ok(table)
}
