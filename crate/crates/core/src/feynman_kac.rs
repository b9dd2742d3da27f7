//! Monte Carlo estimators of `T_t φ(q₀)` by jump-diffusion simulation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::kernels::{check_time, LevyIncrementLaw};
use crate::linalg::cholesky;
use crate::symbols::{tau_transform, HamiltonSymbol, Mat, Point};

/// Sign of the stochastic-integral term in the Girsanov weight, fixed by calibration against the
/// constant-coefficient closed form.
pub const GIRSANOV_SIGN: f64 = -1.0;
pub const MIN_PATHS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathState<const D: usize> {
    pub position: Point<D>,
    pub log_weight: f64,
    /// Stream index of the path's generator.
    pub rng_stream: u64,
}

impl<const D: usize> PathState<D> {
    pub fn start(position: Point<D>, rng_stream: u64) -> Self {
        Self {
            position,
            log_weight: 0.0,
            rng_stream,
        }
    }
}

/// Generator for path `index` under `seed`; streams never overlap.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn diffusion_factor<const D: usize>(a: &Mat<D>, at: &Point<D>) -> Result<Mat<D>> {
    cholesky(a).ok_or_else(|| Error::Singular {
        at: at.iter().copied().collect(),
        cond: f64::INFINITY,
    })
}

fn standard_normal<const D: usize, R: Rng + ?Sized>(rng: &mut R) -> Point<D> {
    Point::<D>::from_fn(|_, _| rng.sample(StandardNormal))
}

/// One step of the exact `F_1` chain of the τ-transformed symbol:
/// `X' = X − Δt·b_τ(X) + √(2Δt)·L(X)Z + J`, `log w' = log w − Δt·c_τ(X)`.
#[derive(Clone, Debug)]
pub struct StepSimulator<const D: usize> {
    effective: HamiltonSymbol<D>,
    jumps: LevyIncrementLaw<D>,
    dt: f64,
}

impl<const D: usize> StepSimulator<D> {
    pub fn new(h: &HamiltonSymbol<D>, tau: f64, dt: f64) -> Result<Self> {
        check_time(dt)?;
        let effective = tau_transform(h, tau)?;
        let jumps = LevyIncrementLaw::new(h.jumps(), dt)?;
        Ok(Self { effective, jumps, dt })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step<R: Rng + ?Sized>(&self, state: &PathState<D>, rng: &mut R) -> Result<PathState<D>> {
        let x = state.position;
        let quad = self.effective.quad();
        let l = diffusion_factor(&quad.a().value(&x), &x)?;
        let z = standard_normal::<D, R>(rng);
        let jump = self.jumps.sample(rng);
        Ok(PathState {
            position: x - quad.b().value(&x) * self.dt + l * z * (2.0 * self.dt).sqrt() + jump,
            log_weight: state.log_weight - self.dt * quad.c().value(&x),
            rng_stream: state.rng_stream,
        })
    }
}

pub fn simulate_step<const D: usize, R: Rng + ?Sized>(
    h: &HamiltonSymbol<D>,
    tau: f64,
    dt: f64,
    state: &PathState<D>,
    rng: &mut R,
) -> Result<PathState<D>> {
    StepSimulator::new(h, tau, dt)?.step(state, rng)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_paths: usize,
}

impl McEstimate {
    fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self {
            mean,
            stderr: (var / n).sqrt(),
            n_paths: samples.len(),
        }
    }

    /// `(mean − target) / stderr`
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target) / self.stderr
    }
}

fn check_counts(n_steps: usize, n_paths: usize) -> Result<()> {
    if n_steps == 0 {
        return Err(invalid("n_steps", "at least one step is required"));
    }
    if n_paths < MIN_PATHS {
        return Err(invalid("n_paths", format!("at least {MIN_PATHS} paths are required")));
    }
    Ok(())
}

/// Per-path samples, computed in parallel and reduced in path order.
fn run_paths(n_paths: usize, path: impl Fn(u64) -> Result<f64> + Sync + Send) -> Result<McEstimate> {
    let samples: Vec<f64> = (0..n_paths as u64).into_par_iter().map(path).collect::<Result<_>>()?;
    Ok(McEstimate::from_samples(&samples))
}

/// Sample mean and standard error of `e^{log w}·φ(X_t)` over `n_paths` paths of `n_steps` steps.
#[allow(clippy::too_many_arguments)]
pub fn mc_estimate<const D: usize>(
    h: &HamiltonSymbol<D>,
    tau: f64,
    t: f64,
    q0: &Point<D>,
    phi: &(dyn Fn(&Point<D>) -> f64 + Sync),
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_counts(n_steps, n_paths)?;
    check_time(t)?;
    let sim = StepSimulator::new(h, tau, t / n_steps as f64)?;
    run_paths(n_paths, |i| {
        let mut rng = path_rng(seed, i);
        let mut state = PathState::start(*q0, i);
        for _ in 0..n_steps {
            state = sim.step(&state, &mut rng)?;
        }
        Ok(state.log_weight.exp() * phi(&state.position))
    })
}

/// Driftless-diffusion estimator reweighted by
/// `exp(σ·½∫A^{−1}b·dX − ¼∫b·A^{−1}b ds − ∫c ds)` with `σ = GIRSANOV_SIGN`.
#[allow(clippy::too_many_arguments)]
pub fn mc_estimate_girsanov<const D: usize>(
    h: &HamiltonSymbol<D>,
    t: f64,
    q0: &Point<D>,
    phi: &(dyn Fn(&Point<D>) -> f64 + Sync),
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate> {
    mc_estimate_girsanov_signed(h, t, q0, phi, n_steps, n_paths, seed, GIRSANOV_SIGN)
}

/// [`mc_estimate_girsanov`] with an explicit sign for the stochastic integral.
#[allow(clippy::too_many_arguments)]
pub fn mc_estimate_girsanov_signed<const D: usize>(
    h: &HamiltonSymbol<D>,
    t: f64,
    q0: &Point<D>,
    phi: &(dyn Fn(&Point<D>) -> f64 + Sync),
    n_steps: usize,
    n_paths: usize,
    seed: u64,
    sign: f64,
) -> Result<McEstimate> {
    check_counts(n_steps, n_paths)?;
    check_time(t)?;
    if !h.jumps().is_empty() {
        return Err(invalid("levy", "the reweighted estimator is defined without jumps"));
    }
    let dt = t / n_steps as f64;
    let quad = h.quad();
    run_paths(n_paths, |i| {
        let mut rng = path_rng(seed, i);
        let mut x = *q0;
        let mut log_w = 0.0;
        for _ in 0..n_steps {
            let a = quad.a().value(&x);
            let l = diffusion_factor(&a, &x)?;
            let z = standard_normal::<D, _>(&mut rng);
            let dx = l * z * (2.0 * dt).sqrt();
            let b = quad.b().value(&x);
            if b != Point::<D>::zeros() {
                let ainv_b = a.try_inverse().ok_or_else(|| Error::Singular {
                    at: x.iter().copied().collect(),
                    cond: f64::INFINITY,
                })? * b;
                log_w += sign * 0.5 * ainv_b.dot(&dx) - 0.25 * ainv_b.dot(&b) * dt;
            }
            log_w -= quad.c().value(&x) * dt;
            x += dx;
        }
        Ok(log_w.exp() * phi(&x))
    })
}
