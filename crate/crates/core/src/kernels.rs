//! One-step transition kernels of `F_τ(t)`.
//!
//! The τ-symbol `e^{−tH}` factors as `e^{−th} · e^{−tr}`; its inverse Fourier transform is
//! the Gaussian density `g^x_t` (frozen at the ordering point `x = τq + (1−τ)q₁`)
//! convolved with the law `μ_t` of the compound-Poisson increment. For finite activity
//! `μ_t` is atomic, so the convolution is a finite sum of shifted Gaussians.

use std::f64::consts::PI;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use statrs::function::factorial::ln_factorial;

use crate::linalg::{det, sym_eigen_bounds};
use crate::error::{invalid, Error, Result};
use crate::symbols::{check_tau, HamiltonSymbol, LevySpec, Mat, Point, QuadraticSymbol};

/// `A(x)` with a larger eigenvalue ratio is treated as singular.
pub const CONDITION_LIMIT: f64 = 1e12;
/// Compound-Poisson atoms lighter than this are dropped from kernel sums.
pub const ATOM_MASS_FLOOR: f64 = 1e-16;
/// Gaussian truncation radius in standard deviations.
pub const TRUNCATION_SIGMAS: f64 = 10.0;

pub(crate) fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid("t", format!("time step {t} must be positive and finite")));
    }
    Ok(())
}

/// `g^x_t(z) = (4πt)^{−d/2} (det A)^{−1/2} e^{−tc} exp(−(z − tb)·A^{−1}(z − tb) / 4t)`
/// with `A, b, c` frozen at `x`.
#[derive(Clone, Copy, Debug)]
pub struct GaussianParams<const D: usize> {
    mean: Point<D>,
    precision: Mat<D>,
    prefactor: f64,
    potential_factor: f64,
}

impl<const D: usize> GaussianParams<D> {
    pub fn new(quad: &QuadraticSymbol<D>, x: &Point<D>, t: f64) -> Result<Self> {
        let a = quad.a().value(x);
        let (min, max) = sym_eigen_bounds(&a);
        if !(min > 0.0) || max / min > CONDITION_LIMIT {
            return Err(Error::Singular {
                at: x.iter().copied().collect(),
                cond: if min > 0.0 { max / min } else { f64::INFINITY },
            });
        }
        let inv = a.try_inverse().ok_or_else(|| Error::Singular {
            at: x.iter().copied().collect(),
            cond: f64::INFINITY,
        })?;
        let det = det(&a);
        let potential_factor = (-t * quad.c().value(x)).exp();
        Ok(Self {
            mean: quad.b().value(x) * t,
            precision: inv / (4.0 * t),
            prefactor: potential_factor / ((4.0 * PI * t).powf(D as f64 / 2.0) * det.sqrt()),
            potential_factor,
        })
    }

    #[inline]
    pub fn eval(&self, z: &Point<D>) -> f64 {
        let d = z - self.mean;
        self.prefactor * (-d.dot(&(self.precision * d))).exp()
    }

    /// Total mass `e^{−tc(x)}`.
    pub fn mass(&self) -> f64 {
        self.potential_factor
    }

    pub fn mean(&self) -> Point<D> {
        self.mean
    }
}

pub fn gaussian_kernel<const D: usize>(
    h: &HamiltonSymbol<D>,
    x: &Point<D>,
    t: f64,
    z: &Point<D>,
) -> Result<f64> {
    check_time(t)?;
    Ok(GaussianParams::new(h.quad(), x, t)?.eval(z))
}

/// Poisson series depth with tail below ~1e−10: `ceil(λt + 8√(λt) + 8)`.
pub fn default_series_depth(lambda_t: f64) -> usize {
    (lambda_t + 8.0 * lambda_t.sqrt() + 8.0).ceil() as usize
}

/// `P(N > depth)` for `N ~ Poisson(mean)`, summed directly so small tails keep precision.
pub fn poisson_tail(mean: f64, depth: usize) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    let mut k = depth + 1;
    let mut term = (-mean + k as f64 * mean.ln() - ln_factorial(k as u64)).exp();
    let mut sum = 0.0;
    while term > 0.0 && (term > 1e-30 * sum || (k as f64) < mean) {
        sum += term;
        k += 1;
        term *= mean / k as f64;
    }
    sum
}

/// Atomic decomposition `{(location_m, mass_m)}` of a truncated compound-Poisson law.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomicLaw<const D: usize> {
    pub atoms: Vec<(Point<D>, f64)>,
    /// Poisson mass beyond the series depth (not represented by `atoms`).
    pub tail: f64,
}

impl<const D: usize> AtomicLaw<D> {
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|(_, m)| m).sum()
    }

    pub fn max_reach(&self) -> f64 {
        self.atoms.iter().map(|(y, _)| y.norm()).fold(0.0, f64::max)
    }
}

/// Law `μ_t` of `J = Σ_{i ≤ K} Y_i − tγ`, with `K ~ Poisson(λt)` and `Y_i` drawn from the
/// atoms with probabilities `w_j / λ`.
#[derive(Clone, Debug)]
pub struct LevyIncrementLaw<const D: usize> {
    spec: LevySpec<D>,
    t: f64,
    shift: Point<D>,
    series_depth: usize,
    counts: Option<Poisson<f64>>,
    jumps: Option<WeightedIndex<f64>>,
}

impl<const D: usize> LevyIncrementLaw<D> {
    pub fn new(spec: &LevySpec<D>, t: f64) -> Result<Self> {
        check_time(t)?;
        let lambda_t = spec.rate() * t;
        let (counts, jumps) = if spec.is_empty() {
            (None, None)
        } else {
            let counts = Poisson::new(lambda_t)
                .map_err(|e| invalid("levy", format!("Poisson intensity {lambda_t}: {e}")))?;
            let jumps = WeightedIndex::new(spec.atoms().iter().map(|(_, w)| *w))
                .map_err(|e| invalid("levy.w", e.to_string()))?;
            (Some(counts), Some(jumps))
        };
        Ok(Self {
            spec: spec.clone(),
            t,
            shift: -spec.gamma() * t,
            series_depth: default_series_depth(lambda_t),
            counts,
            jumps,
        })
    }

    pub fn with_series_depth(mut self, depth: usize) -> Self {
        self.series_depth = depth;
        self
    }

    pub fn spec(&self) -> &LevySpec<D> {
        &self.spec
    }
    pub fn t(&self) -> f64 {
        self.t
    }
    /// Deterministic part `−tγ`.
    pub fn shift(&self) -> Point<D> {
        self.shift
    }
    pub fn series_depth(&self) -> usize {
        self.series_depth
    }

    /// Exact draw from `μ_t`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point<D> {
        let (Some(counts), Some(jumps)) = (&self.counts, &self.jumps) else {
            return self.shift;
        };
        let n = counts.sample(rng) as u64;
        let atoms = self.spec.atoms();
        let mut acc = self.shift;
        for _ in 0..n {
            acc += atoms[jumps.sample(rng)].0;
        }
        acc
    }

    /// Truncated atomic decomposition over all jump-count vectors with total ≤ series depth.
    pub fn decompose(&self) -> AtomicLaw<D> {
        let lambda_t = self.spec.rate() * self.t;
        if self.spec.is_empty() {
            return AtomicLaw {
                atoms: vec![(self.shift, 1.0)],
                tail: 0.0,
            };
        }
        let log_rates: Vec<f64> = self.spec.atoms().iter().map(|(_, w)| (w * self.t).ln()).collect();
        let mut atoms = Vec::new();
        let mut counts = vec![0usize; log_rates.len()];
        for total in 0..=self.series_depth {
            weak_compositions(total, &mut counts, 0, &mut |n| {
                let mut log_mass = -lambda_t;
                let mut loc = self.shift;
                for (j, &nj) in n.iter().enumerate() {
                    if nj > 0 {
                        log_mass += nj as f64 * log_rates[j] - ln_factorial(nj as u64);
                        loc += self.spec.atoms()[j].0 * nj as f64;
                    }
                }
                atoms.push((loc, log_mass.exp()));
            });
        }
        AtomicLaw {
            atoms,
            tail: poisson_tail(lambda_t, self.series_depth),
        }
    }
}

/// Calls `f` with every vector of nonnegative counts summing to `total`.
fn weak_compositions(total: usize, counts: &mut [usize], pos: usize, f: &mut impl FnMut(&[usize])) {
    if pos + 1 == counts.len() {
        counts[pos] = total;
        f(counts);
        return;
    }
    for k in (0..=total).rev() {
        counts[pos] = k;
        weak_compositions(total - k, counts, pos + 1, f);
    }
    counts[pos] = 0;
}

pub fn levy_increment_sample<const D: usize, R: Rng + ?Sized>(
    law: &LevyIncrementLaw<D>,
    rng: &mut R,
) -> Point<D> {
    law.sample(rng)
}

pub fn levy_density<const D: usize>(law: &LevyIncrementLaw<D>) -> AtomicLaw<D> {
    law.decompose()
}

/// `(q, q₁) ↦ [g^{τq+(1−τ)q₁}_t ∗ μ_t](q − q₁)` for a fixed symbol, τ and t.
///
/// With `J ~ μ_t` the kernel is the density of `Z = tb + G − J` (`G ~ N(0, 2tA)`), i.e.
/// `Σ_m mass_m · g(z + location_m)`. This is the orientation whose Fourier transform
/// `∫ e^{−ip·z} K(z) dz` equals `e^{−tH(x, p)}`.
#[derive(Clone, Debug)]
pub struct StepKernel<'a, const D: usize> {
    symbol: &'a HamiltonSymbol<D>,
    tau: f64,
    t: f64,
    jumps: Vec<(Point<D>, f64)>,
    tail: f64,
}

impl<'a, const D: usize> StepKernel<'a, D> {
    pub fn new(symbol: &'a HamiltonSymbol<D>, tau: f64, t: f64) -> Result<Self> {
        check_tau(tau)?;
        check_time(t)?;
        let law = LevyIncrementLaw::new(symbol.jumps(), t)?.decompose();
        let mut dropped = 0.0;
        let jumps = law
            .atoms
            .into_iter()
            .filter(|(_, m)| {
                let keep = *m >= ATOM_MASS_FLOOR;
                if !keep {
                    dropped += m;
                }
                keep
            })
            .collect();
        Ok(Self {
            symbol,
            tau,
            t,
            jumps,
            tail: law.tail + dropped,
        })
    }

    pub fn symbol(&self) -> &'a HamiltonSymbol<D> {
        self.symbol
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn t(&self) -> f64 {
        self.t
    }
    pub fn jumps(&self) -> &[(Point<D>, f64)] {
        &self.jumps
    }
    /// Jump-law mass not represented in the kernel sum.
    pub fn jump_tail(&self) -> f64 {
        self.tail
    }

    #[inline]
    pub fn midpoint(&self, q: &Point<D>, q1: &Point<D>) -> Point<D> {
        q * self.tau + q1 * (1.0 - self.tau)
    }

    pub fn params_at(&self, x: &Point<D>) -> Result<GaussianParams<D>> {
        GaussianParams::new(self.symbol.quad(), x, self.t)
    }

    #[inline]
    pub fn eval_with(&self, params: &GaussianParams<D>, z: &Point<D>) -> f64 {
        self.jumps.iter().map(|(loc, m)| m * params.eval(&(z + loc))).sum()
    }

    pub fn eval(&self, q: &Point<D>, q1: &Point<D>) -> Result<f64> {
        let params = self.params_at(&self.midpoint(q, q1))?;
        Ok(self.eval_with(&params, &(q - q1)))
    }

    /// `R(t) = t·sup|b| + 10·√(2·A0·t) + max jump reach`.
    pub fn reach(&self, sup_b: f64) -> f64 {
        let jump_reach = self.jumps.iter().map(|(y, _)| y.norm()).fold(0.0, f64::max);
        self.t * sup_b
            + TRUNCATION_SIGMAS * (2.0 * self.symbol.quad().a_max() * self.t).sqrt()
            + jump_reach
    }
}

pub fn one_step_kernel<const D: usize>(
    h: &HamiltonSymbol<D>,
    tau: f64,
    t: f64,
    q: &Point<D>,
    q1: &Point<D>,
) -> Result<f64> {
    StepKernel::new(h, tau, t)?.eval(q, q1)
}
