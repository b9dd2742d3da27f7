//! Piecewise-constant phase-space paths and the p-integrals of the Hamiltonian Feynman formula.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::generator::SmoothTestFunction;
use crate::grid::GridSpec;
use crate::kernels::check_time;
use crate::symbols::{check_tau, Point, Symbol};

/// Largest number of time slices `hff_evaluate` accepts.
pub const MAX_HFF_SLICES: usize = 3;
/// Upper limit on symbol evaluations for one `hff_evaluate` call.
pub const MAX_HFF_EVALUATIONS: f64 = 4e9;

/// A path in `E_t^{x,τ}`: `q ≡ q_k`, `p ≡ p_k` on `(t_{k−1}, t_k)`, `q(t) = x`.
///
/// At an interior breakpoint `q(t_k) = τ q_{k+1} + (1−τ) q_k`; `p` is left-continuous.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePath<const D: usize> {
    t: f64,
    tau: f64,
    q: Vec<Point<D>>,
    p: Vec<Point<D>>,
    x: Point<D>,
}

impl<const D: usize> PhasePath<D> {
    pub fn new(t: f64, tau: f64, q: Vec<Point<D>>, p: Vec<Point<D>>, x: Point<D>) -> Result<Self> {
        check_time(t)?;
        check_tau(tau)?;
        if q.is_empty() || q.len() != p.len() {
            return Err(invalid("path", format!("need n ≥ 1 q and p values, got {} and {}", q.len(), p.len())));
        }
        Ok(Self { t, tau, q, p, x })
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }
    pub fn t(&self) -> f64 {
        self.t
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn x(&self) -> Point<D> {
        self.x
    }
    pub fn q_values(&self) -> &[Point<D>] {
        &self.q
    }
    pub fn p_values(&self) -> &[Point<D>] {
        &self.p
    }

    /// `t_k = k t / n`
    pub fn breakpoint(&self, k: usize) -> f64 {
        self.t * k as f64 / self.n() as f64
    }

    /// `q_{k+1}` with `q_{n+1} = x`, 1-based.
    fn q_after(&self, k: usize) -> Point<D> {
        if k < self.n() {
            self.q[k]
        } else {
            self.x
        }
    }

    /// `(k, on_breakpoint)`: the subinterval `(t_{k−1}, t_k]` containing `s`.
    fn locate(&self, s: f64) -> (usize, bool) {
        let n = self.n();
        let r = s / self.t * n as f64;
        let k = r.round();
        if (r - k).abs() < 1e-12 * n as f64 {
            (k as usize, true)
        } else {
            (r.ceil() as usize, false)
        }
    }

    /// `τ q_{k+1} + (1−τ) q_k` with `q_{n+1} = x`; equals `q(t_k)` for `k < n`.
    pub fn breakpoint_q(&self, k: usize) -> Point<D> {
        self.q_after(k) * self.tau + self.q[k - 1] * (1.0 - self.tau)
    }

    pub fn q_at(&self, s: f64) -> Point<D> {
        let s = s.clamp(0.0, self.t);
        match self.locate(s) {
            (0, _) => self.q[0],
            (k, true) if k == self.n() => self.x,
            (k, true) => self.breakpoint_q(k),
            (k, false) => self.q[k - 1],
        }
    }

    pub fn p_at(&self, s: f64) -> Point<D> {
        let s = s.clamp(0.0, self.t);
        match self.locate(s) {
            (0, _) => self.p[0],
            (k, _) => self.p[k - 1],
        }
    }

    /// The same step path on a partition with twice as many slices.
    pub fn refine(&self) -> Self {
        let dup = |v: &[Point<D>]| v.iter().flat_map(|a| [*a, *a]).collect();
        Self {
            t: self.t,
            tau: self.tau,
            q: dup(&self.q),
            p: dup(&self.p),
            x: self.x,
        }
    }
}

/// Builds the path whose image under `J_n^τ` is `(q_1, p_1, …, q_n, p_n)`.
pub fn embed<const D: usize>(tuple: &[Point<D>], t: f64, tau: f64, x: Point<D>) -> Result<PhasePath<D>> {
    if tuple.is_empty() || !tuple.len().is_multiple_of(2) {
        return Err(invalid("tuple", format!("length {} is not a positive even number", tuple.len())));
    }
    let q = tuple.iter().step_by(2).copied().collect();
    let p = tuple.iter().skip(1).step_by(2).copied().collect();
    PhasePath::new(t, tau, q, p, x)
}

/// `J_n^τ`: the values of a path on its open subintervals, interleaved.
pub fn j_n<const D: usize>(path: &PhasePath<D>) -> Vec<Point<D>> {
    path.q.iter().zip(&path.p).flat_map(|(q, p)| [*q, *p]).collect()
}

/// `(t/n) Σ_k H(τ q_{k+1} + (1−τ) q_k, p_k)` with `q_{n+1} = x`: the Riemann sum of `H` along
/// the path sampled at the breakpoints `t_k`.
pub fn action<const D: usize, S: Symbol<D> + ?Sized>(h: &S, path: &PhasePath<D>) -> Complex64 {
    let dt = path.t / path.n() as f64;
    (1..=path.n())
        .map(|k| h.eval(&path.breakpoint_q(k), &path.p[k - 1]))
        .sum::<Complex64>()
        * dt
}

/// `∫₀ᵗ H(q(s), p(s)) ds` for the step path: `(t/n) Σ_k H(q_k, p_k)`.
pub fn path_integral<const D: usize, S: Symbol<D> + ?Sized>(h: &S, path: &PhasePath<D>) -> Complex64 {
    let dt = path.t / path.n() as f64;
    path.q.iter().zip(&path.p).map(|(q, p)| h.eval(q, p)).sum::<Complex64>() * dt
}

/// Trapezoid grid for the p-integral `∫ e^{ip·z} e^{−tH} e^{−ε|p|²} dp` on `[−P, P]^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct OscillatoryQuadSpec {
    pub p_max: f64,
    pub points: usize,
    pub epsilon: f64,
    /// Two or more positive ε values for Richardson extrapolation to ε = 0; empty disables it.
    pub eps_schedule: Vec<f64>,
}

impl OscillatoryQuadSpec {
    pub fn new(p_max: f64, points: usize, epsilon: f64) -> Result<Self> {
        if !(p_max > 0.0) || points < 3 || !(epsilon >= 0.0) {
            return Err(invalid("quadrature", "need p_max > 0, at least 3 points and ε ≥ 0"));
        }
        Ok(Self {
            p_max,
            points,
            epsilon,
            eps_schedule: Vec::new(),
        })
    }

    /// A grid resolving kernels of time step `t` for symbols with `Re H ≥ a0 |p|² + c_min`,
    /// displacements up to `z_max` and kernel reach `reach`.
    ///
    /// `P` makes `e^{−t a0 P² − t c_min} < 1e−12`; the step `h_p` keeps `|z| h_p ≤ π/4` and makes the
    /// aliasing period `2π/h_p` exceed `z_max + reach`.
    pub fn for_kernel(a0: f64, c_min: f64, t: f64, z_max: f64, reach: f64) -> Result<Self> {
        check_time(t)?;
        if !(a0 > 0.0) {
            return Err(invalid("a0", "ellipticity constant must be positive"));
        }
        let log_floor = 12.0 * std::f64::consts::LN_10 - t * c_min.min(0.0);
        let p_max = (log_floor.max(1.0) / (t * a0)).sqrt();
        let hp = (PI / (4.0 * z_max.max(1e-3))).min(2.0 * PI / (z_max + reach + 1.0));
        let points = 2 * (p_max / hp).ceil() as usize + 1;
        Self::new(p_max, points, 0.0)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_eps_schedule(mut self, schedule: Vec<f64>) -> Self {
        self.eps_schedule = schedule;
        self
    }

    pub fn step(&self) -> f64 {
        2.0 * self.p_max / (self.points - 1) as f64
    }

    fn node(&self, i: usize) -> f64 {
        -self.p_max + i as f64 * self.step()
    }

    fn weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.points {
            0.5
        } else {
            1.0
        }
    }
}

/// `(2π)^{−1} ∫ e^{ipz} e^{−tH(m, p)} e^{−εp²} dp` on the trapezoid grid (d = 1).
fn p_integral<S: Symbol<1> + ?Sized>(h: &S, t: f64, m: &Point<1>, z: f64, spec: &OscillatoryQuadSpec, eps: f64) -> Complex64 {
    let hp = spec.step();
    let mut acc = Complex64::default();
    for i in 0..spec.points {
        let p = spec.node(i);
        let e = -t * h.eval(m, &Point::<1>::new(p)) + Complex64::new(-eps * p * p, p * z);
        acc += e.exp() * spec.weight(i);
    }
    acc * hp / (2.0 * PI)
}

fn richardson(values: &[(f64, Complex64)]) -> Complex64 {
    // Neville extrapolation of a polynomial in ε to ε = 0.
    let mut table: Vec<Complex64> = values.iter().map(|(_, v)| *v).collect();
    let eps: Vec<f64> = values.iter().map(|(e, _)| *e).collect();
    for level in 1..table.len() {
        for i in (level..table.len()).rev() {
            let (ei, ej) = (eps[i], eps[i - level]);
            table[i] = (table[i] * ej - table[i - 1] * ei) / (ej - ei);
        }
    }
    *table.last().expect("nonempty schedule")
}

/// One Hamiltonian step kernel: the p-integral of `e^{ip(q−q₁)} e^{−tH(τq + (1−τ)q₁, p)}`.
pub fn hff_step_kernel<S: Symbol<1> + ?Sized>(
    h: &S,
    tau: f64,
    t: f64,
    q: &Point<1>,
    q1: &Point<1>,
    spec: &OscillatoryQuadSpec,
) -> Result<Complex64> {
    check_tau(tau)?;
    check_time(t)?;
    let z = q[0] - q1[0];
    if z.abs() * spec.step() > PI / 4.0 {
        log::warn!("p-grid step {:.3e} under-resolves the oscillation at |q − q1| = {:.3e}", spec.step(), z.abs());
    }
    Ok(step_kernel_unchecked(h, tau, t, q, q1, spec))
}

fn step_kernel_unchecked<S: Symbol<1> + ?Sized>(
    h: &S,
    tau: f64,
    t: f64,
    q: &Point<1>,
    q1: &Point<1>,
    spec: &OscillatoryQuadSpec,
) -> Complex64 {
    let m = q * tau + q1 * (1.0 - tau);
    let z = q[0] - q1[0];
    if spec.eps_schedule.len() >= 2 {
        let values: Vec<(f64, Complex64)> = spec
            .eps_schedule
            .iter()
            .map(|&e| (e, p_integral(h, t, &m, z, spec, e)))
            .collect();
        richardson(&values)
    } else {
        p_integral(h, t, &m, z, spec, spec.epsilon)
    }
}

/// The n-th pre-limit phase-space integral at `x` (d = 1):
///
/// ```text
/// (2π)^{−n} ∫ e^{i Σ p_k (q_{k+1} − q_k)} e^{−action(q, p)} φ(q_1) dq dp,   q_{n+1} = x
/// ```
///
/// The p-integrals are done innermost, slice by slice, followed by trapezoid q-quadrature on
/// `qgrid` restricted to `|q_{k+1} − q_k| ≤ reach`.
#[allow(clippy::too_many_arguments)]
pub fn hff_evaluate<S: Symbol<1> + ?Sized>(
    h: &S,
    tau: f64,
    t: f64,
    n: usize,
    phi: &SmoothTestFunction<1>,
    x: f64,
    spec: &OscillatoryQuadSpec,
    qgrid: &GridSpec<1>,
    reach: f64,
) -> Result<Complex64> {
    check_tau(tau)?;
    check_time(t)?;
    if n == 0 {
        return Err(invalid("n", "at least one slice is required"));
    }
    if n > MAX_HFF_SLICES {
        return Err(Error::CostGuard(format!(
            "{n} slices means a {}-dimensional integral; at most {MAX_HFF_SLICES} are supported",
            2 * n
        )));
    }
    let dt = t / n as f64;
    let m = qgrid.len();
    let hq = qgrid.spacing(0);
    let band = ((reach / hq).ceil() as usize).min(m - 1);
    let per_kernel = spec.points as f64 * spec.eps_schedule.len().max(1) as f64;
    let evaluations = per_kernel * ((n - 1) as f64 * m as f64 * (2 * band + 1) as f64 + m as f64);
    if evaluations > MAX_HFF_EVALUATIONS {
        return Err(Error::CostGuard(format!(
            "{evaluations:.2e} symbol evaluations exceed the limit of {MAX_HFF_EVALUATIONS:.0e}"
        )));
    }
    if reach * spec.step() > PI / 4.0 {
        log::warn!("p-grid step {:.3e} under-resolves displacements up to {reach:.3e}", spec.step());
    }
    let weights: Vec<f64> = (0..m).map(|j| hq * qgrid.trapezoid_weight(j)).collect();
    let nodes: Vec<Point<1>> = qgrid.nodes();
    let mut u: Vec<Complex64> = nodes.iter().map(|q| Complex64::new(phi.value(q), 0.0)).collect();
    for _ in 1..n {
        u = (0..m)
            .into_par_iter()
            .map(|i| {
                let lo = i.saturating_sub(band);
                let hi = (i + band + 1).min(m);
                (lo..hi)
                    .map(|j| step_kernel_unchecked(h, tau, dt, &nodes[i], &nodes[j], spec) * u[j] * weights[j])
                    .sum()
            })
            .collect();
    }
    let xp = Point::<1>::new(x);
    Ok((0..m)
        .into_par_iter()
        .filter(|&j| (x - nodes[j][0]).abs() <= reach)
        .map(|j| step_kernel_unchecked(h, tau, dt, &xp, &nodes[j], spec) * u[j] * weights[j])
        .collect::<Vec<_>>()
        .into_iter()
        .sum())
}
