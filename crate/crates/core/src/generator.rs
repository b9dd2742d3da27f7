//! The generator `Ĥ_τ` in differential-plus-jump form, its spectral form for τ = 1, and the
//! Chernoff derivative residual.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftDirection;

use crate::error::{invalid, Result};
use crate::fft::fft_nd;
use crate::grid::{GridFunction, GridSpec};
use crate::semigroup::apply_f;
use crate::symbols::{check_tau, HamiltonSymbol, Mat, Point, Symbol};

type ScalarFn<const D: usize> = Arc<dyn Fn(&Point<D>) -> f64 + Send + Sync>;
type GradFn<const D: usize> = Arc<dyn Fn(&Point<D>) -> Point<D> + Send + Sync>;
type HessFn<const D: usize> = Arc<dyn Fn(&Point<D>) -> Mat<D> + Send + Sync>;

/// A smooth, rapidly decaying test function with analytic first and second derivatives.
#[derive(Clone)]
pub struct SmoothTestFunction<const D: usize> {
    value: ScalarFn<D>,
    grad: GradFn<D>,
    hess: HessFn<D>,
    support_radius: f64,
}

impl<const D: usize> fmt::Debug for SmoothTestFunction<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothTestFunction")
            .field("support_radius", &self.support_radius)
            .finish_non_exhaustive()
    }
}

impl<const D: usize> SmoothTestFunction<D> {
    pub fn new(
        value: impl Fn(&Point<D>) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&Point<D>) -> Point<D> + Send + Sync + 'static,
        hess: impl Fn(&Point<D>) -> Mat<D> + Send + Sync + 'static,
        support_radius: f64,
    ) -> Self {
        Self {
            value: Arc::new(value),
            grad: Arc::new(grad),
            hess: Arc::new(hess),
            support_radius,
        }
    }

    /// `e^{−|q − m|²/(2s²)}`; values and derivatives fall below 1e−12 beyond `8.5 s`.
    pub fn gaussian(center: Point<D>, s: f64) -> Self {
        let s2 = s * s;
        Self::new(
            move |q| (-(q - center).norm_squared() / (2.0 * s2)).exp(),
            move |q| {
                let d = q - center;
                -d * ((-d.norm_squared() / (2.0 * s2)).exp() / s2)
            },
            move |q| {
                let d = q - center;
                let e = (-d.norm_squared() / (2.0 * s2)).exp();
                (d * d.transpose() / s2 - Mat::<D>::identity()) * (e / s2)
            },
            8.5 * s,
        )
    }

    /// Compactly supported bump `exp(1 − 1/(1 − |q − m|²/R²))` on the ball of radius `R`.
    pub fn bump(center: Point<D>, radius: f64) -> Self {
        let r2 = radius * radius;
        // With u = |q−m|²/R², φ = exp(1 − 1/(1−u)).
        let parts = move |q: &Point<D>| {
            let d = q - center;
            let u = d.norm_squared() / r2;
            if u >= 1.0 {
                return None;
            }
            let v = 1.0 / (1.0 - u);
            Some((d, (1.0 - v).exp(), v))
        };
        Self::new(
            move |q| parts(q).map_or(0.0, |(_, phi, _)| phi),
            move |q| {
                parts(q).map_or(Point::<D>::zeros(), |(d, phi, v)| -d * (2.0 * phi * v * v / r2))
            },
            move |q| {
                parts(q).map_or(Mat::<D>::zeros(), |(d, phi, v)| {
                    let r4 = r2 * r2;
                    Mat::<D>::identity() * (-2.0 * phi * v * v / r2)
                        + d * d.transpose() * (4.0 * phi * v * v * v * (v - 2.0) / r4)
                })
            },
            radius,
        )
    }

    pub fn value(&self, q: &Point<D>) -> f64 {
        (self.value)(q)
    }
    pub fn grad(&self, q: &Point<D>) -> Point<D> {
        (self.grad)(q)
    }
    pub fn hess(&self, q: &Point<D>) -> Mat<D> {
        (self.hess)(q)
    }
    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn sample(&self, grid: &GridSpec<D>) -> GridFunction<D> {
        GridFunction::sample(grid, |q| self.value(q))
    }

    /// Maximum deviation of the analytic derivatives from central differences.
    pub fn derivative_mismatch(&self, probes: &[Point<D>]) -> f64 {
        let eps = 1e-5;
        let mut worst: f64 = 0.0;
        for q in probes {
            let g = self.grad(q);
            let hs = self.hess(q);
            for k in 0..D {
                let mut e = Point::<D>::zeros();
                e[k] = eps;
                let fd = (self.value(&(q + e)) - self.value(&(q - e))) / (2.0 * eps);
                worst = worst.max((fd - g[k]).abs());
                let fd_row = (self.grad(&(q + e)) - self.grad(&(q - e))) / (2.0 * eps);
                for j in 0..D {
                    worst = worst.max((fd_row[j] - hs[(j, k)]).abs());
                }
            }
        }
        worst
    }
}

/// `Ĥ_τ φ(q)`:
///
/// ```text
/// −tr(A Hess φ) + [b − 2(1−τ) Div A]·∇φ + [c + (1−τ) Div b − (1−τ)² tr(Hess A)] φ
///   + Σ_j w_j (φ(q) − φ(q + y_j) + y_j·∇φ(q) / (1 + |y_j|²))
/// ```
pub fn apply_generator<const D: usize>(
    h: &HamiltonSymbol<D>,
    tau: f64,
    phi: &SmoothTestFunction<D>,
    q: &Point<D>,
) -> Result<Complex64> {
    check_tau(tau)?;
    Ok(Complex64::new(generator_value(h, tau, phi, q), 0.0))
}

fn generator_value<const D: usize>(h: &HamiltonSymbol<D>, tau: f64, phi: &SmoothTestFunction<D>, q: &Point<D>) -> f64 {
    let quad = h.quad();
    let s = 1.0 - tau;
    let a = quad.a().value(q);
    let (v, g, hs) = (phi.value(q), phi.grad(q), phi.hess(q));
    let mut drift = quad.b().value(q);
    let mut potential = quad.c().value(q);
    if s != 0.0 {
        if !quad.a().is_constant() {
            drift -= quad.div_a(q) * (2.0 * s);
            potential -= s * s * quad.tr_hess_a(q);
        }
        if !quad.b().is_constant() {
            potential += s * quad.div_b(q);
        }
    }
    let diffusion = -(a * hs).trace();
    let jumps: f64 = h
        .jumps()
        .atoms()
        .iter()
        .map(|(y, w)| w * (v - phi.value(&(q + y)) + y.dot(&g) / (1.0 + y.norm_squared())))
        .sum();
    diffusion + drift.dot(&g) + potential * v + jumps
}

/// `Ĥ_τ φ` at every grid node.
pub fn apply_generator_grid<const D: usize>(
    h: &HamiltonSymbol<D>,
    tau: f64,
    phi: &SmoothTestFunction<D>,
    grid: &GridSpec<D>,
) -> Result<GridFunction<D>> {
    check_tau(tau)?;
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| generator_value(h, tau, phi, &grid.node(i)))
        .collect();
    GridFunction::new(grid.clone(), values)
}

/// Nyquist-band magnitude of the continuous Fourier transform above which aliasing is reported.
pub const ALIASING_WARN: f64 = 1e-8;

/// `(2π)^{−d/2} ∫ e^{ip·q} H(q, p) F[φ](p) dp` by discrete Fourier transform, one inverse sum
/// per output node.
pub fn apply_pdo_spectral<const D: usize, S: Symbol<D> + ?Sized>(
    symbol: &S,
    phi: &GridFunction<D>,
) -> Result<GridFunction<D, Complex64>> {
    let grid = phi.spec().clone();
    let shape = grid.points();
    let n = grid.len();
    let mut coeffs: Vec<Complex64> = phi.values().iter().map(|v| Complex64::new(*v, 0.0)).collect();
    fft_nd(&mut coeffs, shape, FftDirection::Forward);

    // Signed frequency index and angular frequency per axis.
    let freq = |axis: usize, k: usize| -> (isize, f64) {
        let m = shape[axis];
        let signed = if k < m.div_ceil(2) { k as isize } else { k as isize - m as isize };
        (signed, 2.0 * PI * signed as f64 / (m as f64 * grid.spacing(axis)))
    };
    let to_continuous = grid.cell_volume() / (2.0 * PI).powf(D as f64 / 2.0);
    let nyquist = (0..n)
        .filter(|&f| {
            let idx = grid.multi_index(f);
            (0..D).any(|k| freq(k, idx[k]).0.unsigned_abs() >= shape[k] / 2)
        })
        .map(|f| coeffs[f].norm() * to_continuous)
        .fold(0.0, f64::max);
    if nyquist > ALIASING_WARN {
        log::warn!("Fourier transform at the Nyquist band is {nyquist:.3e}; the datum is under-resolved");
    }

    let modes: Vec<(Point<D>, Vec<isize>, Complex64)> = (0..n)
        .map(|f| {
            let idx = grid.multi_index(f);
            let mut p = Point::<D>::zeros();
            let mut signed = vec![0; D];
            for k in 0..D {
                let (s, w) = freq(k, idx[k]);
                signed[k] = s;
                p[k] = w;
            }
            (p, signed, coeffs[f])
        })
        .collect();
    let values = (0..n)
        .into_par_iter()
        .map(|i| {
            let q = grid.node(i);
            let idx = grid.multi_index(i);
            let mut acc = Complex64::default();
            for (p, signed, c) in &modes {
                let mut phase = 0.0;
                for k in 0..D {
                    phase += (signed[k] * idx[k] as isize).rem_euclid(shape[k] as isize) as f64 / shape[k] as f64;
                }
                acc += symbol.eval(&q, p) * c * Complex64::from_polar(1.0, 2.0 * PI * phase);
            }
            acc / n as f64
        })
        .collect();
    GridFunction::new(grid, values)
}

/// `‖(F_τ(t)φ − φ)/t + Ĥ_τ φ‖₁` on the grid.
pub fn derivative_residual<const D: usize>(
    h: &HamiltonSymbol<D>,
    tau: f64,
    t: f64,
    phi: &SmoothTestFunction<D>,
    grid: &GridSpec<D>,
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid("t", "time step must be positive"));
    }
    let sampled = phi.sample(grid);
    let stepped = apply_f(h, tau, t, &sampled)?;
    let gen = apply_generator_grid(h, tau, phi, grid)?;
    let hd = grid.cell_volume();
    Ok(hd * stepped
        .values()
        .iter()
        .zip(sampled.values())
        .zip(gen.values())
        .map(|((f, p), g)| ((f - p) / t + g).abs())
        .sum::<f64>())
}
