//! Hamilton functions `H(q, p) = h(q, p) + r(p)` with a quadratic-in-p part and a
//! finite-activity Lévy part, their coefficient fields, and the τ → 1 coefficient transform.

use std::fmt;
use std::sync::Arc;

use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;

use crate::linalg::sym_eigen_bounds;
use crate::error::{invalid, Error, Result};

pub type Point<const D: usize> = SVector<f64, D>;
pub type Mat<const D: usize> = SMatrix<f64, D, D>;

/// Relative tolerance for supplied derivatives against central differences.
pub const DERIVATIVE_CHECK_TOL: f64 = 1e-6;
/// Default relative finite-difference step (scaled by `1 + |q|`).
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Values a coefficient field can take: scalars, vectors and matrices.
pub trait FieldValue: Copy + Send + Sync + fmt::Debug + 'static {
    fn zero() -> Self;
    /// `self + alpha * other`
    fn add_scaled(self, alpha: f64, other: Self) -> Self;
    fn max_abs(&self) -> f64;
}

impl FieldValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn add_scaled(self, alpha: f64, other: Self) -> Self {
        self + alpha * other
    }
    fn max_abs(&self) -> f64 {
        self.abs()
    }
}

impl<const R: usize, const C: usize> FieldValue for SMatrix<f64, R, C> {
    fn zero() -> Self {
        Self::zeros()
    }
    fn add_scaled(self, alpha: f64, other: Self) -> Self {
        self + other * alpha
    }
    fn max_abs(&self) -> f64 {
        self.amax()
    }
}

type ValueFn<const D: usize, T> = Arc<dyn Fn(&Point<D>) -> T + Send + Sync>;
type GradFn<const D: usize, T> = Arc<dyn Fn(&Point<D>) -> [T; D] + Send + Sync>;
type HessFn<const D: usize, T> = Arc<dyn Fn(&Point<D>) -> [[T; D]; D] + Send + Sync>;

/// A coefficient `q ↦ T` with optional analytic first and second derivatives.
///
/// `grad(q)[k]` is `∂_k value(q)` and `hess(q)[j][k]` is `∂_j ∂_k value(q)`. Missing
/// derivatives fall back to central differences with step `fd_step · (1 + |q|)`.
#[derive(Clone)]
pub struct CoefficientField<const D: usize, T> {
    value: ValueFn<D, T>,
    grad: Option<GradFn<D, T>>,
    hess: Option<HessFn<D, T>>,
    fd_step: f64,
    constant: bool,
}

impl<const D: usize, T: FieldValue> fmt::Debug for CoefficientField<D, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("dim", &D)
            .field("constant", &self.constant)
            .field("analytic_grad", &self.grad.is_some())
            .field("analytic_hess", &self.hess.is_some())
            .field("fd_step", &self.fd_step)
            .finish()
    }
}

impl<const D: usize, T: FieldValue> CoefficientField<D, T> {
    pub fn constant(v: T) -> Self {
        Self {
            value: Arc::new(move |_| v),
            grad: Some(Arc::new(|_| [T::zero(); D])),
            hess: Some(Arc::new(|_| [[T::zero(); D]; D])),
            fd_step: DEFAULT_FD_STEP,
            constant: true,
        }
    }

    pub fn from_fn(f: impl Fn(&Point<D>) -> T + Send + Sync + 'static) -> Self {
        Self {
            value: Arc::new(f),
            grad: None,
            hess: None,
            fd_step: DEFAULT_FD_STEP,
            constant: false,
        }
    }

    pub fn with_grad(mut self, g: impl Fn(&Point<D>) -> [T; D] + Send + Sync + 'static) -> Self {
        self.grad = Some(Arc::new(g));
        self
    }

    pub fn with_hess(
        mut self,
        h: impl Fn(&Point<D>) -> [[T; D]; D] + Send + Sync + 'static,
    ) -> Self {
        self.hess = Some(Arc::new(h));
        self
    }

    pub fn with_fd_step(mut self, step: f64) -> Self {
        self.fd_step = step;
        self
    }

    pub fn dim(&self) -> usize {
        D
    }

    pub fn is_constant(&self) -> bool {
        self.constant
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        self.grad.is_some() && self.hess.is_some()
    }

    #[inline]
    pub fn value(&self, q: &Point<D>) -> T {
        (self.value)(q)
    }

    pub fn grad(&self, q: &Point<D>) -> [T; D] {
        match &self.grad {
            Some(g) => g(q),
            None => self.fd_grad(q),
        }
    }

    pub fn hess(&self, q: &Point<D>) -> [[T; D]; D] {
        match (&self.hess, &self.grad) {
            (Some(h), _) => h(q),
            (None, Some(g)) => self.fd_hess_from_grad(q, g),
            (None, None) => self.fd_hess_from_values(q),
        }
    }

    fn step(&self, q: &Point<D>) -> f64 {
        self.fd_step * (1.0 + q.norm())
    }

    fn fd_grad(&self, q: &Point<D>) -> [T; D] {
        let h = self.step(q);
        std::array::from_fn(|k| {
            let mut plus = *q;
            let mut minus = *q;
            plus[k] += h;
            minus[k] -= h;
            self.value(&plus)
                .add_scaled(-1.0, self.value(&minus))
                .scale_by(0.5 / h)
        })
    }

    fn fd_hess_from_grad(&self, q: &Point<D>, g: &GradFn<D, T>) -> [[T; D]; D] {
        let h = self.step(q);
        let mut out = [[T::zero(); D]; D];
        for j in 0..D {
            let mut plus = *q;
            let mut minus = *q;
            plus[j] += h;
            minus[j] -= h;
            let (gp, gm) = (g(&plus), g(&minus));
            for k in 0..D {
                out[j][k] = gp[k].add_scaled(-1.0, gm[k]).scale_by(0.5 / h);
            }
        }
        out
    }

    fn fd_hess_from_values(&self, q: &Point<D>) -> [[T; D]; D] {
        // Second differences of values lose ~eps/h² digits; use a coarser step.
        let h = 10.0 * self.step(q);
        let f0 = self.value(q);
        let mut out = [[T::zero(); D]; D];
        for j in 0..D {
            for k in 0..D {
                out[j][k] = if j == k {
                    let mut plus = *q;
                    let mut minus = *q;
                    plus[j] += h;
                    minus[j] -= h;
                    self.value(&plus)
                        .add_scaled(-2.0, f0)
                        .add_scaled(1.0, self.value(&minus))
                        .scale_by(1.0 / (h * h))
                } else {
                    let shifted = |sj: f64, sk: f64| {
                        let mut x = *q;
                        x[j] += sj * h;
                        x[k] += sk * h;
                        self.value(&x)
                    };
                    shifted(1.0, 1.0)
                        .add_scaled(-1.0, shifted(1.0, -1.0))
                        .add_scaled(-1.0, shifted(-1.0, 1.0))
                        .add_scaled(1.0, shifted(-1.0, -1.0))
                        .scale_by(0.25 / (h * h))
                };
            }
        }
        out
    }

    /// Checks supplied derivatives against central differences at every probe point.
    pub fn verify(&self, name: &'static str, probes: &[Point<D>]) -> Result<()> {
        if !(self.fd_step > 0.0 && self.fd_step.is_finite()) {
            return Err(invalid("fd_step", "must be positive and finite"));
        }
        if self.constant {
            return Ok(());
        }
        for q in probes {
            if let Some(g) = &self.grad {
                let supplied = g(q);
                let numeric = self.fd_grad(q);
                for k in 0..D {
                    check_close(name, q, &supplied[k], &numeric[k])?;
                }
            }
            if let Some(hf) = &self.hess {
                let supplied = hf(q);
                let numeric = match &self.grad {
                    Some(g) => self.fd_hess_from_grad(q, g),
                    None => self.fd_hess_from_values(q),
                };
                for j in 0..D {
                    for k in 0..D {
                        check_close(name, q, &supplied[j][k], &numeric[j][k])?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_close<const D: usize, T: FieldValue>(
    field: &'static str,
    q: &Point<D>,
    supplied: &T,
    numeric: &T,
) -> Result<()> {
    let diff = supplied.add_scaled(-1.0, *numeric).max_abs();
    if diff > DERIVATIVE_CHECK_TOL * supplied.max_abs().max(1.0) {
        return Err(Error::DerivativeMismatch {
            field,
            at: q.iter().copied().collect(),
            supplied: supplied.max_abs(),
            numeric: numeric.max_abs(),
        });
    }
    Ok(())
}

trait ScaleBy {
    fn scale_by(self, s: f64) -> Self;
}

impl<T: FieldValue> ScaleBy for T {
    fn scale_by(self, s: f64) -> Self {
        T::zero().add_scaled(s, self)
    }
}

/// Probe set used for construction-time checks: a uniform lattice around the origin.
pub fn probe_points<const D: usize>() -> Vec<Point<D>> {
    let axis: Vec<f64> = if D == 1 {
        (0..=24).map(|i| -6.0 + 0.5 * i as f64).collect()
    } else {
        (0..=8).map(|i| -4.0 + i as f64).collect()
    };
    let total = axis.len().pow(D as u32);
    (0..total)
        .map(|mut idx| {
            let mut p = Point::<D>::zeros();
            for k in (0..D).rev() {
                p[k] = axis[idx % axis.len()];
                idx /= axis.len();
            }
            p
        })
        .collect()
}

/// `h(q, p) = c(q) + i b(q)·p + p·A(q)p` with declared ellipticity bounds `a0 ≤ A ≤ A0`.
#[derive(Clone, Debug)]
pub struct QuadraticSymbol<const D: usize> {
    a: CoefficientField<D, Mat<D>>,
    b: CoefficientField<D, Point<D>>,
    c: CoefficientField<D, f64>,
    a0: f64,
    a_max: f64,
}

impl<const D: usize> QuadraticSymbol<D> {
    pub fn new(
        a: CoefficientField<D, Mat<D>>,
        b: CoefficientField<D, Point<D>>,
        c: CoefficientField<D, f64>,
        a0: f64,
        a_max: f64,
    ) -> Result<Self> {
        if !(1..=2).contains(&D) {
            return Err(invalid("dim", format!("spatial dimension {D} unsupported (1 or 2)")));
        }
        if !(a0 > 0.0 && a0.is_finite()) {
            return Err(invalid("a0", "lower ellipticity bound must be positive"));
        }
        if !(a_max >= a0 && a_max.is_finite()) {
            return Err(invalid("A0", "upper ellipticity bound must be finite and >= a0"));
        }
        let probes = probe_points::<D>();
        a.verify("A", &probes)?;
        b.verify("b", &probes)?;
        c.verify("c", &probes)?;
        for q in &probes {
            let m = a.value(q);
            let asym = (m - m.transpose()).amax();
            if asym > 1e-12 {
                return Err(Error::Asymmetric {
                    at: q.iter().copied().collect(),
                    asym,
                });
            }
            let (min, max) = sym_eigen_bounds(&m);
            if min < a0 * (1.0 - 1e-12) || max > a_max * (1.0 + 1e-12) {
                return Err(Error::Ellipticity {
                    at: q.iter().copied().collect(),
                    min,
                    max,
                    a0,
                    a_max,
                });
            }
        }
        Ok(Self { a, b, c, a0, a_max })
    }

    /// Constant coefficients; ellipticity bounds are taken from the spectrum of `a`.
    pub fn constant(a: Mat<D>, b: Point<D>, c: f64) -> Result<Self> {
        let (min, max) = sym_eigen_bounds(&a);
        Self::new(
            CoefficientField::constant(a),
            CoefficientField::constant(b),
            CoefficientField::constant(c),
            min,
            max,
        )
    }

    pub fn a(&self) -> &CoefficientField<D, Mat<D>> {
        &self.a
    }
    pub fn b(&self) -> &CoefficientField<D, Point<D>> {
        &self.b
    }
    pub fn c(&self) -> &CoefficientField<D, f64> {
        &self.c
    }
    /// Lower ellipticity bound.
    pub fn a0(&self) -> f64 {
        self.a0
    }
    /// Upper ellipticity bound.
    pub fn a_max(&self) -> f64 {
        self.a_max
    }

    pub fn is_constant(&self) -> bool {
        self.a.is_constant() && self.b.is_constant() && self.c.is_constant()
    }

    /// `(Div A)_j = Σ_k ∂_k A_jk`
    pub fn div_a(&self, q: &Point<D>) -> Point<D> {
        let g = self.a.grad(q);
        Point::<D>::from_fn(|j, _| (0..D).map(|k| g[k][(j, k)]).sum())
    }

    /// `Σ_{j,k} ∂_j ∂_k A_jk`
    pub fn tr_hess_a(&self, q: &Point<D>) -> f64 {
        let h = self.a.hess(q);
        let mut s = 0.0;
        for j in 0..D {
            for k in 0..D {
                s += h[j][k][(j, k)];
            }
        }
        s
    }

    /// `Σ_j ∂_j b_j`
    pub fn div_b(&self, q: &Point<D>) -> f64 {
        let g = self.b.grad(q);
        (0..D).map(|j| g[j][j]).sum()
    }

    pub fn eval(&self, q: &Point<D>, p: &Point<D>) -> Complex64 {
        let a = self.a.value(q);
        let b = self.b.value(q);
        Complex64::new(self.c.value(q) + p.dot(&(a * p)), b.dot(p))
    }
}

/// Finite-activity Lévy measure `N = Σ_j w_j δ_{y_j}`.
#[derive(Clone, Debug, PartialEq)]
pub struct LevySpec<const D: usize> {
    atoms: Vec<(Point<D>, f64)>,
    rate: f64,
    gamma: Point<D>,
}

impl<const D: usize> LevySpec<D> {
    pub fn new(atoms: Vec<(Point<D>, f64)>) -> Result<Self> {
        for (y, w) in &atoms {
            if !y.iter().all(|v| v.is_finite()) || y.norm() == 0.0 {
                return Err(invalid("levy.y", "atom locations must be finite and nonzero"));
            }
            if !(*w > 0.0 && w.is_finite()) {
                return Err(invalid("levy.w", "atom weights must be positive and finite"));
            }
        }
        let rate = atoms.iter().map(|(_, w)| w).sum();
        let gamma = compensator(&atoms);
        Ok(Self { atoms, rate, gamma })
    }

    pub fn empty() -> Self {
        Self {
            atoms: Vec::new(),
            rate: 0.0,
            gamma: Point::<D>::zeros(),
        }
    }

    pub fn atoms(&self) -> &[(Point<D>, f64)] {
        &self.atoms
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Total jump intensity `λ = Σ w_j`.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Compensator drift `γ = Σ w_j y_j / (1 + |y_j|²)`.
    pub fn gamma(&self) -> Point<D> {
        self.gamma
    }

    /// Recomputes the compensator from the atoms.
    pub fn recompute_gamma(&self) -> Point<D> {
        compensator(&self.atoms)
    }

    pub fn max_jump(&self) -> f64 {
        self.atoms.iter().map(|(y, _)| y.norm()).fold(0.0, f64::max)
    }

    /// The same atoms with every weight multiplied by `s > 0`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.atoms.iter().map(|(y, w)| (*y, w * s)).collect())
    }

    /// `r(p) = Σ_j w_j (1 − e^{i y_j·p} + i y_j·p / (1 + |y_j|²))`
    pub fn exponent(&self, p: &Point<D>) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (y, w) in &self.atoms {
            let yp = y.dot(p);
            let (s, c) = yp.sin_cos();
            acc += Complex64::new(1.0 - c, -s + yp / (1.0 + y.norm_squared())) * *w;
        }
        acc
    }
}

fn compensator<const D: usize>(atoms: &[(Point<D>, f64)]) -> Point<D> {
    atoms
        .iter()
        .fold(Point::<D>::zeros(), |acc, (y, w)| acc + y * (w / (1.0 + y.norm_squared())))
}

/// Anything that can be evaluated on phase space.
pub trait Symbol<const D: usize>: Sync {
    fn eval(&self, q: &Point<D>, p: &Point<D>) -> Complex64;
}

impl<const D: usize, F> Symbol<D> for F
where
    F: Fn(&Point<D>, &Point<D>) -> Complex64 + Sync,
{
    fn eval(&self, q: &Point<D>, p: &Point<D>) -> Complex64 {
        self(q, p)
    }
}

/// `H(q, p) = h(q, p) + r(p)`.
#[derive(Clone, Debug)]
pub struct HamiltonSymbol<const D: usize> {
    quad: QuadraticSymbol<D>,
    levy: LevySpec<D>,
}

impl<const D: usize> HamiltonSymbol<D> {
    pub fn new(quad: QuadraticSymbol<D>, levy: Option<LevySpec<D>>) -> Self {
        Self {
            quad,
            levy: levy.unwrap_or_else(LevySpec::empty),
        }
    }

    pub fn quad(&self) -> &QuadraticSymbol<D> {
        &self.quad
    }

    pub fn levy(&self) -> Option<&LevySpec<D>> {
        (!self.levy.is_empty()).then_some(&self.levy)
    }

    /// The jump part; empty when `N ≡ 0`.
    pub fn jumps(&self) -> &LevySpec<D> {
        &self.levy
    }

    pub fn with_levy(mut self, levy: LevySpec<D>) -> Self {
        self.levy = levy;
        self
    }

    /// `A`, `b` and `c` are all constant (the Lévy part never depends on q).
    pub fn is_constant(&self) -> bool {
        self.quad.is_constant()
    }

    pub fn eval(&self, q: &Point<D>, p: &Point<D>) -> Complex64 {
        self.quad.eval(q, p) + self.levy.exponent(p)
    }
}

impl<const D: usize> Symbol<D> for HamiltonSymbol<D> {
    fn eval(&self, q: &Point<D>, p: &Point<D>) -> Complex64 {
        HamiltonSymbol::eval(self, q, p)
    }
}

pub fn eval_symbol<const D: usize>(h: &HamiltonSymbol<D>, q: &Point<D>, p: &Point<D>) -> Complex64 {
    h.eval(q, p)
}

pub fn levy_exponent<const D: usize>(levy: &LevySpec<D>, p: &Point<D>) -> Complex64 {
    levy.exponent(p)
}

pub(crate) fn check_tau(tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(invalid("tau", format!("{tau} is outside [0, 1]")));
    }
    Ok(())
}

/// The 1-symbol whose qp-quantization equals the τ-quantization of `h`:
///
/// ```text
/// b_τ = b − 2(1−τ) Div A
/// c_τ = c + (1−τ) Div b − (1−τ)² tr(Hess A)
/// ```
///
/// `A` and the Lévy part are carried over unchanged.
pub fn tau_transform<const D: usize>(h: &HamiltonSymbol<D>, tau: f64) -> Result<HamiltonSymbol<D>> {
    check_tau(tau)?;
    let s = 1.0 - tau;
    let quad = &h.quad;
    if s == 0.0 || (quad.a.is_constant() && quad.b.is_constant()) {
        return Ok(h.clone());
    }
    let b = if quad.a.is_constant() {
        quad.b.clone()
    } else {
        let src = quad.clone();
        CoefficientField::from_fn(move |x| src.b.value(x) - src.div_a(x) * (2.0 * s))
            .with_fd_step(quad.b.fd_step())
    };
    let src = quad.clone();
    let c = CoefficientField::from_fn(move |x| {
        src.c.value(x) + s * src.div_b(x) - s * s * src.tr_hess_a(x)
    })
    .with_fd_step(quad.c.fd_step());
    Ok(HamiltonSymbol {
        quad: QuadraticSymbol {
            a: quad.a.clone(),
            b,
            c,
            a0: quad.a0,
            a_max: quad.a_max,
        },
        levy: h.levy.clone(),
    })
}
