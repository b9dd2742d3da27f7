//! Closed-form solutions for constant coefficients and Gaussian data.

use statrs::function::erf::erfc;

use crate::error::{invalid, Result};
use crate::grid::{GridFunction, GridSpec};
use crate::kernels::{check_time, LevyIncrementLaw};
use crate::linalg::det;
use crate::symbols::{HamiltonSymbol, LevySpec, Mat, Point, QuadraticSymbol};

/// `H(p) = p·Ap + i b·p + c + r(p)` with constant `A, b, c`.
#[derive(Clone, Debug)]
pub struct ConstantCoeffProblem<const D: usize> {
    a: Mat<D>,
    b: Point<D>,
    c: f64,
    levy: Option<LevySpec<D>>,
}

impl<const D: usize> ConstantCoeffProblem<D> {
    pub fn new(a: Mat<D>, b: Point<D>, c: f64, levy: Option<LevySpec<D>>) -> Result<Self> {
        QuadraticSymbol::constant(a, b, c)?;
        Ok(Self { a, b, c, levy })
    }

    /// Freezes the coefficients of a constant-coefficient symbol.
    pub fn from_symbol(h: &HamiltonSymbol<D>) -> Result<Self> {
        if !h.is_constant() {
            return Err(invalid("symbol", "coefficients are not constant"));
        }
        let x = Point::<D>::zeros();
        let q = h.quad();
        Self::new(q.a().value(&x), q.b().value(&x), q.c().value(&x), h.levy().cloned())
    }

    pub fn symbol(&self) -> HamiltonSymbol<D> {
        let quad = QuadraticSymbol::constant(self.a, self.b, self.c).expect("validated at construction");
        HamiltonSymbol::new(quad, self.levy.clone())
    }

    pub fn a(&self) -> Mat<D> {
        self.a
    }
    pub fn b(&self) -> Point<D> {
        self.b
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn levy(&self) -> Option<&LevySpec<D>> {
        self.levy.as_ref()
    }

    fn has_jumps(&self) -> bool {
        self.levy.as_ref().is_some_and(|l| !l.is_empty())
    }
}

/// `φ(q) = amplitude · exp(−½ (q − m)·Σ^{−1}(q − m))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianDatum<const D: usize> {
    pub mean: Point<D>,
    pub cov: Mat<D>,
    pub amplitude: f64,
}

impl<const D: usize> GaussianDatum<D> {
    /// `e^{−|q − m|²/(2s²)}`
    pub fn isotropic(mean: Point<D>, s: f64) -> Self {
        Self {
            mean,
            cov: Mat::<D>::identity() * (s * s),
            amplitude: 1.0,
        }
    }

    /// `e^{−|q|²/2}`
    pub fn standard() -> Self {
        Self::isotropic(Point::<D>::zeros(), 1.0)
    }

    pub fn eval(&self, q: &Point<D>) -> f64 {
        let d = q - self.mean;
        let inv = self.cov.try_inverse().expect("covariance must be invertible");
        self.amplitude * (-0.5 * d.dot(&(inv * d))).exp()
    }

    pub fn total_mass(&self) -> f64 {
        self.amplitude * (2.0 * std::f64::consts::PI).powf(D as f64 / 2.0) * det(&self.cov).sqrt()
    }

    /// Upper bound on the mass of `|φ|` outside the grid box (union bound over axes).
    pub fn mass_outside(&self, grid: &GridSpec<D>) -> f64 {
        let (lo, hi) = (grid.lo(), grid.hi());
        let outside: f64 = (0..D)
            .map(|k| {
                let s = (2.0 * self.cov[(k, k)]).sqrt();
                0.5 * (erfc((self.mean[k] - lo[k]) / s) + erfc((hi[k] - self.mean[k]) / s))
            })
            .sum();
        self.total_mass().abs() * outside.min(1.0)
    }

    pub fn sample(&self, grid: &GridSpec<D>) -> GridFunction<D> {
        GridFunction::sample(grid, |q| self.eval(q))
    }

    /// Datum after one Gaussian step of duration `t` with displacement `shift`:
    /// `Σ → Σ + 2tA`, mean → mean + shift, mass scaled by `factor`.
    fn propagate(&self, a: &Mat<D>, t: f64, shift: Point<D>, factor: f64) -> Self {
        let cov = self.cov + a * (2.0 * t);
        let amplitude = self.amplitude * factor * (det(&self.cov) / det(&cov)).sqrt();
        Self {
            mean: self.mean + shift,
            cov,
            amplitude,
        }
    }
}

fn check_datum<const D: usize>(datum: &GaussianDatum<D>) -> Result<()> {
    if crate::linalg::cholesky(&datum.cov).is_none() {
        return Err(invalid("datum.cov", "covariance must be symmetric positive definite"));
    }
    Ok(())
}

/// Gaussian datum evolved by the jump-free semigroup: mean shifted by `tb`, covariance by `2tA`,
/// mass by `e^{−tc}`.
pub fn evolved_gaussian<const D: usize>(
    prob: &ConstantCoeffProblem<D>,
    t: f64,
    datum: &GaussianDatum<D>,
) -> Result<GaussianDatum<D>> {
    if t < 0.0 || !t.is_finite() {
        return Err(invalid("t", format!("time {t} must be nonnegative")));
    }
    check_datum(datum)?;
    if prob.has_jumps() {
        return Err(invalid("levy", "Gaussian oracle requires N ≡ 0"));
    }
    Ok(datum.propagate(&prob.a, t, prob.b * t, (-t * prob.c).exp()))
}

pub fn exact_gaussian_solution<const D: usize>(
    prob: &ConstantCoeffProblem<D>,
    t: f64,
    q0: &Point<D>,
    datum: &GaussianDatum<D>,
) -> Result<f64> {
    Ok(evolved_gaussian(prob, t, datum)?.eval(q0))
}

/// Poisson-series solution together with the neglected series mass.
#[derive(Clone, Debug)]
pub struct JumpSolution<T> {
    pub value: T,
    /// `P(N > K)`; the absolute error is at most `tail · e^{−tc} · sup|φ|`.
    pub tail: f64,
}

/// Gaussian mixture representing the solution: one component per jump-count vector.
pub fn evolved_jump_mixture<const D: usize>(
    prob: &ConstantCoeffProblem<D>,
    t: f64,
    datum: &GaussianDatum<D>,
    depth: Option<usize>,
) -> Result<JumpSolution<Vec<GaussianDatum<D>>>> {
    check_time(t)?;
    check_datum(datum)?;
    let spec = prob.levy.clone().unwrap_or_else(LevySpec::empty);
    let mut law = LevyIncrementLaw::new(&spec, t)?;
    if let Some(k) = depth {
        law = law.with_series_depth(k);
    }
    let atoms = law.decompose();
    let potential = (-t * prob.c).exp();
    // u(q) = Σ mass · u_gauss(q + loc): each component moves by tb − loc.
    let mixture = atoms
        .atoms
        .iter()
        .map(|(loc, mass)| datum.propagate(&prob.a, t, prob.b * t - loc, potential * mass))
        .collect();
    Ok(JumpSolution {
        value: mixture,
        tail: atoms.tail,
    })
}

pub fn exact_jump_solution<const D: usize>(
    prob: &ConstantCoeffProblem<D>,
    t: f64,
    q0: &Point<D>,
    datum: &GaussianDatum<D>,
    depth: Option<usize>,
) -> Result<JumpSolution<f64>> {
    let mix = evolved_jump_mixture(prob, t, datum, depth)?;
    Ok(JumpSolution {
        value: mix.value.iter().map(|g| g.eval(q0)).sum(),
        tail: mix.tail,
    })
}

/// Exact solution sampled on a grid (with or without jumps).
pub fn exact_solution_on_grid<const D: usize>(
    prob: &ConstantCoeffProblem<D>,
    t: f64,
    datum: &GaussianDatum<D>,
    grid: &GridSpec<D>,
) -> Result<GridFunction<D>> {
    let mix = evolved_jump_mixture(prob, t, datum, None)?.value;
    Ok(GridFunction::sample(grid, |q| mix.iter().map(|g| g.eval(q)).sum()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::poisson_tail;
    use approx::assert_abs_diff_eq;
    use nalgebra::Matrix2;

    fn p1(x: f64) -> Point<1> {
        Point::<1>::new(x)
    }

    fn prob1(a: f64, b: f64, c: f64, levy: Option<LevySpec<1>>) -> ConstantCoeffProblem<1> {
        ConstantCoeffProblem::new(Mat::<1>::new(a), p1(b), c, levy).unwrap()
    }

    #[test]
    fn gaussian_examples() {
        let datum = GaussianDatum::<1>::standard();
        let v = exact_gaussian_solution(&prob1(1.0, 0.0, 0.0, None), 0.5, &p1(0.0), &datum).unwrap();
        assert_abs_diff_eq!(v, 0.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(v, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-5);
        let v = exact_gaussian_solution(&prob1(1.0, 0.0, 1.0, None), 0.5, &p1(0.0), &datum).unwrap();
        assert_abs_diff_eq!(v, (-0.5f64).exp() * 0.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.42888, epsilon = 1e-5);
    }

    #[test]
    fn one_dimensional_closed_form() {
        let (a, b, c, s, m, t, q0) = (1.7, -0.4, 0.3, 0.8, 0.25, 0.6, 1.1);
        let datum = GaussianDatum::isotropic(p1(m), s);
        let v = exact_gaussian_solution(&prob1(a, b, c, None), t, &p1(q0), &datum).unwrap();
        let var = s * s + 2.0 * t * a;
        let expected = (-t * c).exp() * (s * s / var).sqrt() * (-(q0 - t * b - m).powi(2) / (2.0 * var)).exp();
        assert_abs_diff_eq!(v, expected, epsilon = 1e-15);
    }

    #[test]
    fn zero_time_returns_datum() {
        let datum = GaussianDatum::isotropic(p1(0.3), 0.7);
        let prob = prob1(2.0, 1.0, 0.5, None);
        for q in [-1.0, 0.0, 0.9] {
            let v = exact_gaussian_solution(&prob, 0.0, &p1(q), &datum).unwrap();
            assert_abs_diff_eq!(v, datum.eval(&p1(q)), epsilon = 1e-15);
        }
    }

    #[test]
    fn gaussian_oracle_rejects_jumps() {
        let levy = LevySpec::new(vec![(p1(1.0), 1.0)]).unwrap();
        let prob = prob1(1.0, 0.0, 0.0, Some(levy));
        assert!(exact_gaussian_solution(&prob, 0.5, &p1(0.0), &GaussianDatum::standard()).is_err());
    }

    #[test]
    fn empty_levy_reduces_to_gaussian() {
        let datum = GaussianDatum::<1>::standard();
        let prob = prob1(1.0, 0.3, 0.2, Some(LevySpec::empty()));
        let plain = prob1(1.0, 0.3, 0.2, None);
        let j = exact_jump_solution(&prob, 0.5, &p1(0.4), &datum, None).unwrap();
        let g = exact_gaussian_solution(&plain, 0.5, &p1(0.4), &datum).unwrap();
        assert_abs_diff_eq!(j.value, g, epsilon = 1e-15);
        assert_eq!(j.tail, 0.0);
    }

    #[test]
    fn jump_series_tail() {
        let levy = LevySpec::new(vec![(p1(1.0), 1.0)]).unwrap();
        let prob = prob1(1.0, 0.0, 0.0, Some(levy));
        let j = exact_jump_solution(&prob, 0.1, &p1(0.0), &GaussianDatum::standard(), Some(6)).unwrap();
        assert!(j.tail < 1e-10);
        assert_abs_diff_eq!(j.tail, poisson_tail(0.1, 6), epsilon = 0.0);
    }

    #[test]
    fn jump_solution_by_explicit_series() {
        // One atom y = 1, w = 1: u(q) = Σ_k e^{−t} t^k/k! · u_gauss(q + k − t/2).
        let levy = LevySpec::new(vec![(p1(1.0), 1.0)]).unwrap();
        let t: f64 = 0.3;
        let prob = prob1(1.0, 0.0, 0.0, Some(levy));
        let plain = prob1(1.0, 0.0, 0.0, None);
        let datum = GaussianDatum::<1>::standard();
        for q in [-1.0, 0.0, 0.5] {
            let mut series = 0.0;
            let mut w = (-t).exp();
            for k in 0..20 {
                if k > 0 {
                    w *= t / k as f64;
                }
                let shifted = p1(q + k as f64 - t / 2.0);
                series += w * exact_gaussian_solution(&plain, t, &shifted, &datum).unwrap();
            }
            let j = exact_jump_solution(&prob, t, &p1(q), &datum, None).unwrap();
            assert_abs_diff_eq!(j.value, series, epsilon = 1e-12);
        }
    }

    #[test]
    fn semigroup_property_in_time() {
        let datum = GaussianDatum::isotropic(p1(0.2), 0.9);
        let prob = prob1(0.8, 0.6, 0.4, None);
        let (s, t) = (0.3, 0.45);
        let direct = evolved_gaussian(&prob, s + t, &datum).unwrap();
        let composed = evolved_gaussian(&prob, t, &evolved_gaussian(&prob, s, &datum).unwrap()).unwrap();
        for q in [-2.0, 0.0, 1.5] {
            assert_abs_diff_eq!(direct.eval(&p1(q)), composed.eval(&p1(q)), epsilon = 1e-10);
        }

        // Jump mixture: propagate each component again and compare.
        let levy = LevySpec::new(vec![(p1(0.7), 0.9), (p1(-1.2), 0.4)]).unwrap();
        let prob = prob1(0.8, 0.6, 0.4, Some(levy));
        let once = evolved_jump_mixture(&prob, s + t, &datum, None).unwrap().value;
        let first = evolved_jump_mixture(&prob, s, &datum, None).unwrap().value;
        let twice: Vec<GaussianDatum<1>> = first
            .iter()
            .flat_map(|g| evolved_jump_mixture(&prob, t, g, None).unwrap().value)
            .collect();
        for q in [-2.0, 0.0, 1.5] {
            let a: f64 = once.iter().map(|g| g.eval(&p1(q))).sum();
            let b: f64 = twice.iter().map(|g| g.eval(&p1(q))).sum();
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn two_dimensional_gaussian() {
        let a = Matrix2::new(1.0, 0.3, 0.3, 0.5);
        let b = Point::<2>::new(0.2, -0.1);
        let prob = ConstantCoeffProblem::new(a, b, 0.0, None).unwrap();
        let datum = GaussianDatum::<2>::standard();
        let t = 0.4;
        let q = Point::<2>::new(0.3, -0.2);
        let cov = Mat::<2>::identity() + a * (2.0 * t);
        let d = q - b * t;
        let expected = (1.0 / cov.determinant()).sqrt() * (-0.5 * d.dot(&(cov.try_inverse().unwrap() * d))).exp();
        let v = exact_gaussian_solution(&prob, t, &q, &datum).unwrap();
        assert_abs_diff_eq!(v, expected, epsilon = 1e-14);
    }

    #[test]
    fn mass_outside_grid() {
        let datum = GaussianDatum::<1>::standard();
        let wide = GridSpec::uniform(-20.0, 20.0, 64).unwrap();
        assert!(datum.mass_outside(&wide) < 1e-80);
        let narrow = GridSpec::uniform(-2.0, 2.0, 64).unwrap();
        let exact = (2.0 * std::f64::consts::PI).sqrt() * erfc(2.0 / 2f64.sqrt());
        assert_abs_diff_eq!(datum.mass_outside(&narrow), exact, epsilon = 1e-14);
    }
}
