//! Grid discretization of `F_τ(t)` and Chernoff iteration `[F_τ(t/n)]^n φ`.

use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftDirection;

use crate::error::{invalid, Error, Result};
use crate::fft::fft_nd;
use crate::grid::{GridFunction, GridSpec};
use crate::kernels::{check_time, GaussianParams, StepKernel};
use crate::symbols::{check_tau, HamiltonSymbol, Point};

/// Grid functions whose boundary leakage exceeds this trigger a warning.
pub const LEAKAGE_WARN: f64 = 1e-6;
/// Precomputed sparse operators are limited to this many entries.
pub const MAX_STORED_ENTRIES: usize = 8_000_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StepPath {
    /// FFT convolution when every coefficient is constant, direct summation otherwise.
    #[default]
    Auto,
    Direct,
    Fft,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct StepOptions {
    pub path: StepPath,
}

#[derive(Debug)]
enum Plan {
    Fft {
        shape: Vec<usize>,
        spectrum: Vec<Complex64>,
    },
    Stored {
        row_ptr: Vec<usize>,
        cols: Vec<u32>,
        vals: Vec<f64>,
    },
    OnTheFly,
}

/// `F_τ(t)` on a fixed grid, with the kernel tabulated once for repeated application.
#[derive(Debug)]
pub struct StepOperator<'a, const D: usize> {
    kernel: StepKernel<'a, D>,
    grid: GridSpec<D>,
    radius: [usize; D],
    /// Per-node mass the kernel sends outside the grid.
    leak: Vec<f64>,
    plan: Plan,
}

fn sup_drift<const D: usize>(h: &HamiltonSymbol<D>, grid: &GridSpec<D>) -> f64 {
    let b = h.quad().b();
    if b.is_constant() {
        return b.value(&Point::<D>::zeros()).norm();
    }
    (0..grid.len()).map(|i| b.value(&grid.node(i)).norm()).fold(0.0, f64::max)
}

fn signed_node<const D: usize>(grid: &GridSpec<D>, idx: &[isize; D]) -> Point<D> {
    let lo = grid.lo();
    Point::<D>::from_fn(|k, _| lo[k] + idx[k] as f64 * grid.spacing(k))
}

/// Calls `f` for every offset in the box `[−r, r]^D`.
fn for_each_offset<const D: usize>(radius: &[usize; D], mut f: impl FnMut(&[isize; D])) {
    let mut off = [0isize; D];
    for (o, r) in off.iter_mut().zip(radius) {
        *o = -(*r as isize);
    }
    loop {
        f(&off);
        let mut k = D;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            if off[k] < radius[k] as isize {
                off[k] += 1;
                break;
            }
            off[k] = -(radius[k] as isize);
        }
    }
}

/// Gaussian parameters per node, for orderings where the frozen point is a grid node.
enum NodeParams<const D: usize> {
    AtOutput(Vec<GaussianParams<D>>),
    AtInput(Vec<GaussianParams<D>>),
    Midpoint,
}

impl<'a, const D: usize> StepOperator<'a, D> {
    pub fn new(h: &'a HamiltonSymbol<D>, tau: f64, t: f64, grid: &GridSpec<D>) -> Result<Self> {
        Self::with_options(h, tau, t, grid, StepOptions::default())
    }

    pub fn with_options(
        h: &'a HamiltonSymbol<D>,
        tau: f64,
        t: f64,
        grid: &GridSpec<D>,
        opts: StepOptions,
    ) -> Result<Self> {
        check_tau(tau)?;
        check_time(t)?;
        let kernel = StepKernel::new(h, tau, t)?;
        let reach = kernel.reach(sup_drift(h, grid));
        let points = grid.points();
        let mut radius = [0usize; D];
        for k in 0..D {
            radius[k] = ((reach / grid.spacing(k)).ceil() as usize).min(points[k] - 1);
        }
        let width = (2.0 * h.quad().a0() * t).sqrt();
        if (0..D).any(|k| width < grid.spacing(k)) {
            log::warn!("kernel width {width:.3e} is below the grid spacing; quadrature is under-resolved");
        }
        let use_fft = match opts.path {
            StepPath::Auto => h.is_constant(),
            StepPath::Fft => {
                if !h.is_constant() {
                    return Err(invalid("path", "FFT application requires constant coefficients"));
                }
                true
            }
            StepPath::Direct => false,
        };
        let mut op = Self {
            kernel,
            grid: grid.clone(),
            radius,
            leak: Vec::new(),
            plan: Plan::OnTheFly,
        };
        let node_params = op.node_params()?;
        op.leak = op.boundary_leak(&node_params)?;
        op.plan = if use_fft {
            op.fft_plan()?
        } else {
            let entries: usize = grid.len() * radius.iter().map(|r| 2 * r + 1).product::<usize>();
            if entries <= MAX_STORED_ENTRIES {
                op.stored_plan(&node_params)?
            } else {
                Plan::OnTheFly
            }
        };
        Ok(op)
    }

    pub fn grid(&self) -> &GridSpec<D> {
        &self.grid
    }
    pub fn kernel(&self) -> &StepKernel<'a, D> {
        &self.kernel
    }
    /// Kernel support half-width in grid steps per axis.
    pub fn radius(&self) -> [usize; D] {
        self.radius
    }
    pub fn uses_fft(&self) -> bool {
        matches!(self.plan, Plan::Fft { .. })
    }

    fn node_params(&self) -> Result<NodeParams<D>> {
        let k = &self.kernel;
        let all = |g: &GridSpec<D>| -> Result<Vec<GaussianParams<D>>> {
            (0..g.len()).into_par_iter().map(|i| k.params_at(&g.node(i))).collect()
        };
        Ok(if k.symbol().quad().is_constant() {
            let p = k.params_at(&Point::<D>::zeros())?;
            NodeParams::AtOutput(vec![p; self.grid.len()])
        } else if k.tau() == 1.0 {
            NodeParams::AtOutput(all(&self.grid)?)
        } else if k.tau() == 0.0 {
            NodeParams::AtInput(all(&self.grid)?)
        } else {
            NodeParams::Midpoint
        })
    }

    #[inline]
    fn entry(&self, np: &NodeParams<D>, i: usize, qi: &Point<D>, j: usize, qj: &Point<D>) -> Result<f64> {
        let z = qi - qj;
        Ok(match np {
            NodeParams::AtOutput(p) => self.kernel.eval_with(&p[i], &z),
            NodeParams::AtInput(p) => self.kernel.eval_with(&p[j], &z),
            NodeParams::Midpoint => self.kernel.eval_with(&self.kernel.params_at(&self.kernel.midpoint(qi, qj))?, &z),
        })
    }

    /// Input-node range `[lo, hi)` per axis reachable from output node `idx`.
    fn window(&self, idx: &[usize; D]) -> ([usize; D], [usize; D]) {
        let pts = self.grid.points();
        let mut lo = [0; D];
        let mut hi = [0; D];
        for k in 0..D {
            lo[k] = idx[k].saturating_sub(self.radius[k]);
            hi[k] = (idx[k] + self.radius[k] + 1).min(pts[k]);
        }
        (lo, hi)
    }

    fn for_each_in_window(&self, i: usize, mut f: impl FnMut(usize)) {
        let idx = self.grid.multi_index(i);
        let (lo, hi) = self.window(&idx);
        let mut cur = lo;
        loop {
            f(self.grid.flat_index(&cur));
            let mut k = D;
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                cur[k] += 1;
                if cur[k] < hi[k] {
                    break;
                }
                cur[k] = lo[k];
            }
        }
    }

    fn row(&self, np: &NodeParams<D>, i: usize) -> Result<Vec<(u32, f64)>> {
        let qi = self.grid.node(i);
        let hd = self.grid.cell_volume();
        let mut row = Vec::new();
        let mut err = None;
        self.for_each_in_window(i, |j| {
            if err.is_some() {
                return;
            }
            let qj = self.grid.node(j);
            match self.entry(np, i, &qi, j, &qj) {
                Ok(k) => row.push((j as u32, hd * self.grid.trapezoid_weight(j) * k)),
                Err(e) => err = Some(e),
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(row),
        }
    }

    fn stored_plan(&self, np: &NodeParams<D>) -> Result<Plan> {
        let rows: Vec<Vec<(u32, f64)>> = (0..self.grid.len())
            .into_par_iter()
            .map(|i| self.row(np, i))
            .collect::<Result<_>>()?;
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for r in rows {
            for (c, v) in r {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Ok(Plan::Stored { row_ptr, cols, vals })
    }

    fn fft_plan(&self) -> Result<Plan> {
        let pts = self.grid.points();
        let shape: Vec<usize> = (0..D).map(|k| (pts[k] + self.radius[k] + 1).next_power_of_two()).collect();
        let total: usize = shape.iter().product();
        let params = self.kernel.params_at(&Point::<D>::zeros())?;
        let mut data = vec![Complex64::default(); total];
        let steps: Vec<f64> = (0..D).map(|k| self.grid.spacing(k)).collect();
        for_each_offset(&self.radius, |off| {
            let z = Point::<D>::from_fn(|k, _| off[k] as f64 * steps[k]);
            let mut flat = 0;
            for k in 0..D {
                flat = flat * shape[k] + off[k].rem_euclid(shape[k] as isize) as usize;
            }
            data[flat] = Complex64::new(self.kernel.eval_with(&params, &z), 0.0);
        });
        let shape_arr: [usize; D] = shape.clone().try_into().expect("shape length is D");
        fft_nd(&mut data, shape_arr, FftDirection::Forward);
        Ok(Plan::Fft { shape, spectrum: data })
    }

    /// Mass the kernel column of each input node places on lattice points outside the grid.
    fn boundary_leak(&self, np: &NodeParams<D>) -> Result<Vec<f64>> {
        let pts = self.grid.points();
        let hd = self.grid.cell_volume();
        (0..self.grid.len())
            .into_par_iter()
            .map(|j| {
                let jdx = self.grid.multi_index(j);
                let near = (0..D).any(|k| jdx[k] < self.radius[k] || jdx[k] + self.radius[k] >= pts[k]);
                if !near {
                    return Ok(0.0);
                }
                let qj = self.grid.node(j);
                let mut sum = 0.0;
                let mut err = None;
                for_each_offset(&self.radius, |off| {
                    let mut idx = [0isize; D];
                    let mut inside = true;
                    for k in 0..D {
                        idx[k] = jdx[k] as isize + off[k];
                        inside &= idx[k] >= 0 && idx[k] < pts[k] as isize;
                    }
                    if inside || err.is_some() {
                        return;
                    }
                    let qi = signed_node(&self.grid, &idx);
                    let z = qi - qj;
                    let v = match np {
                        NodeParams::AtInput(p) => Ok(self.kernel.eval_with(&p[j], &z)),
                        NodeParams::AtOutput(_) if self.kernel.symbol().quad().is_constant() => {
                            let NodeParams::AtOutput(p) = np else { unreachable!() };
                            Ok(self.kernel.eval_with(&p[0], &z))
                        }
                        _ => self
                            .kernel
                            .params_at(&self.kernel.midpoint(&qi, &qj))
                            .map(|p| self.kernel.eval_with(&p, &z)),
                    };
                    match v {
                        Ok(v) => sum += hd * v,
                        Err(e) => err = Some(e),
                    }
                });
                match err {
                    Some(e) => Err(e),
                    None => Ok(sum),
                }
            })
            .collect()
    }

    /// Estimated `L1` mass of `F_τ(t)φ` lost across the grid boundary.
    pub fn leakage(&self, phi: &GridFunction<D>) -> f64 {
        self.grid.cell_volume()
            * phi
                .values()
            .iter()
            .zip(&self.leak)
            .enumerate()
                .map(|(j, (v, l))| self.grid.trapezoid_weight(j) * v.abs() * l)
                .sum::<f64>()
    }

    pub fn apply(&self, phi: &GridFunction<D>) -> Result<GridFunction<D>> {
        if phi.spec() != &self.grid {
            return Err(Error::Grid("grid function does not live on the operator grid".into()));
        }
        let lost = self.leakage(phi);
        if lost > LEAKAGE_WARN {
            log::warn!(
                "kernel mass {lost:.3e} leaves the grid at t = {}; widen the grid",
                self.kernel.t()
            );
        }
        let src = phi.values();
        let mut out = vec![0.0; self.grid.len()];
        match &self.plan {
            Plan::Stored { row_ptr, cols, vals } => {
                out.par_iter_mut().enumerate().for_each(|(i, o)| {
                    let r = row_ptr[i]..row_ptr[i + 1];
                    *o = cols[r.clone()].iter().zip(&vals[r]).map(|(c, v)| v * src[*c as usize]).sum();
                });
            }
            Plan::OnTheFly => {
                let np = self.node_params()?;
                out.par_iter_mut()
                    .enumerate()
                    .try_for_each(|(i, o)| -> Result<()> {
                        *o = self.row(&np, i)?.iter().map(|(c, v)| v * src[*c as usize]).sum();
                        Ok(())
                    })?;
            }
            Plan::Fft { shape, spectrum } => {
                let pts = self.grid.points();
                let total: usize = shape.iter().product();
                let hd = self.grid.cell_volume();
                let mut data = vec![Complex64::default(); total];
                for (j, v) in src.iter().enumerate() {
                    data[padded_index(&self.grid.multi_index(j), shape)] =
                        Complex64::new(hd * self.grid.trapezoid_weight(j) * v, 0.0);
                }
                let shape_arr: [usize; D] = shape.clone().try_into().expect("shape length is D");
                fft_nd(&mut data, shape_arr, FftDirection::Forward);
                for (d, s) in data.iter_mut().zip(spectrum) {
                    *d *= s;
                }
                fft_nd(&mut data, shape_arr, FftDirection::Inverse);
                let scale = 1.0 / total as f64;
                for (i, o) in out.iter_mut().enumerate() {
                    let idx = self.grid.multi_index(i);
                    debug_assert!((0..D).all(|k| idx[k] < pts[k]));
                    *o = data[padded_index(&idx, shape)].re * scale;
                }
            }
        }
        GridFunction::new(self.grid.clone(), out)
    }

    /// `[F_τ(t)]^n φ`; aborts once the `L1` norm exceeds `bound`.
    pub fn iterate(&self, n: usize, phi: &GridFunction<D>, bound: Option<f64>) -> Result<GridFunction<D>> {
        if n == 0 {
            return Err(invalid("n", "iteration count must be at least 1"));
        }
        let mut u = phi.clone();
        for step in 1..=n {
            u = self.apply(&u)?;
            if let Some(bound) = bound {
                let norm = u.l1_norm();
                if !(norm <= bound) {
                    return Err(Error::NumericalGuard { norm, bound, step });
                }
            }
        }
        Ok(u)
    }
}

fn padded_index<const D: usize>(idx: &[usize; D], shape: &[usize]) -> usize {
    let mut flat = 0;
    for k in 0..D {
        flat = flat * shape[k] + idx[k];
    }
    flat
}

/// `(F_τ(t)φ)(q_i) = h^d Σ_j w_j φ(q_j) K_τ(t; q_i, q_j)`.
pub fn apply_f<const D: usize>(
    h: &HamiltonSymbol<D>,
    tau: f64,
    t: f64,
    phi: &GridFunction<D>,
) -> Result<GridFunction<D>> {
    StepOperator::new(h, tau, t, phi.spec())?.apply(phi)
}

/// `k̂ = max(0, −min c) + 1`, with the minimum taken over grid nodes.
pub fn growth_guard_rate<const D: usize>(h: &HamiltonSymbol<D>, grid: &GridSpec<D>) -> f64 {
    let c = h.quad().c();
    let min_c = if c.is_constant() {
        c.value(&Point::<D>::zeros())
    } else {
        (0..grid.len()).map(|i| c.value(&grid.node(i))).fold(f64::INFINITY, f64::min)
    };
    (-min_c).max(0.0) + 1.0
}

/// `[F_τ(t/n)]^n φ`, aborting if the `L1` norm exceeds `e^{2k̂t}‖φ‖₁`.
pub fn chernoff_iterate<const D: usize>(
    h: &HamiltonSymbol<D>,
    tau: f64,
    t: f64,
    n: usize,
    phi: &GridFunction<D>,
) -> Result<GridFunction<D>> {
    if n == 0 {
        return Err(invalid("n", "iteration count must be at least 1"));
    }
    check_time(t)?;
    let bound = (2.0 * growth_guard_rate(h, phi.spec()) * t).exp() * phi.l1_norm();
    StepOperator::new(h, tau, t / n as f64, phi.spec())?.iterate(n, phi, Some(bound))
}

#[derive(Clone, Debug)]
pub struct SweepRow<const D: usize> {
    pub n: usize,
    pub iterate: GridFunction<D>,
    pub l1_norm: f64,
    pub wall_ms: f64,
}

/// Chernoff iterates for several `n`, with wall time per run.
pub fn chernoff_sweep<const D: usize>(
    h: &HamiltonSymbol<D>,
    tau: f64,
    t: f64,
    ns: &[usize],
    phi: &GridFunction<D>,
) -> Result<Vec<SweepRow<D>>> {
    if ns.is_empty() {
        return Err(invalid("n_sweep", "at least one iteration count is required"));
    }
    ns.iter()
        .map(|&n| {
            let start = Instant::now();
            let iterate = chernoff_iterate(h, tau, t, n, phi)?;
            Ok(SweepRow {
                n,
                l1_norm: iterate.l1_norm(),
                iterate,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            })
        })
        .collect()
}

/// `log(‖F_τ(t)φ‖₁ / ‖φ‖₁) / t`
pub fn l1_growth<const D: usize>(h: &HamiltonSymbol<D>, tau: f64, t: f64, phi: &GridFunction<D>) -> Result<f64> {
    let norm = phi.l1_norm();
    if !(norm > 0.0) {
        return Err(invalid("phi", "datum must be nonzero"));
    }
    Ok((apply_f(h, tau, t, phi)?.l1_norm() / norm).ln() / t)
}

/// `‖F_{τ1}(t)φ − F_{τ2}(t)φ‖₁`
pub fn quantization_step_gap<const D: usize>(
    h: &HamiltonSymbol<D>,
    tau1: f64,
    tau2: f64,
    t: f64,
    phi: &GridFunction<D>,
) -> Result<f64> {
    if tau1 == tau2 {
        check_tau(tau1)?;
        check_time(t)?;
        return Ok(0.0);
    }
    Ok(apply_f(h, tau1, t, phi)?.l1_distance(&apply_f(h, tau2, t, phi)?))
}
