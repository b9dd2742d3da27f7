//! Closed-form small-matrix routines for the supported dimensions (d = 1, 2).

use crate::symbols::Mat;

/// Smallest and largest eigenvalue of the symmetric part of `a`.
pub(crate) fn sym_eigen_bounds<const D: usize>(a: &Mat<D>) -> (f64, f64) {
    match D {
        1 => (a[(0, 0)], a[(0, 0)]),
        2 => {
            let off = 0.5 * (a[(0, 1)] + a[(1, 0)]);
            let mean = 0.5 * (a[(0, 0)] + a[(1, 1)]);
            let half = 0.5 * (a[(0, 0)] - a[(1, 1)]);
            let r = half.hypot(off);
            (mean - r, mean + r)
        }
        _ => (f64::NAN, f64::NAN),
    }
}

pub(crate) fn det<const D: usize>(a: &Mat<D>) -> f64 {
    match D {
        1 => a[(0, 0)],
        2 => a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)],
        _ => panic!("dimension {D} is not supported"),
    }
}

/// Lower-triangular `L` with `L Lᵀ = a`, for symmetric positive-definite `a`.
pub(crate) fn cholesky<const D: usize>(a: &Mat<D>) -> Option<Mat<D>> {
    let mut l = Mat::<D>::zeros();
    match D {
        1 => {
            if !(a[(0, 0)] > 0.0) {
                return None;
            }
            l[(0, 0)] = a[(0, 0)].sqrt();
        }
        2 => {
            if !(a[(0, 0)] > 0.0) {
                return None;
            }
            let l00 = a[(0, 0)].sqrt();
            let l10 = a[(1, 0)] / l00;
            let rest = a[(1, 1)] - l10 * l10;
            if !(rest > 0.0) {
                return None;
            }
            l[(0, 0)] = l00;
            l[(1, 0)] = l10;
            l[(1, 1)] = rest.sqrt();
        }
        _ => panic!("dimension {D} is not supported"),
    }
    Some(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Matrix2;

    #[test]
    fn two_by_two() {
        let a: Mat<2> = Matrix2::new(2.0, 0.5, 0.5, 1.0);
        let (lo, hi) = sym_eigen_bounds(&a);
        assert_abs_diff_eq!(lo + hi, 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(lo * hi, 1.75, epsilon = 1e-14);
        assert_abs_diff_eq!(det(&a), 1.75, epsilon = 1e-15);
        let l = cholesky(&a).unwrap();
        assert!((l * l.transpose() - a).norm() < 1e-14);
        assert!(cholesky(&Matrix2::new(1.0, 2.0, 2.0, 1.0)).is_none());
    }
}
