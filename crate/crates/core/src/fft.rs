//! Axis-by-axis complex FFTs on row-major D-dimensional arrays.

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

pub(crate) fn fft_nd<const D: usize>(data: &mut [Complex64], shape: [usize; D], direction: FftDirection) {
    let mut planner = FftPlanner::<f64>::new();
    let total: usize = shape.iter().product();
    debug_assert_eq!(total, data.len());
    for axis in 0..D {
        let n = shape[axis];
        let stride: usize = shape[axis + 1..].iter().product();
        let fft = planner.plan_fft(n, direction);
        let mut line = vec![Complex64::default(); n];
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        for base in 0..total {
            // Visit each line once: base must have index 0 along `axis`.
            if !(base / stride).is_multiple_of(n) {
                continue;
            }
            for (i, slot) in line.iter_mut().enumerate() {
                *slot = data[base + i * stride];
            }
            fft.process_with_scratch(&mut line, &mut scratch);
            for (i, v) in line.iter().enumerate() {
                data[base + i * stride] = *v;
            }
        }
    }
}
