//! Radix-2 complex FFT over one or more axes of a row-major (axis 0 fastest) array.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::C64;

/// Precomputed twiddles and bit-reversal table for one transform length.
#[derive(Clone, Debug)]
pub struct FftPlan {
    n: usize,
    twiddles: Vec<C64>,
    rev: Vec<usize>,
}

impl FftPlan {
    /// Panics if `n` is not a power of two; callers validate lengths at grid construction.
    pub fn new(n: usize) -> Self {
        assert!(n.is_power_of_two(), "fft length must be a power of two");
        let bits = n.trailing_zeros();
        let rev = (0..n)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        let twiddles = (0..n / 2)
            .map(|k| {
                let t = -2.0 * PI * k as f64 / n as f64;
                C64::new(libm::cos(t), libm::sin(t))
            })
            .collect();
        FftPlan { n, twiddles, rev }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place unnormalized transform `X_k = sum_m x_m e^{-2 pi i k m / n}` (or `+i` when `inverse`).
    pub fn run(&self, data: &mut [C64], inverse: bool) {
        let n = self.n;
        debug_assert_eq!(data.len(), n);
        for i in 0..n {
            let j = self.rev[i];
            if j > i {
                data.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let step = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let mut w = self.twiddles[k * step];
                    if inverse {
                        w = w.conj();
                    }
                    let a = data[start + k];
                    let b = data[start + k + half] * w;
                    data[start + k] = a + b;
                    data[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }
}

/// Transform every axis of a `dim`-dimensional cube with side `plan.len()`.
pub fn fft_nd(plan: &FftPlan, dim: usize, data: &mut [C64], inverse: bool) {
    let n = plan.len();
    if dim == 1 {
        plan.run(data, inverse);
        return;
    }
    let total = data.len();
    let mut line = alloc::vec![C64::new(0.0, 0.0); n];
    for axis in 0..dim {
        let stride = n.pow(axis as u32);
        for base in 0..total {
            // visit each line once, from its first element
            if !(base / stride).is_multiple_of(n) {
                continue;
            }
            for (i, v) in line.iter_mut().enumerate() {
                *v = data[base + i * stride];
            }
            plan.run(&mut line, inverse);
            for (i, v) in line.iter().enumerate() {
                data[base + i * stride] = *v;
            }
        }
    }
}
