//! Discrete Fourier transforms of arbitrary length.
//!
//! Powers of two use an iterative radix-2 transform; other lengths go
//! through Bluestein's chirp-z construction on a padded power-of-two FFT.
//! Forward transforms use `exp(−j2πkn/N)` and are unnormalized; the inverse
//! divides by `N`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

/// In-place forward DFT.
pub fn fft(data: &mut [Complex64]) {
    transform(data, false);
}

/// In-place inverse DFT, scaled by `1/N`.
pub fn ifft(data: &mut [Complex64]) {
    transform(data, true);
    let scale = 1.0 / data.len().max(1) as f64;
    data.iter_mut().for_each(|x| *x *= scale);
}

fn transform(data: &mut [Complex64], inverse: bool) {
    let n = data.len();
    if n <= 1 {
        return;
    }
    if n.is_power_of_two() {
        radix2(data, inverse);
    } else {
        bluestein(data, inverse);
    }
}

/// `exp(sign·j·2π·k/n)` computed from a reduced angle.
fn twiddle(k: usize, n: usize, inverse: bool) -> Complex64 {
    let sign = if inverse { 1.0 } else { -1.0 };
    Complex64::from_polar(1.0, sign * 2.0 * PI * (k % n) as f64 / n as f64)
}

fn radix2(data: &mut [Complex64], inverse: bool) {
    let n = data.len();
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            data.swap(i, j);
        }
    }
    // direct twiddles for the largest stage; smaller stages stride through it
    let table: Vec<Complex64> = (0..n / 2).map(|k| twiddle(k, n, inverse)).collect();
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let w = table[k * stride];
                let a = data[start + k];
                let b = data[start + k + half] * w;
                data[start + k] = a + b;
                data[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
}

fn bluestein(data: &mut [Complex64], inverse: bool) {
    let n = data.len();
    let m = (2 * n - 1).next_power_of_two();
    // chirp w_k = exp(∓jπk²/n); k² is reduced mod 2n to keep the angle small
    let chirp: Vec<Complex64> = (0..n)
        .map(|k| {
            let k2 = (k as u128 * k as u128 % (2 * n as u128)) as usize;
            twiddle(k2, 2 * n, inverse)
        })
        .collect();
    let mut a = vec![Complex64::new(0.0, 0.0); m];
    for k in 0..n {
        a[k] = data[k] * chirp[k];
    }
    let mut b = vec![Complex64::new(0.0, 0.0); m];
    b[0] = chirp[0].conj();
    for k in 1..n {
        b[k] = chirp[k].conj();
        b[m - k] = chirp[k].conj();
    }
    radix2(&mut a, false);
    radix2(&mut b, false);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= *y;
    }
    radix2(&mut a, true);
    let scale = 1.0 / m as f64;
    for k in 0..n {
        data[k] = a[k] * chirp[k] * scale;
    }
}

/// Swap the two halves so the zero-frequency bin sits at index `n/2`.
pub fn fftshift<T>(data: &mut [T]) {
    let n = data.len();
    data.rotate_right(n / 2);
}

/// Tapering window applied before a transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    Rectangular,
    /// Periodic Hann window.
    Hann,
}

impl Window {
    pub fn coefficients(&self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * libm::cos(2.0 * PI * i as f64 / n as f64))
                .collect(),
        }
    }
}
