//! Periodic spatial lattice over [-L, L)^2, its dual lattice, FFT-backed
//! spectral synthesis / symbol application, and interpolation.
//!
//! Conventions used throughout the crate:
//!
//! * `synthesize(S)` discretizes the inversion integral
//!   f(x_j) = (2 pi)^{-2} int e^{-i u. x_j} S(u) du
//!   on the dual lattice u_m = m * (pi/L), m in [-N/2, N/2)^2. This is the
//!   representation used to build kernel fields from symbols like
//!   e^{-t psi(u)}, -i u e^{-t psi(u)}, -psi(u) e^{-t psi(u)}.
//!
//! * `apply_symbol(f, S)` multiplies the DFT modes of a lattice field by
//!   S(u_m). In this representation a mode is the plane wave e^{+i u. x},
//!   so the stable semigroup is S(u) = e^{-t psi(u)}, the generator is
//!   S(u) = -psi(u), and d/dx_k is S(u) = i u_k.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice2 {
    pub n: usize,
    pub extent: f64,
}

impl Lattice2 {
    pub fn new(n: usize, extent: f64) -> Self {
        assert!(n >= 2 && extent > 0.0);
        Lattice2 { n, extent }
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    /// Cell width.
    pub fn h(&self) -> f64 {
        2.0 * self.extent / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        let h = self.h();
        h * h
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.extent + i as f64 * self.h()
    }

    /// Dual lattice spacing.
    pub fn du(&self) -> f64 {
        std::f64::consts::PI / self.extent
    }

    /// Signed frequency index for FFT bin m.
    pub fn freq(&self, m: usize) -> f64 {
        let ms = if m < self.n / 2 {
            m as isize
        } else {
            m as isize - self.n as isize
        };
        ms as f64 * self.du()
    }

    pub fn u_max(&self) -> f64 {
        self.n as f64 / 2.0 * self.du()
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= -self.extent && x < self.extent && y >= -self.extent && y < self.extent
    }
}

/// Planned FFTs for one lattice size, reused across calls.
pub struct SpectralOps {
    pub lattice: Lattice2,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl SpectralOps {
    pub fn new(lattice: Lattice2) -> Self {
        let mut planner = FftPlanner::new();
        SpectralOps {
            lattice,
            fwd: planner.plan_fft_forward(lattice.n),
            inv: planner.plan_fft_inverse(lattice.n),
        }
    }

    fn fft2(&self, data: &mut [Complex64], forward: bool) {
        let n = self.lattice.n;
        let f = if forward { &self.fwd } else { &self.inv };
        data.par_chunks_mut(n).for_each(|row| f.process(row));
        // transpose, column pass, transpose back
        transpose_square(data, n);
        data.par_chunks_mut(n).for_each(|row| f.process(row));
        transpose_square(data, n);
    }

    /// Evaluate a symbol on the dual lattice in FFT bin order.
    pub fn symbol_grid<F: Fn(f64, f64) -> Complex64 + Sync>(&self, sym: F) -> Vec<Complex64> {
        let n = self.lattice.n;
        let mut out = vec![Complex64::default(); n * n];
        out.par_chunks_mut(n).enumerate().for_each(|(m1, row)| {
            let u1 = self.lattice.freq(m1);
            for (m2, v) in row.iter_mut().enumerate() {
                *v = sym(u1, self.lattice.freq(m2));
            }
        });
        out
    }

    /// Discretized Fourier inversion of a symbol sampled on the dual lattice
    /// (bin order). Returns (real field, max |imaginary residue|).
    pub fn synthesize(&self, symbol: &[Complex64]) -> (Vec<f64>, f64) {
        let n = self.lattice.n;
        assert_eq!(symbol.len(), n * n);
        let mut buf: Vec<Complex64> = (0..n * n)
            .map(|idx| {
                let (m1, m2) = (idx / n, idx % n);
                let sgn = if (m1 + m2) % 2 == 0 { 1.0 } else { -1.0 };
                symbol[idx] * sgn
            })
            .collect();
        self.fft2(&mut buf, true);
        let scale = (self.lattice.du() / (2.0 * std::f64::consts::PI)).powi(2);
        let mut imag = 0.0f64;
        let out = buf
            .iter()
            .map(|c| {
                imag = imag.max(c.im.abs() * scale);
                c.re * scale
            })
            .collect();
        (out, imag)
    }

    /// Forward transform of a real lattice field into FFT bin order (the
    /// representation `apply_symbol` multiplies in).
    pub fn modes(&self, field: &[f64]) -> Vec<Complex64> {
        let n = self.lattice.n;
        assert_eq!(field.len(), n * n);
        let mut buf: Vec<Complex64> = field.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft2(&mut buf, true);
        buf
    }

    /// Inverse of `modes` (real part; imaginary residue discarded).
    pub fn field(&self, modes: &[Complex64]) -> Vec<f64> {
        let n = self.lattice.n;
        let mut buf = modes.to_vec();
        self.fft2(&mut buf, false);
        let s = 1.0 / (n * n) as f64;
        buf.iter().map(|c| c.re * s).collect()
    }

    pub fn field_complex(&self, modes: &[Complex64]) -> Vec<Complex64> {
        let n = self.lattice.n;
        let mut buf = modes.to_vec();
        self.fft2(&mut buf, false);
        let s = 1.0 / (n * n) as f64;
        buf.iter_mut().for_each(|c| *c *= s);
        buf
    }

    /// Pointwise multiply the DFT modes of `field` by a symbol grid and
    /// transform back: the lattice version of a Fourier multiplier.
    pub fn apply_symbol(&self, field: &[f64], symbol: &[Complex64]) -> Vec<f64> {
        let mut m = self.modes(field);
        m.iter_mut().zip(symbol).for_each(|(a, s)| *a *= s);
        self.field(&m)
    }
}

fn transpose_square(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Catmull-Rom cubic weights for sample offsets {-1, 0, 1, 2} at fraction s.
#[inline]
pub fn catmull_rom(s: f64) -> [f64; 4] {
    let s2 = s * s;
    let s3 = s2 * s;
    [
        -0.5 * s3 + s2 - 0.5 * s,
        1.5 * s3 - 2.5 * s2 + 1.0,
        -1.5 * s3 + 2.0 * s2 + 0.5 * s,
        0.5 * s3 - 0.5 * s2,
    ]
}

/// Derivative of the Catmull-Rom weights with respect to s.
#[inline]
pub fn catmull_rom_d(s: f64) -> [f64; 4] {
    let s2 = s * s;
    [
        -1.5 * s2 + 2.0 * s - 0.5,
        4.5 * s2 - 5.0 * s,
        -4.5 * s2 + 4.0 * s + 0.5,
        1.5 * s2 - s,
    ]
}

#[inline]
pub fn catmull_rom_dd(s: f64) -> [f64; 4] {
    [
        -3.0 * s + 2.0,
        9.0 * s - 5.0,
        -9.0 * s + 4.0,
        3.0 * s - 1.0,
    ]
}

/// Bicubic (Catmull-Rom) interpolation of a row-major lattice field;
/// returns None where the 4x4 stencil does not fit (callers clamp to 0).
pub fn interp_bicubic(field: &[f64], lat: &Lattice2, x: f64, y: f64) -> Option<f64> {
    let h = lat.h();
    let fx = (x + lat.extent) / h;
    let fy = (y + lat.extent) / h;
    let i = fx.floor() as isize;
    let j = fy.floor() as isize;
    let n = lat.n as isize;
    if i < 1 || j < 1 || i > n - 3 || j > n - 3 {
        return None;
    }
    let wx = catmull_rom(fx - i as f64);
    let wy = catmull_rom(fy - j as f64);
    let (i, j, n) = (i as usize, j as usize, lat.n);
    let mut acc = 0.0;
    for a in 0..4 {
        let row = &field[(i + a - 1) * n..];
        let mut r = 0.0;
        for b in 0..4 {
            r += wy[b] * row[j + b - 1];
        }
        acc += wx[a] * r;
    }
    Some(acc)
}

/// Bilinear interpolation, zero outside the footprint.
pub fn interp_bilinear(field: &[f64], lat: &Lattice2, x: f64, y: f64) -> f64 {
    let h = lat.h();
    let fx = (x + lat.extent) / h;
    let fy = (y + lat.extent) / h;
    let i = fx.floor() as isize;
    let j = fy.floor() as isize;
    let n = lat.n as isize;
    if i < 0 || j < 0 || i > n - 2 || j > n - 2 {
        return 0.0;
    }
    let (sx, sy) = (fx - i as f64, fy - j as f64);
    let (i, j, n) = (i as usize, j as usize, lat.n);
    field[i * n + j] * (1.0 - sx) * (1.0 - sy)
        + field[(i + 1) * n + j] * sx * (1.0 - sy)
        + field[i * n + j + 1] * (1.0 - sx) * sy
        + field[(i + 1) * n + j + 1] * sx * sy
}
