//! Space-time fields: scalar or vector functions sampled on uniform time
//! slices over a shared spatial lattice. The value type flowing through
//! R^lambda, BR^lambda and the series.

use crate::error::{Error, Result};
use crate::grid::{interp_bicubic, interp_bilinear, Lattice2};

/// How a field continues past its last time slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    /// Vanishes beyond the horizon (compactly supported drifts and
    /// observables).
    Zero,
    /// Holds the final slice for all later times (constant-in-time fields).
    HoldLast,
}

#[derive(Clone)]
pub struct SpaceTimeField {
    pub lattice: Lattice2,
    pub dt: f64,
    /// Number of slices (K + 1 for slices at 0, dt, ..., K dt).
    pub slices: usize,
    pub comps: usize,
    pub tail: Tail,
    /// Layout: slice-major, then component, then row-major lattice.
    pub data: Vec<f64>,
}

impl SpaceTimeField {
    pub fn zeros(lattice: Lattice2, dt: f64, slices: usize, comps: usize, tail: Tail) -> Self {
        assert!(dt > 0.0 && slices >= 1 && comps >= 1);
        SpaceTimeField {
            lattice,
            dt,
            slices,
            comps,
            tail,
            data: vec![0.0; slices * comps * lattice.len()],
        }
    }

    pub fn from_fn<F: Fn(f64, f64, f64) -> f64>(
        lattice: Lattice2,
        dt: f64,
        slices: usize,
        tail: Tail,
        f: F,
    ) -> Self {
        let mut out = Self::zeros(lattice, dt, slices, 1, tail);
        let n = lattice.n;
        for k in 0..slices {
            let t = k as f64 * dt;
            let sl = out.slice_mut(k, 0);
            for i in 0..n {
                for j in 0..n {
                    sl[i * n + j] = f(t, lattice.x(i), lattice.x(j));
                }
            }
        }
        out
    }

    pub fn horizon(&self) -> f64 {
        (self.slices - 1) as f64 * self.dt
    }

    #[inline]
    pub fn slice(&self, k: usize, comp: usize) -> &[f64] {
        let len = self.lattice.len();
        let off = (k * self.comps + comp) * len;
        &self.data[off..off + len]
    }

    #[inline]
    pub fn slice_mut(&mut self, k: usize, comp: usize) -> &mut [f64] {
        let len = self.lattice.len();
        let off = (k * self.comps + comp) * len;
        &mut self.data[off..off + len]
    }

    pub fn sup_norm(&self) -> f64 {
        if self.comps == 1 {
            self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        } else {
            // pointwise euclidean magnitude over components
            let len = self.lattice.len();
            let mut m = 0.0f64;
            for k in 0..self.slices {
                for idx in 0..len {
                    let mut s = 0.0;
                    for c in 0..self.comps {
                        let v = self.slice(k, c)[idx];
                        s += v * v;
                    }
                    m = m.max(s.sqrt());
                }
            }
            m
        }
    }

    /// Trailing slices that are identically zero are consistent with
    /// compact support; used by validation.
    pub fn support_slices(&self) -> usize {
        for k in (0..self.slices).rev() {
            let len = self.lattice.len();
            let nonzero = (0..self.comps).any(|c| self.slice(k, c)[..len].iter().any(|&v| v != 0.0));
            if nonzero {
                return k + 1;
            }
        }
        0
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("field contains non-finite values"));
        }
        Ok(())
    }

    /// Linear in time, bilinear in space; respects the tail mode.
    pub fn interp(&self, t: f64, x: [f64; 2], comp: usize) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let tmax = self.horizon();
        if t >= tmax {
            return match self.tail {
                Tail::Zero => {
                    if t > tmax {
                        0.0
                    } else {
                        interp_bilinear(self.slice(self.slices - 1, comp), &self.lattice, x[0], x[1])
                    }
                }
                Tail::HoldLast => {
                    interp_bilinear(self.slice(self.slices - 1, comp), &self.lattice, x[0], x[1])
                }
            };
        }
        let f = t / self.dt;
        let k = (f.floor() as usize).min(self.slices - 2);
        let w = f - k as f64;
        let a = interp_bilinear(self.slice(k, comp), &self.lattice, x[0], x[1]);
        let b = interp_bilinear(self.slice(k + 1, comp), &self.lattice, x[0], x[1]);
        a * (1.0 - w) + b * w
    }

    /// Bicubic spatial interpolation on one slice (0 outside the stencil).
    pub fn interp_slice_bicubic(&self, k: usize, comp: usize, x: [f64; 2]) -> f64 {
        interp_bicubic(self.slice(k, comp), &self.lattice, x[0], x[1]).unwrap_or(0.0)
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }

    pub fn axpy(&mut self, c: f64, other: &SpaceTimeField) {
        assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += c * b);
    }
}

const FIELD_MAGIC: &[u8; 4] = b"SSF1";

/// Binary slice file: magic, d, N, slices, comps, L, dt, alpha header then
/// f64 LE data in storage order.
pub fn write_field_binary<W: std::io::Write>(
    w: &mut W,
    f: &SpaceTimeField,
    alpha: f64,
) -> Result<()> {
    w.write_all(FIELD_MAGIC)?;
    for v in [2u32, f.lattice.n as u32, f.slices as u32, f.comps as u32] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in [f.lattice.extent, f.dt, alpha] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&[matches!(f.tail, Tail::HoldLast) as u8])?;
    for v in &f.data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_field_binary<R: std::io::Read>(r: &mut R) -> Result<(SpaceTimeField, f64)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != FIELD_MAGIC {
        return Err(Error::invalid("bad field file magic"));
    }
    let mut u32buf = [0u8; 4];
    let mut read_u32 = |r: &mut R| -> Result<u32> {
        r.read_exact(&mut u32buf)?;
        Ok(u32::from_le_bytes(u32buf))
    };
    let d = read_u32(r)?;
    if d != 2 {
        return Err(Error::invalid("only d = 2 fields supported"));
    }
    let n = read_u32(r)? as usize;
    let slices = read_u32(r)? as usize;
    let comps = read_u32(r)? as usize;
    let mut f64buf = [0u8; 8];
    let mut read_f64 = |r: &mut R| -> Result<f64> {
        r.read_exact(&mut f64buf)?;
        Ok(f64::from_le_bytes(f64buf))
    };
    let extent = read_f64(r)?;
    let dt = read_f64(r)?;
    let alpha = read_f64(r)?;
    let mut tb = [0u8; 1];
    r.read_exact(&mut tb)?;
    let tail = if tb[0] == 1 { Tail::HoldLast } else { Tail::Zero };
    let mut field = SpaceTimeField::zeros(Lattice2::new(n, extent), dt, slices, comps, tail);
    let mut buf = vec![0u8; field.data.len() * 8];
    r.read_exact(&mut buf)?;
    for (i, chunk) in buf.chunks_exact(8).enumerate() {
        field.data[i] = f64::from_le_bytes(chunk.try_into().unwrap());
    }
    Ok((field, alpha))
}

/// sin^4 window on [0, 1]: C^3 at both ends with tame low-order
/// derivatives, the workhorse time profile for observables and drifts.
pub fn smooth_window(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        let v = (std::f64::consts::PI * s).sin();
        v * v * v * v
    }
}

/// cos^4 radial bump of radius `rho`, value 1 at the origin.
pub fn radial_bump(r: f64, rho: f64) -> f64 {
    if r >= rho {
        0.0
    } else {
        let v = (std::f64::consts::FRAC_PI_2 * r / rho).cos();
        v * v * v * v
    }
}
