//! Heat kernel of the stable process on a periodic lattice: Fourier
//! inversion of e^{-t psi}, evaluation at arbitrary (t, x) through the
//! scaling law, generator fields, and lattice L^p norms.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{interp_bicubic, Lattice2, SpectralOps};
use crate::law::StableLaw;
use crate::quad;

/// Grid-based operations refuse t below this; the scaling law squeezes the
/// kernel under the lattice resolution there. The resolvent integrates the
/// small-t region analytically per Fourier mode instead.
pub const T_MIN: f64 = 0.05;

#[derive(Debug, Clone, Serialize)]
pub struct TruncationReport {
    /// Estimated mass carried by frequencies outside the dual lattice,
    /// from the fitted decay bound Re psi >= c |u|^alpha.
    pub frequency_tail: f64,
    /// Estimated probability mass outside the spatial box (leading Levy
    /// tail of the law); the lattice sum still equals one because the
    /// discrete inversion folds tails back in (periodization).
    pub spatial_tail_mass: f64,
    /// Largest imaginary residue of the complex inversion, relative to peak.
    pub imag_residue_rel: f64,
    pub fitted_decay_constant: f64,
}

pub struct KernelGrid {
    pub law: StableLaw,
    pub lattice: Lattice2,
    /// Density of S_1 on the lattice, row-major.
    pub p1: Vec<f64>,
    /// Gradient of p1 (two components).
    pub grad_p1: [Vec<f64>; 2],
    pub truncation: TruncationReport,
    pub(crate) ops: SpectralOps,
}

#[derive(Debug, Clone, Copy)]
pub enum KernelField {
    P1,
    GradP1,
}

#[derive(Debug, Clone, Copy)]
pub enum GeneratorVariant {
    /// A p_t(x): symbol -psi(-u) e^{-t psi(u)}.
    OnKernel,
    /// A_x p_t(y - x) as a function of z = y - x: symbol -psi(u) e^{-t psi(u)}.
    OnShiftedArgument,
}

impl KernelGrid {
    pub fn build(law: &StableLaw, extent: f64, points: usize) -> Result<Self> {
        if law.dim() != 2 {
            return Err(Error::invalid("kernel grids are two-dimensional"));
        }
        if !law.is_nondegenerate() {
            return Err(Error::Degenerate {
                rank: law.direction_rank(),
                dim: law.dim(),
            });
        }
        if points < 64 || !points.is_power_of_two() {
            return Err(Error::invalid(format!(
                "points must be a power of two >= 64, got {points}"
            )));
        }
        let lattice = Lattice2::new(points, extent);
        let ops = SpectralOps::new(lattice);
        let psi = ops.symbol_grid(|u1, u2| law.psi2(u1, u2));

        let sym_p: Vec<Complex64> = psi.iter().map(|p| (-p).exp()).collect();
        let (p1, imag) = ops.synthesize(&sym_p);
        // grad p_1(x) has inversion-integrand -i u e^{-t psi(u)}
        let mk_grad = |axis: usize| -> Vec<f64> {
            let sym: Vec<Complex64> = sym_p
                .iter()
                .enumerate()
                .map(|(idx, s)| {
                    let u = if axis == 0 {
                        lattice.freq(idx / points)
                    } else {
                        lattice.freq(idx % points)
                    };
                    Complex64::new(0.0, -u) * s
                })
                .collect();
            ops.synthesize(&sym).0
        };
        let grad_p1 = [mk_grad(0), mk_grad(1)];

        let peak = p1.iter().cloned().fold(f64::MIN, f64::max);
        let c = law.fitted_decay_constant(4096);
        // mass beyond the dual box, radially bounded via e^{-c r^alpha}
        let u_max = lattice.u_max();
        let ft = quad::adaptive(
            &|r: f64| (-c * r.powf(law.alpha)).exp() * r,
            u_max,
            u_max * 16.0,
            1e-16,
            200_000,
        );
        let frequency_tail = ft.value * 2.0 * std::f64::consts::PI
            / (2.0 * std::f64::consts::PI).powi(2);
        // leading Levy bound on spatial tail mass: nu(|z| > L) = sum w L^-a / a
        let spatial_tail_mass = law.total_weight() * extent.powf(-law.alpha) / law.alpha;
        let truncation = TruncationReport {
            frequency_tail,
            spatial_tail_mass,
            imag_residue_rel: imag / peak,
            fitted_decay_constant: c,
        };
        if frequency_tail > 1e-3 * peak {
            return Err(Error::Budget(format!(
                "frequency truncation error {frequency_tail:e} exceeds 1e-3 of peak {peak:e}; \
                 increase points or reduce extent"
            )));
        }
        if truncation.imag_residue_rel > 1e-8 {
            return Err(Error::Budget(format!(
                "imaginary residue {:e} of the inversion exceeds 1e-8 of peak",
                truncation.imag_residue_rel
            )));
        }
        Ok(KernelGrid {
            law: law.clone(),
            lattice,
            p1,
            grad_p1,
            truncation,
            ops,
        })
    }

    pub fn peak(&self) -> f64 {
        self.p1.iter().cloned().fold(f64::MIN, f64::max)
    }

    /// Lattice mass: cell-volume-weighted sum of p1.
    pub fn mass(&self) -> f64 {
        self.p1.iter().sum::<f64>() * self.lattice.cell_volume()
    }

    /// The argument the scaling law feeds to p1: t^{-1/alpha} x +
    /// (1 - t^{1-1/alpha}) gamma.
    pub fn scaling_argument(&self, t: f64, x: [f64; 2]) -> [f64; 2] {
        let a = self.law.alpha;
        let sc = t.powf(-1.0 / a);
        let sh = 1.0 - t.powf(1.0 - 1.0 / a);
        [
            sc * x[0] + sh * self.law.center[0],
            sc * x[1] + sh * self.law.center[1],
        ]
    }

    /// p_t(x) via the exact scaling law and bicubic interpolation on the p1
    /// lattice; clamps to 0 outside the footprint (documented tail bias,
    /// bounded by `truncation.spatial_tail_mass`).
    pub fn density_at(&self, t: f64, x: [f64; 2]) -> Result<f64> {
        if t < T_MIN {
            return Err(Error::invalid(format!(
                "density_at requires t >= {T_MIN}; the resolvent handles smaller t analytically"
            )));
        }
        let a = self.law.alpha;
        let arg = self.scaling_argument(t, x);
        let v = interp_bicubic(&self.p1, &self.lattice, arg[0], arg[1]).unwrap_or(0.0);
        Ok(t.powf(-2.0 / a) * v)
    }

    /// True where `density_at(t, x)` is an interpolated value rather than
    /// the tail clamp.
    pub fn in_footprint(&self, t: f64, x: [f64; 2]) -> bool {
        let arg = self.scaling_argument(t, x);
        let h = self.lattice.h();
        let lo = -self.lattice.extent + h;
        let hi = self.lattice.extent - 2.0 * h;
        arg[0] >= lo && arg[0] <= hi && arg[1] >= lo && arg[1] <= hi
    }

    /// Direct inversion of e^{-t psi} on a fresh lattice (`extent`, same
    /// point count). Oracle for the scaling law.
    pub fn invert_at_time(&self, t: f64, extent: f64) -> Result<(Lattice2, Vec<f64>)> {
        if t <= 0.0 {
            return Err(Error::invalid("t must be positive"));
        }
        let lattice = Lattice2::new(self.lattice.n, extent);
        let ops = SpectralOps::new(lattice);
        let sym = ops.symbol_grid(|u1, u2| (-t * self.law.psi2(u1, u2)).exp());
        let (f, _) = ops.synthesize(&sym);
        Ok((lattice, f))
    }

    /// A p_t (or the shifted-argument variant) on the lattice.
    pub fn generator_applied(&self, t: f64, variant: GeneratorVariant) -> Result<Vec<f64>> {
        if t <= 0.0 {
            return Err(Error::invalid("t must be positive"));
        }
        let law = &self.law;
        let sym = self.ops.symbol_grid(|u1, u2| {
            let e = (-t * law.psi2(u1, u2)).exp();
            match variant {
                GeneratorVariant::OnKernel => -law.psi2(-u1, -u2) * e,
                GeneratorVariant::OnShiftedArgument => -law.psi2(u1, u2) * e,
            }
        });
        Ok(self.ops.synthesize(&sym).0)
    }

    /// Cell-weighted lattice l^{p*} norm of p1 or |grad p1| with a
    /// power-law tail-correction estimate.
    pub fn lp_norm(&self, which: KernelField, p_star: f64) -> Result<LpNormReport> {
        if p_star < 1.0 {
            return Err(Error::invalid("p_star must be >= 1"));
        }
        let vol = self.lattice.cell_volume();
        let n = self.lattice.n;
        let mag: Box<dyn Fn(usize) -> f64> = match which {
            KernelField::P1 => Box::new(|k| self.p1[k].abs()),
            KernelField::GradP1 => {
                Box::new(|k| (self.grad_p1[0][k].powi(2) + self.grad_p1[1][k].powi(2)).sqrt())
            }
        };
        let mut sum = 0.0;
        let mut edge_max = 0.0f64;
        for k in 0..self.lattice.len() {
            let v = mag(k);
            sum += v.powf(p_star);
            let (i, j) = (k / n, k % n);
            if i == 0 || j == 0 || i == n - 1 || j == n - 1 {
                edge_max = edge_max.max(v);
            }
        }
        sum *= vol;
        // tail model |field| ~ K r^{-q}: q = d + alpha for p1, d + alpha + 1
        // for the gradient; fit K from the largest edge value.
        let l = self.lattice.extent;
        let q = match which {
            KernelField::P1 => 2.0 + self.law.alpha,
            KernelField::GradP1 => 3.0 + self.law.alpha,
        };
        let k_fit = edge_max * l.powf(q);
        let expo = q * p_star - 2.0; // int_L^inf r^{1 - q p*} dr exists iff expo > 0
        let tail = if expo > 0.0 {
            2.0 * std::f64::consts::PI * k_fit.powf(p_star) * l.powf(-expo) / expo
        } else {
            f64::INFINITY
        };
        let norm = sum.powf(1.0 / p_star);
        let corrected = (sum + tail).powf(1.0 / p_star);
        Ok(LpNormReport {
            norm,
            tail_correction: corrected - norm,
            tail_warning: corrected - norm > 0.01 * norm,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LpNormReport {
    pub norm: f64,
    pub tail_correction: f64,
    pub tail_warning: bool,
}

/// Binary export: magic, d, N, L, alpha header then row-major f64 LE data.
pub fn write_kernel_binary<W: std::io::Write>(w: &mut W, grid: &KernelGrid) -> Result<()> {
    w.write_all(b"SKG1")?;
    w.write_all(&(2u32).to_le_bytes())?;
    w.write_all(&(grid.lattice.n as u32).to_le_bytes())?;
    w.write_all(&grid.lattice.extent.to_le_bytes())?;
    w.write_all(&grid.law.alpha.to_le_bytes())?;
    for v in &grid.p1 {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_kernel_csv<W: std::io::Write>(w: &mut W, grid: &KernelGrid) -> Result<()> {
    writeln!(w, "x1,x2,p1")?;
    let n = grid.lattice.n;
    for i in 0..n {
        for j in 0..n {
            writeln!(
                w,
                "{:.17e},{:.17e},{:.17e}",
                grid.lattice.x(i),
                grid.lattice.x(j),
                grid.p1[i * n + j]
            )?;
        }
    }
    Ok(())
}
