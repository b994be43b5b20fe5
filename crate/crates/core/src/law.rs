//! Non-degenerate alpha-stable laws with atomic spectral measure: the
//! characteristic exponent, the compensated radial Levy integral that backs
//! it, and validation diagnostics.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;
use crate::special::{cos_minus_one, gamma_neg_alpha, neg_i_s_pow, sin_minus_x};

/// One atom of the spectral measure: mass `weight` at `direction` on the
/// unit sphere.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralAtom {
    pub weight: f64,
    pub direction: Vec<f64>,
}

impl SpectralAtom {
    pub fn new(weight: f64, direction: Vec<f64>) -> Result<Self> {
        if !(weight > 0.0) || !weight.is_finite() {
            return Err(Error::InvalidLaw(format!("atom weight must be positive, got {weight}")));
        }
        let norm: f64 = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidLaw(format!(
                "atom direction must be a unit vector (|dir| = {norm})"
            )));
        }
        Ok(SpectralAtom { weight, direction })
    }
}

/// Alpha-stable law (1 < alpha < 2, d >= 2) determined by index, center and
/// finitely many spectral atoms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StableLaw {
    pub alpha: f64,
    pub center: Vec<f64>,
    pub atoms: Vec<SpectralAtom>,
    dim: usize,
    gamma_neg_alpha: f64,
}

impl StableLaw {
    pub fn new(alpha: f64, center: Vec<f64>, atoms: Vec<SpectralAtom>) -> Result<Self> {
        if !(alpha > 1.0 && alpha < 2.0) {
            return Err(Error::InvalidLaw(format!("alpha must lie in (1,2), got {alpha}")));
        }
        let dim = center.len();
        if dim < 2 {
            return Err(Error::InvalidLaw(format!("dimension must be >= 2, got {dim}")));
        }
        if atoms.is_empty() {
            return Err(Error::InvalidLaw("spectral measure needs at least one atom".into()));
        }
        for a in &atoms {
            if a.direction.len() != dim {
                return Err(Error::InvalidLaw("atom direction dimension mismatch".into()));
            }
            // re-run the atom invariants in case the struct was deserialized
            SpectralAtom::new(a.weight, a.direction.clone())?;
        }
        Ok(StableLaw {
            gamma_neg_alpha: gamma_neg_alpha(alpha),
            alpha,
            center,
            atoms,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Characteristic exponent psi(u), from the closed form of the
    /// compensated radial integral: psi(u) = -sum_j w_j Gamma(-alpha)
    /// (-i u.xi_j)^alpha - i u.gamma.
    pub fn psi(&self, u: &[f64]) -> Complex64 {
        assert_eq!(u.len(), self.dim);
        if u.iter().any(|x| !x.is_finite()) {
            panic!("characteristic exponent got non-finite argument");
        }
        let mut s = Complex64::new(0.0, 0.0);
        for a in &self.atoms {
            let proj: f64 = a.direction.iter().zip(u).map(|(d, v)| d * v).sum();
            s += a.weight * self.gamma_neg_alpha * neg_i_s_pow(proj, self.alpha);
        }
        let ug: f64 = self.center.iter().zip(u).map(|(g, v)| g * v).sum();
        -s - Complex64::new(0.0, ug)
    }

    /// d = 2 fast path used by grid and sampling code.
    pub fn psi2(&self, u1: f64, u2: f64) -> Complex64 {
        debug_assert_eq!(self.dim, 2);
        let mut s = Complex64::new(0.0, 0.0);
        for a in &self.atoms {
            let proj = a.direction[0] * u1 + a.direction[1] * u2;
            s += a.weight * self.gamma_neg_alpha * neg_i_s_pow(proj, self.alpha);
        }
        let ug = self.center[0] * u1 + self.center[1] * u2;
        -s - Complex64::new(0.0, ug)
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// Rank of the span of atom directions (Gaussian elimination on the
    /// direction matrix, tolerance 1e-9).
    pub fn direction_rank(&self) -> usize {
        let mut rows: Vec<Vec<f64>> = self.atoms.iter().map(|a| a.direction.clone()).collect();
        let mut rank = 0;
        for col in 0..self.dim {
            let piv = (rank..rows.len())
                .max_by(|&i, &j| rows[i][col].abs().partial_cmp(&rows[j][col].abs()).unwrap());
            let Some(piv) = piv else { break };
            if rows[piv][col].abs() < 1e-9 {
                continue;
            }
            rows.swap(rank, piv);
            let p = rows[rank][col];
            for i in 0..rows.len() {
                if i != rank {
                    let f = rows[i][col] / p;
                    for c in 0..self.dim {
                        rows[i][c] -= f * rows[rank][c];
                    }
                }
            }
            rank += 1;
            if rank == self.dim {
                break;
            }
        }
        rank
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.direction_rank() == self.dim
    }

    /// Fitted decay constant: c = min over sampled unit directions of
    /// Re psi(theta) (Re psi is exactly alpha-homogeneous, so sampling the
    /// sphere suffices). A lower bound certificate for sampled directions
    /// only, not a proof.
    pub fn fitted_decay_constant(&self, samples: usize) -> f64 {
        let mut c = f64::INFINITY;
        if self.dim == 2 {
            // k = 0 puts the axis directions in the sweep
            for k in 0..samples {
                let th = std::f64::consts::PI * k as f64 / samples as f64;
                let re = self.psi2(th.cos(), th.sin()).re;
                if re < c {
                    c = re;
                }
            }
        } else {
            // quasi-random directions for d > 2
            let mut state = 0x9e3779b97f4a7c15u64;
            let mut next = move || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64
            };
            for _ in 0..samples {
                let v: Vec<f64> = (0..self.dim)
                    .map(|_| {
                        // Box-Muller from two uniforms
                        let u1: f64 = next().max(1e-12);
                        let u2: f64 = next();
                        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
                    })
                    .collect();
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if n == 0.0 {
                    continue;
                }
                let dir: Vec<f64> = v.iter().map(|x| x / n).collect();
                let re = self.psi(&dir).re;
                if re < c {
                    c = re;
                }
            }
        }
        c
    }

    pub fn validate(&self, sphere_samples: usize) -> ValidationReport {
        let rank = self.direction_rank();
        let nondegenerate = rank == self.dim;
        let decay_c = if nondegenerate {
            self.fitted_decay_constant(sphere_samples)
        } else {
            0.0
        };
        ValidationReport {
            dim: self.dim,
            alpha: self.alpha,
            alpha_in_range: self.alpha > 1.0 && self.alpha < 2.0,
            atom_count: self.atoms.len(),
            span_rank: rank,
            nondegenerate,
            fitted_decay_constant: decay_c,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub dim: usize,
    pub alpha: f64,
    pub alpha_in_range: bool,
    pub atom_count: usize,
    pub span_rank: usize,
    pub nondegenerate: bool,
    pub fitted_decay_constant: f64,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.nondegenerate && self.alpha_in_range && self.fitted_decay_constant > 0.0
    }
}

/// The compensated radial integral I(s) = int_0^infty (e^{irs} - 1 - irs)
/// r^{-1-alpha} dr by direct quadrature. Independent oracle for the closed
/// form Gamma(-alpha)(-is)^alpha used by `StableLaw::psi`.
///
/// Strategy: stable evaluation of the compensated integrand on [0, R]
/// (dyadic adaptive panels), exact tails for the compensator terms, and an
/// integration-by-parts asymptotic expansion for the oscillatory tail.
pub fn levy_radial_integral(alpha: f64, s: f64, tol_rel: f64) -> Result<(Complex64, f64)> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(Error::invalid(format!("alpha must be in (1,2), got {alpha}")));
    }
    if !s.is_finite() {
        return Err(Error::invalid("s must be finite"));
    }
    if s == 0.0 {
        return Ok((Complex64::new(0.0, 0.0), 0.0));
    }
    let scale = s.abs().powf(alpha) * gamma_neg_alpha(alpha); // magnitude of the answer
    let tol_abs = tol_rel * scale;

    // truncation radius: keep (alpha+1)/(|s| R) <= 0.05 so the IBP series
    // converges fast, and at least past the compensated core.
    let r_max = (20.0 * (alpha + 1.0) / s.abs()).max(8.0);

    // cap panels at ~4 oscillation periods so the GK error estimate never
    // aliases cycle bundles
    let width_cap = 8.0 * std::f64::consts::PI / s.abs();
    let re = quad::adaptive_dyadic_capped(
        &|r: f64| {
            if r == 0.0 {
                return 0.0;
            }
            cos_minus_one(r * s) * r.powf(-1.0 - alpha)
        },
        0.0,
        r_max,
        0.25 * tol_abs,
        4_000_000,
        width_cap,
    );
    let im = quad::adaptive_dyadic_capped(
        &|r: f64| {
            if r == 0.0 {
                return 0.0;
            }
            sin_minus_x(r * s) * r.powf(-1.0 - alpha)
        },
        0.0,
        r_max,
        0.25 * tol_abs,
        4_000_000,
        width_cap,
    );

    // exact compensator tails over [R, inf):
    //   int (-1) r^{-1-a} = -R^{-a}/a ; int (-i r s) r^{-1-a} = -i s R^{1-a}/(a-1)
    let comp = Complex64::new(
        -r_max.powf(-alpha) / alpha,
        -s * r_max.powf(1.0 - alpha) / (alpha - 1.0),
    );

    // oscillatory tail J = int_R^inf e^{irs} r^{-1-alpha} dr by repeated IBP:
    // J_k = -e^{iRs} R^{-k-alpha}/(is) + ((k+alpha)/(is)) J_{k+1}
    let isv = Complex64::new(0.0, s);
    let eirs = Complex64::from_polar(1.0, r_max * s);
    let mut tail = Complex64::new(0.0, 0.0);
    let mut coef = Complex64::new(1.0, 0.0);
    let mut k = 0.0;
    let mut rem_bound;
    loop {
        tail += coef * (-eirs) * r_max.powf(-1.0 - alpha - k) / isv;
        coef *= (1.0 + alpha + k) / isv;
        k += 1.0;
        rem_bound = coef.norm() * r_max.powf(-alpha - k) / alpha.max(1.0);
        if rem_bound < 0.05 * tol_abs || k > 8.0 {
            break;
        }
    }

    let value = Complex64::new(re.value, im.value) + comp + tail;
    let err_est = re.error + im.error + rem_bound;
    if err_est > tol_abs.max(1e-300) * 4.0 {
        return Err(Error::QuadratureFailure {
            est: err_est / scale,
            tol: tol_rel,
        });
    }
    Ok((value, err_est))
}
