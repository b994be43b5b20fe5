//! Singular drifts b = b1 + b2 with finite time support: the admissibility
//! condition d/p + alpha/q < alpha - 1, mixed L^q-L^p lattice norms, and
//! the mollified sequence b^(n).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{SpaceTimeField, Tail};
use crate::grid::Lattice2;

/// Bounded component. A spatially constant profile mollifies to itself, so
/// it keeps an analytic fast path; anything else lives on the lattice.
#[derive(Clone)]
pub enum BoundedPart {
    Zero,
    /// vector * window(t/T), with window the C^3 sin^4 profile or constant 1.
    Constant { vector: [f64; 2], smooth_in_time: bool },
    Lattice(SpaceTimeField),
}

#[derive(Clone)]
pub struct DriftField {
    pub bounded: BoundedPart,
    /// Declared sup bound M for the bounded part.
    pub sup_bound: f64,
    /// Singular component as time-sliced lattice samples (2 components).
    pub singular: SpaceTimeField,
    pub p: f64,
    pub q: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Admissibility {
    pub lhs: f64,
    pub threshold: f64,
    pub margin: f64,
    pub pass: bool,
}

/// d/p + alpha/q < alpha - 1, strict.
pub fn check_admissible(d: usize, alpha: f64, p: f64, q: f64) -> Admissibility {
    let lhs = d as f64 / p + alpha / q;
    let threshold = alpha - 1.0;
    Admissibility {
        lhs,
        threshold,
        margin: threshold - lhs,
        pass: lhs < threshold,
    }
}

fn time_weights(slices: usize, dt: f64) -> Vec<f64> {
    // composite trapezoid over [0, (slices-1) dt]
    let mut w = vec![dt; slices];
    w[0] = 0.5 * dt;
    w[slices - 1] = 0.5 * dt;
    w
}

/// Mixed norm (int_0^T (int |f|^p dx)^{q/p} dt)^{1/q} by composite
/// quadrature: cell-weighted spatial l^p per slice, trapezoid in time.
/// Vector fields use the pointwise euclidean magnitude.
pub fn mixed_norm(field: &SpaceTimeField, p: f64, q: f64) -> Result<MixedNormReport> {
    if p < 1.0 || q < 1.0 {
        return Err(Error::invalid(
            "lattice mixed norms are restricted to p, q >= 1 (quasi-norms not supported)",
        ));
    }
    let vol = field.lattice.cell_volume();
    let len = field.lattice.len();
    let mut slice_norms = Vec::with_capacity(field.slices);
    for k in 0..field.slices {
        let mut s = 0.0;
        for idx in 0..len {
            let mut m2 = 0.0;
            for c in 0..field.comps {
                let v = field.slice(k, c)[idx];
                m2 += v * v;
            }
            s += m2.sqrt().powf(p);
        }
        slice_norms.push((s * vol).powf(1.0 / p));
    }
    let w = time_weights(field.slices, field.dt);
    let total = slice_norms
        .iter()
        .zip(&w)
        .map(|(n, w)| n.powf(q) * w)
        .sum::<f64>()
        .powf(1.0 / q);
    // under-resolution heuristic: adjacent slice norms jumping > 50%
    let mut under_resolved = false;
    for win in slice_norms.windows(2) {
        let (a, b) = (win[0], win[1]);
        if a.max(b) > 0.0 && (a - b).abs() > 0.5 * a.max(b) && a.min(b) > 0.0 {
            under_resolved = true;
        }
    }
    Ok(MixedNormReport {
        value: total,
        slice_norms,
        under_resolved,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MixedNormReport {
    pub value: f64,
    pub slice_norms: Vec<f64>,
    pub under_resolved: bool,
}

impl DriftField {
    pub fn validate(&self, alpha: f64) -> Result<Admissibility> {
        let adm = check_admissible(2, alpha, self.p, self.q);
        // support inside [0, T]
        let sing_support = (self.singular.support_slices() as f64 - 1.0).max(0.0) * self.singular.dt;
        if sing_support > self.horizon + 1e-9 {
            return Err(Error::invalid("singular drift support exceeds horizon"));
        }
        if self.singular.tail != Tail::Zero {
            return Err(Error::invalid("drift fields must vanish beyond the horizon"));
        }
        // declared M dominates the sampled sup of b1
        let sampled = match &self.bounded {
            BoundedPart::Zero => 0.0,
            BoundedPart::Constant { vector, .. } => (vector[0].powi(2) + vector[1].powi(2)).sqrt(),
            BoundedPart::Lattice(f) => f.sup_norm(),
        };
        if sampled > self.sup_bound * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "declared sup bound {} below sampled sup {sampled}",
                self.sup_bound
            )));
        }
        let norm = mixed_norm(&self.singular, self.p, self.q)?;
        if !norm.value.is_finite() {
            return Err(Error::invalid("singular component has non-finite mixed norm"));
        }
        Ok(adm)
    }

    pub fn singular_mixed_norm(&self) -> Result<f64> {
        Ok(mixed_norm(&self.singular, self.p, self.q)?.value)
    }

    /// Total drift b(t, x) = b1 + b2 evaluated with interpolation.
    pub fn eval(&self, t: f64, x: [f64; 2]) -> [f64; 2] {
        let mut v = self.bounded_eval(t, x);
        let s0 = self.singular.interp(t, x, 0);
        let s1 = self.singular.interp(t, x, 1);
        v[0] += s0;
        v[1] += s1;
        v
    }

    pub fn bounded_eval(&self, t: f64, x: [f64; 2]) -> [f64; 2] {
        match &self.bounded {
            BoundedPart::Zero => [0.0, 0.0],
            BoundedPart::Constant { vector, smooth_in_time } => {
                if t < 0.0 || t > self.horizon {
                    return [0.0, 0.0];
                }
                let w = if *smooth_in_time {
                    crate::field::smooth_window(t / self.horizon)
                } else {
                    1.0
                };
                [vector[0] * w, vector[1] * w]
            }
            BoundedPart::Lattice(f) => [f.interp(t, x, 0), f.interp(t, x, 1)],
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.bounded, BoundedPart::Zero)
            && self.singular.data.iter().all(|&v| v == 0.0)
    }

    /// Truncate at level n and convolve each time slice with the bump
    /// mollifier of radius 1/n.
    pub fn mollify(&self, n: usize) -> Result<MollifiedDrift> {
        if n < 1 {
            return Err(Error::invalid("mollification level must be >= 1"));
        }
        let radius = 1.0 / n as f64;
        let h = self.singular.lattice.h();
        if radius < h {
            return Err(Error::invalid(format!(
                "mollifier radius 1/{n} = {radius} below lattice spacing {h}"
            )));
        }
        let stencil = MollifierStencil::new(radius, h);
        let b2n = mollify_field(&self.singular, n as f64, &stencil);
        let b1n = match &self.bounded {
            BoundedPart::Zero => BoundedPart::Zero,
            BoundedPart::Constant { vector, smooth_in_time } => {
                // |b1| <= M; truncation 1_{|b1|<=n} only bites when n < M,
                // in which case the profile is zeroed where it exceeds n.
                let m = (vector[0].powi(2) + vector[1].powi(2)).sqrt();
                if m <= n as f64 {
                    BoundedPart::Constant {
                        vector: *vector,
                        smooth_in_time: *smooth_in_time,
                    }
                } else {
                    BoundedPart::Zero
                }
            }
            BoundedPart::Lattice(f) => BoundedPart::Lattice(mollify_field(f, n as f64, &stencil)),
        };
        // Lipschitz estimate: ||grad phi_n||_1-scaled, grad phi_n ~ n grad phi_1
        let lipschitz = stencil.grad_l1 * self.sup_bound.max(sup_vec(&self.singular));
        Ok(MollifiedDrift {
            level: n,
            bounded: b1n,
            sup_bound: self.sup_bound,
            singular: b2n,
            p: self.p,
            q: self.q,
            horizon: self.horizon,
            lipschitz_estimate: lipschitz,
        })
    }
}

fn sup_vec(f: &SpaceTimeField) -> f64 {
    f.sup_norm()
}

/// Discrete bump stencil exp(1/((r/rho)^2 - 1)) on r < rho, weights
/// normalized to sum exactly to one so discrete Young's inequality is exact.
struct MollifierStencil {
    half: isize,
    weights: Vec<f64>,
    grad_l1: f64,
}

impl MollifierStencil {
    fn new(radius: f64, h: f64) -> Self {
        let half = (radius / h).floor() as isize;
        let mut weights = Vec::with_capacity(((2 * half + 1) * (2 * half + 1)) as usize);
        let mut total = 0.0;
        for di in -half..=half {
            for dj in -half..=half {
                let r2 = ((di as f64 * h).powi(2) + (dj as f64 * h).powi(2)) / (radius * radius);
                let w = if r2 < 1.0 { (1.0 / (r2 - 1.0)).exp() } else { 0.0 };
                weights.push(w);
                total += w;
            }
        }
        weights.iter_mut().for_each(|w| *w /= total);
        // l1 norm of the discrete gradient of the stencil, an upper bound
        // scale for the Lipschitz constant of the mollified field
        let nrow = (2 * half + 1) as usize;
        let mut grad_l1 = 0.0;
        for i in 0..nrow {
            for j in 0..nrow {
                let c = weights[i * nrow + j];
                let r = if i + 1 < nrow { weights[(i + 1) * nrow + j] } else { 0.0 };
                let u = if j + 1 < nrow { weights[i * nrow + j + 1] } else { 0.0 };
                grad_l1 += ((r - c).abs() + (u - c).abs()) / h;
            }
        }
        MollifierStencil {
            half,
            weights,
            grad_l1,
        }
    }
}

fn mollify_field(f: &SpaceTimeField, level: f64, st: &MollifierStencil) -> SpaceTimeField {
    let n = f.lattice.n;
    let len = f.lattice.len();
    let mut out = SpaceTimeField::zeros(f.lattice, f.dt, f.slices, f.comps, f.tail);
    // cyclic convolution via FFT; drift support plus mollifier radius must
    // stay inside the lattice so the wrap never touches nonzero data
    let ops = crate::grid::SpectralOps::new(f.lattice);
    let nrow = (2 * st.half + 1) as usize;
    let mut kernel = vec![0.0; len];
    for (widx, &w) in st.weights.iter().enumerate() {
        let di = widx as isize / nrow as isize - st.half;
        let dj = widx as isize % nrow as isize - st.half;
        let ii = di.rem_euclid(n as isize) as usize;
        let jj = dj.rem_euclid(n as isize) as usize;
        kernel[ii * n + jj] = w;
    }
    let kernel_modes = ops.modes(&kernel);
    let mut trunc = vec![0.0; len * f.comps];
    for k in 0..f.slices {
        // truncation by the vector magnitude: 1_{|b| <= n}
        for idx in 0..len {
            let mut m2 = 0.0;
            for c in 0..f.comps {
                let v = f.slice(k, c)[idx];
                m2 += v * v;
            }
            let keep = m2.sqrt() <= level;
            for c in 0..f.comps {
                trunc[c * len + idx] = if keep { f.slice(k, c)[idx] } else { 0.0 };
            }
        }
        for c in 0..f.comps {
            let mut modes = ops.modes(&trunc[c * len..(c + 1) * len]);
            modes.iter_mut().zip(&kernel_modes).for_each(|(a, b)| *a *= b);
            out.slice_mut(k, c).copy_from_slice(&ops.field(&modes));
        }
    }
    out
}

#[derive(Clone)]
pub struct MollifiedDrift {
    pub level: usize,
    pub bounded: BoundedPart,
    pub sup_bound: f64,
    pub singular: SpaceTimeField,
    pub p: f64,
    pub q: f64,
    pub horizon: f64,
    pub lipschitz_estimate: f64,
}

impl MollifiedDrift {
    pub fn eval(&self, t: f64, x: [f64; 2]) -> [f64; 2] {
        let mut v = match &self.bounded {
            BoundedPart::Zero => [0.0, 0.0],
            BoundedPart::Constant { vector, smooth_in_time } => {
                if t < 0.0 || t > self.horizon {
                    [0.0, 0.0]
                } else {
                    let w = if *smooth_in_time {
                        crate::field::smooth_window(t / self.horizon)
                    } else {
                        1.0
                    };
                    [vector[0] * w, vector[1] * w]
                }
            }
            BoundedPart::Lattice(f) => [f.interp(t, x, 0), f.interp(t, x, 1)],
        };
        v[0] += self.singular.interp(t, x, 0);
        v[1] += self.singular.interp(t, x, 1);
        v
    }

    /// The three mollification invariants: sup |b1n| <= M,
    /// ||b2n||_{LqLp} <= ||b2||_{LqLp}, sup |b^(n)| <= 2n.
    pub fn check_invariants(&self, original: &DriftField) -> Result<()> {
        let m1 = match &self.bounded {
            BoundedPart::Zero => 0.0,
            BoundedPart::Constant { vector, .. } => (vector[0].powi(2) + vector[1].powi(2)).sqrt(),
            BoundedPart::Lattice(f) => f.sup_norm(),
        };
        if m1 > self.sup_bound * (1.0 + 1e-12) {
            return Err(Error::Budget(format!(
                "mollified bounded part sup {m1} exceeds declared M {}",
                self.sup_bound
            )));
        }
        let n_orig = mixed_norm(&original.singular, self.p, self.q)?.value;
        let n_moll = mixed_norm(&self.singular, self.p, self.q)?.value;
        if n_moll > n_orig * (1.0 + 1e-10) {
            return Err(Error::Budget(format!(
                "mollified mixed norm {n_moll} exceeds original {n_orig}"
            )));
        }
        let sup_total = m1 + self.singular.sup_norm();
        if sup_total > 2.0 * self.level as f64 * (1.0 + 1e-12) {
            return Err(Error::Budget(format!(
                "sup |b^(n)| = {sup_total} exceeds 2n = {}",
                2 * self.level
            )));
        }
        Ok(())
    }
}

/// Built-in drift families for scenario configs.
pub mod families {
    use super::*;

    /// Radial singular field A |x|^{-theta} (x/|x|) 1_{|x| <= cutoff},
    /// optionally modulated by the smooth time window; |x| clamped at half
    /// a cell on ingestion (documented regularization of the lattice
    /// representation).
    #[allow(clippy::too_many_arguments)]
    pub fn radial_singular(
        lattice: Lattice2,
        dt: f64,
        slices: usize,
        amplitude: f64,
        theta: f64,
        cutoff: f64,
        horizon: f64,
        smooth_in_time: bool,
    ) -> SpaceTimeField {
        let mut f = SpaceTimeField::zeros(lattice, dt, slices, 2, Tail::Zero);
        let n = lattice.n;
        let clamp = 0.5 * lattice.h();
        for k in 0..slices {
            let t = k as f64 * dt;
            let w = if smooth_in_time {
                crate::field::smooth_window(t / horizon)
            } else if t <= horizon {
                1.0
            } else {
                0.0
            };
            for i in 0..n {
                for j in 0..n {
                    let (x, y) = (lattice.x(i), lattice.x(j));
                    let r = (x * x + y * y).sqrt();
                    if r > cutoff {
                        continue;
                    }
                    let rc = r.max(clamp);
                    let mag = amplitude * rc.powf(-theta) * w;
                    let (ex, ey) = if r > 0.0 { (x / r, y / r) } else { (1.0, 0.0) };
                    f.slice_mut(k, 0)[i * n + j] = mag * ex;
                    f.slice_mut(k, 1)[i * n + j] = mag * ey;
                }
            }
        }
        f
    }
}
