//! The nonlocal operator A and the drifted generator L_t = A + b.grad
//! applied to C_b^2 test functions by compensated radial quadrature, plus
//! the martingale-problem residual machinery.

use crate::error::{Error, Result};
use crate::field::SpaceTimeField;
use crate::grid::{catmull_rom, catmull_rom_d, catmull_rom_dd, Lattice2};
use crate::law::StableLaw;
use crate::quad;

type Scalar2 = Box<dyn Fn([f64; 2]) -> f64 + Sync + Send>;
type Vector2 = Box<dyn Fn([f64; 2]) -> [f64; 2] + Sync + Send>;
type Matrix2 = Box<dyn Fn([f64; 2]) -> [[f64; 2]; 2] + Sync + Send>;

/// A C_b^2 test function with analytic gradient and Hessian plus sup-norm
/// metadata. `generator_hint` carries a closed form for A f when one is
/// known; path accumulation uses it after it has been cross-checked against
/// the quadrature (see `MartingaleCheck`).
pub struct TestFunction {
    pub eval: Scalar2,
    pub grad: Vector2,
    pub hess: Matrix2,
    pub sup_f: f64,
    pub sup_grad: f64,
    pub sup_hess: f64,
    pub generator_hint: Option<Scalar2>,
    /// Radius beyond which the function is identically zero, when known
    /// (lattice-backed functions). Lets the quadrature stop exactly.
    pub support_radius: Option<f64>,
}

impl TestFunction {
    pub fn constant(c: f64) -> Self {
        TestFunction {
            eval: Box::new(move |_| c),
            grad: Box::new(|_| [0.0, 0.0]),
            hess: Box::new(|_| [[0.0; 2]; 2]),
            sup_f: c.abs(),
            sup_grad: 0.0,
            sup_hess: 0.0,
            generator_hint: Some(Box::new(|_| 0.0)),
            support_radius: None,
        }
    }

    /// f(x) = a . x. Not bounded; used for the center-property checks where
    /// the compensated integrand vanishes identically.
    pub fn linear(a: [f64; 2], law: &StableLaw) -> Self {
        let ag = a[0] * law.center[0] + a[1] * law.center[1];
        TestFunction {
            eval: Box::new(move |x| a[0] * x[0] + a[1] * x[1]),
            grad: Box::new(move |_| a),
            hess: Box::new(|_| [[0.0; 2]; 2]),
            sup_f: f64::INFINITY,
            sup_grad: (a[0] * a[0] + a[1] * a[1]).sqrt(),
            sup_hess: 0.0,
            generator_hint: Some(Box::new(move |_| ag)),
            support_radius: None,
        }
    }

    /// f(x) = cos(u . x + phase). A e^{i u.x} = -psi(u) e^{i u.x}, so
    /// A f = -Re psi(u) cos(u.x + phase) + Im psi(u) sin(u.x + phase).
    pub fn cos_wave(u: [f64; 2], phase: f64, law: &StableLaw) -> Self {
        let psi = law.psi(&u);
        let (a, b) = (psi.re, psi.im);
        TestFunction {
            eval: Box::new(move |x| (u[0] * x[0] + u[1] * x[1] + phase).cos()),
            grad: Box::new(move |x| {
                let s = (u[0] * x[0] + u[1] * x[1] + phase).sin();
                [-u[0] * s, -u[1] * s]
            }),
            hess: Box::new(move |x| {
                let c = (u[0] * x[0] + u[1] * x[1] + phase).cos();
                [
                    [-u[0] * u[0] * c, -u[0] * u[1] * c],
                    [-u[0] * u[1] * c, -u[1] * u[1] * c],
                ]
            }),
            sup_f: 1.0,
            sup_grad: (u[0] * u[0] + u[1] * u[1]).sqrt(),
            sup_hess: u[0] * u[0] + u[1] * u[1],
            generator_hint: Some(Box::new(move |x| {
                let th = u[0] * x[0] + u[1] * x[1] + phase;
                -a * th.cos() + b * th.sin()
            })),
            support_radius: None,
        }
    }

    /// Catmull-Rom interpolant of one slice of a lattice field, zero
    /// outside; C^1 with piecewise-quadratic derivatives.
    pub fn from_slice(field: &SpaceTimeField, k: usize, comp: usize) -> Self {
        let lat = field.lattice;
        let data: std::sync::Arc<Vec<f64>> =
            std::sync::Arc::new(field.slice(k, comp).to_vec());
        let sup_f = data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let h = lat.h();
        // crude finite-difference bounds for the metadata
        let n = lat.n;
        let mut sup_grad = 0.0f64;
        let mut sup_hess = 0.0f64;
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                let c = data[i * n + j];
                let gx = (data[(i + 1) * n + j] - data[(i - 1) * n + j]) / (2.0 * h);
                let gy = (data[i * n + j + 1] - data[i * n + j - 1]) / (2.0 * h);
                sup_grad = sup_grad.max((gx * gx + gy * gy).sqrt());
                let hxx = (data[(i + 1) * n + j] - 2.0 * c + data[(i - 1) * n + j]) / (h * h);
                let hyy = (data[i * n + j + 1] - 2.0 * c + data[i * n + j - 1]) / (h * h);
                sup_hess = sup_hess.max(hxx.abs() + hyy.abs());
            }
        }
        let d0 = data.clone();
        let d1 = data.clone();
        let d2 = data;
        let support_radius = lat.extent * std::f64::consts::SQRT_2 + 2.0 * h;
        TestFunction {
            eval: Box::new(move |x| bicubic_eval(&d0, &lat, x, Deriv::Value)),
            grad: Box::new(move |x| {
                [
                    bicubic_eval(&d1, &lat, x, Deriv::Dx),
                    bicubic_eval(&d1, &lat, x, Deriv::Dy),
                ]
            }),
            hess: Box::new(move |x| {
                let hxx = bicubic_eval(&d2, &lat, x, Deriv::Dxx);
                let hyy = bicubic_eval(&d2, &lat, x, Deriv::Dyy);
                let hxy = bicubic_eval(&d2, &lat, x, Deriv::Dxy);
                [[hxx, hxy], [hxy, hyy]]
            }),
            sup_f,
            sup_grad,
            sup_hess,
            generator_hint: None,
            support_radius: Some(support_radius),
        }
    }

    /// Check the gradient against central finite differences of the
    /// evaluator at probe points (type invariant).
    pub fn validate_gradient(&self, probes: &[[f64; 2]], tol_rel: f64) -> Result<()> {
        let eps = 1e-5;
        for &x in probes {
            let g = (self.grad)(x);
            for axis in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[axis] += eps;
                xm[axis] -= eps;
                let fd = ((self.eval)(xp) - (self.eval)(xm)) / (2.0 * eps);
                let scale = g[axis].abs().max(self.sup_grad.max(1e-9));
                if (fd - g[axis]).abs() > tol_rel * scale + 1e-7 {
                    return Err(Error::invalid(format!(
                        "gradient mismatch at {x:?} axis {axis}: fd {fd} vs {g:?}"
                    )));
                }
            }
        }
        Ok(())
    }
}

enum Deriv {
    Value,
    Dx,
    Dy,
    Dxx,
    Dyy,
    Dxy,
}

fn bicubic_eval(data: &[f64], lat: &Lattice2, x: [f64; 2], which: Deriv) -> f64 {
    let h = lat.h();
    let fx = (x[0] + lat.extent) / h;
    let fy = (x[1] + lat.extent) / h;
    let i = fx.floor() as isize;
    let j = fy.floor() as isize;
    let n = lat.n as isize;
    if i < 1 || j < 1 || i > n - 3 || j > n - 3 {
        return 0.0;
    }
    let (sx, sy) = (fx - i as f64, fy - j as f64);
    let (wx, cx) = match which {
        Deriv::Dx => (catmull_rom_d(sx), 1.0 / h),
        Deriv::Dxx => (catmull_rom_dd(sx), 1.0 / (h * h)),
        _ => (catmull_rom(sx), 1.0),
    };
    let (wy, cy) = match which {
        Deriv::Dy | Deriv::Dxy => (catmull_rom_d(sy), 1.0 / h),
        Deriv::Dyy => (catmull_rom_dd(sy), 1.0 / (h * h)),
        _ => (catmull_rom(sy), 1.0),
    };
    let (wx, cx) = match which {
        Deriv::Dxy => (catmull_rom_d(sx), 1.0 / h),
        _ => (wx, cx),
    };
    let (iu, ju, n) = (i as usize, j as usize, lat.n);
    let mut acc = 0.0;
    for a in 0..4 {
        let row = &data[(iu + a - 1) * n..];
        let mut r = 0.0;
        for b in 0..4 {
            r += wy[b] * row[ju + b - 1];
        }
        acc += wx[a] * r;
    }
    acc * cx * cy
}

#[derive(Debug, Clone, Copy)]
pub struct GeneratorValue {
    pub value: f64,
    pub quad_error: f64,
    pub converged: bool,
}

/// A f(x) by compensated jump quadrature per spectral atom plus the center
/// term. The radial integral is split at r = 1; near zero the integrand is
/// replaced by its Hessian quadratic (closed form), far out the compensator
/// terms are integrated exactly and the remaining f-term is truncated with
/// a reported bound.
pub fn apply_a(law: &StableLaw, f: &TestFunction, x: [f64; 2], tol_abs: f64) -> Result<GeneratorValue> {
    let alpha = law.alpha;
    let grad_x = (f.grad)(x);
    let hess_x = (f.hess)(x);
    let f_x = (f.eval)(x);
    let center_term = law.center[0] * grad_x[0] + law.center[1] * grad_x[1];
    if f.sup_hess == 0.0 {
        // affine function: the compensated integrand is identically zero
        // (|g(r)| <= r^2 sup_hess / 2 by Taylor), only the center term acts
        return Ok(GeneratorValue {
            value: center_term,
            quad_error: 0.0,
            converged: true,
        });
    }
    if !f.sup_f.is_finite() {
        return Err(Error::invalid(
            "apply_a needs a bounded test function (or an affine one)",
        ));
    }
    let mut total = center_term;
    let mut err = 0.0;
    let mut converged = true;
    let n_atoms = law.atoms.len() as f64;
    for atom in &law.atoms {
        let xi = [atom.direction[0], atom.direction[1]];
        let w = atom.weight;
        let tol_atom = tol_abs / (2.0 * n_atoms * w.max(1e-300));

        let quad_form = xi[0] * (hess_x[0][0] * xi[0] + hess_x[0][1] * xi[1])
            + xi[1] * (hess_x[1][0] * xi[0] + hess_x[1][1] * xi[1]);

        // [0, 1]: exact quadratic part + adaptive remainder beyond r_cut
        let r_cut = 1e-5;
        let mut atom_val = 0.5 * quad_form / (2.0 - alpha);
        let g = |r: f64| {
            let y = [x[0] + r * xi[0], x[1] + r * xi[1]];
            (f.eval)(y) - f_x - r * (xi[0] * grad_x[0] + xi[1] * grad_x[1])
        };
        let inner = quad::adaptive_dyadic(
            &|r: f64| (g(r) - 0.5 * r * r * quad_form) * r.powf(-1.0 - alpha),
            r_cut,
            1.0,
            0.45 * tol_atom,
            600_000,
        );
        atom_val += inner.value;
        err += w * inner.error;
        converged &= inner.converged;

        // (1, R]: integrate f directly; compensators have closed forms.
        // R: support radius when known, else from the sup-norm tail bound.
        let r_max = match f.support_radius {
            Some(rad) => (rad + x[0].abs() + x[1].abs() + 1.0).max(2.0),
            None => {
                let bound = f.sup_f.max(1e-12);
                (bound * alpha.recip() / (0.05 * tol_atom)).powf(1.0 / alpha).max(2.0)
            }
        };
        let outer = quad::adaptive_dyadic(
            &|r: f64| {
                let y = [x[0] + r * xi[0], x[1] + r * xi[1]];
                (f.eval)(y) * r.powf(-1.0 - alpha)
            },
            1.0,
            r_max,
            0.45 * tol_atom,
            600_000,
        );
        // exact: int_1^Rmax (-f(x) - r xi.grad) r^{-1-a} dr, extended to
        // infinity for the compensators (they decay; the f-part beyond Rmax
        // is bounded and reported)
        let comp = -f_x / alpha - (xi[0] * grad_x[0] + xi[1] * grad_x[1]) / (alpha - 1.0);
        atom_val += outer.value + comp;
        err += w * outer.error;
        converged &= outer.converged;
        if f.support_radius.is_none() {
            err += w * f.sup_f * r_max.powf(-alpha) / alpha;
        }
        total += w * atom_val;
    }
    if err > tol_abs * 4.0 {
        converged = false;
    }
    Ok(GeneratorValue {
        value: total,
        quad_error: err,
        converged,
    })
}

/// Check a generator hint against the quadrature at probe points; the hint
/// may then stand in for the quadrature along Monte Carlo paths.
pub fn validate_hint(
    law: &StableLaw,
    f: &TestFunction,
    probes: &[[f64; 2]],
    tol_abs: f64,
) -> Result<()> {
    let Some(hint) = &f.generator_hint else {
        return Err(Error::invalid("test function has no generator hint"));
    };
    for &x in probes {
        let q = apply_a(law, f, x, tol_abs)?;
        let h = hint(x);
        if (q.value - h).abs() > tol_abs + 10.0 * q.quad_error {
            return Err(Error::QuadratureFailure {
                est: (q.value - h).abs(),
                tol: tol_abs,
            });
        }
    }
    Ok(())
}

/// Symbol check: A applied to e^{iu.x} (split into cosine pair) against
/// -psi(u). Returns the max relative error over the probes.
pub fn symbol_relation_error(law: &StableLaw, us: &[[f64; 2]], tol_abs: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &u in us {
        let psi = law.psi(&u);
        let f = TestFunction::cos_wave(u, 0.0, law);
        let fs = TestFunction::cos_wave(u, -std::f64::consts::FRAC_PI_2, law); // sin(u.x)
        for &x in &[[0.0, 0.0], [0.31, -0.77]] {
            let th = u[0] * x[0] + u[1] * x[1];
            // A cos = -Re psi cos + Im psi sin ; A sin = -Re psi sin - Im psi cos
            let want_c = -psi.re * th.cos() + psi.im * th.sin();
            let want_s = -psi.re * th.sin() - psi.im * th.cos();
            let got_c = apply_a(law, &f, x, tol_abs)?.value;
            let got_s = apply_a(law, &fs, x, tol_abs)?.value;
            let scale = psi.norm().max(1e-12);
            worst = worst.max((got_c - want_c).abs() / scale);
            worst = worst.max((got_s - want_s).abs() / scale);
        }
    }
    Ok(worst)
}

/// Everything the Euler loop needs to accumulate the compensator
/// int L_u f(X_u) du between two checkpoints: f itself, its gradient, and a
/// validated evaluator for A f.
pub struct MartingaleCheck<'a> {
    pub law: &'a StableLaw,
    pub f: &'a TestFunction,
    pub t1: f64,
    pub t2: f64,
}

impl<'a> MartingaleCheck<'a> {
    /// A f evaluator for path accumulation: the validated hint when
    /// present, otherwise quadrature at call time (slow; tests keep paths
    /// modest on this route).
    pub fn af(&self, x: [f64; 2]) -> f64 {
        if let Some(h) = &self.f.generator_hint {
            h(x)
        } else {
            apply_a(self.law, self.f, x, 1e-7).map(|v| v.value).unwrap_or(f64::NAN)
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct MartingaleResidual {
    pub mean: f64,
    pub std_error: f64,
    pub z: f64,
    pub paths: usize,
}

/// Reduce per-path martingale increments f(X_{t2}) - f(X_{t1}) -
/// int_{t1}^{t2} L_u f(X_u) du into the ensemble residual.
pub fn martingale_residual(increments: &[f64]) -> MartingaleResidual {
    let n = increments.len();
    let mean = crate::stats::pairwise_sum(increments) / n as f64;
    let var = increments.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / (n as f64 - 1.0).max(1.0);
    let se = (var / n as f64).sqrt();
    MartingaleResidual {
        mean,
        std_error: se,
        z: if se > 0.0 { mean / se } else { 0.0 },
        paths: n,
    }
}

/// Plane-wave consistency used by resolvent verification: spectral A (the
/// Fourier multiplier -psi(u)) against the jump quadrature on an
/// interpolated slice, at probe points.
pub fn cross_check_spectral(
    law: &StableLaw,
    field_slice: &TestFunction,
    spectral: impl Fn([f64; 2]) -> f64,
    probes: &[[f64; 2]],
    tol_abs: f64,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &x in probes {
        let q = apply_a(law, field_slice, x, tol_abs)?;
        worst = worst.max((q.value - spectral(x)).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::SpectralAtom;
    use approx::assert_relative_eq;

    fn law(center: [f64; 2]) -> StableLaw {
        let dirs = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];
        let atoms = dirs
            .iter()
            .map(|d| SpectralAtom::new(1.0, d.to_vec()).unwrap())
            .collect();
        StableLaw::new(1.5, vec![center[0], center[1]], atoms).unwrap()
    }

    #[test]
    fn constant_annihilated() {
        let law = law([0.3, -0.2]);
        let f = TestFunction::constant(5.0);
        let v = apply_a(&law, &f, [1.0, 2.0], 1e-10).unwrap();
        assert!(v.value.abs() < 1e-10);
    }

    #[test]
    fn linear_gives_center_term() {
        let law = law([0.3, -0.2]);
        let a = [2.0, -1.0];
        let f = TestFunction::linear(a, &law);
        let v = apply_a(&law, &f, [0.7, -0.4], 1e-9).unwrap();
        assert_relative_eq!(v.value, a[0] * 0.3 + a[1] * -0.2, epsilon = 1e-9);
    }

    #[test]
    fn cosine_matches_symbol_symmetric() {
        let law0 = law([0.0, 0.0]);
        let u = [1.3, -0.6];
        let f = TestFunction::cos_wave(u, 0.0, &law0);
        let psi = law0.psi(&u);
        assert!(psi.im.abs() < 1e-14);
        for x in [[0.0, 0.0], [0.5, 1.0]] {
            let got = apply_a(&law0, &f, x, 1e-8).unwrap();
            let want = -psi.re * (u[0] * x[0] + u[1] * x[1]).cos();
            assert!(
                (got.value - want).abs() <= 1e-6 * psi.norm().max(1.0),
                "got {} want {want}",
                got.value
            );
        }
    }

    #[test]
    fn symbol_relation_with_drifted_center() {
        let law = law([0.3, -0.2]);
        let worst = symbol_relation_error(
            &law,
            &[[0.5, 0.0], [1.0, 2.0], [-3.0, 1.5], [5.0, -4.0]],
            1e-8,
        )
        .unwrap();
        assert!(worst <= 1e-6, "worst rel err {worst:e}");
    }

    #[test]
    fn linearity() {
        let law = law([0.3, -0.2]);
        let u1 = [1.0, 0.5];
        let u2 = [-0.4, 2.0];
        let f1 = TestFunction::cos_wave(u1, 0.2, &law);
        let f2 = TestFunction::cos_wave(u2, -0.4, &law);
        let combo = TestFunction {
            eval: Box::new({
                let law2 = law.clone();
                move |x| {
                    let f1 = TestFunction::cos_wave(u1, 0.2, &law2);
                    let f2 = TestFunction::cos_wave(u2, -0.4, &law2);
                    2.0 * (f1.eval)(x) - 3.0 * (f2.eval)(x)
                }
            }),
            grad: Box::new({
                let law2 = law.clone();
                move |x| {
                    let f1 = TestFunction::cos_wave(u1, 0.2, &law2);
                    let f2 = TestFunction::cos_wave(u2, -0.4, &law2);
                    let a = (f1.grad)(x);
                    let b = (f2.grad)(x);
                    [2.0 * a[0] - 3.0 * b[0], 2.0 * a[1] - 3.0 * b[1]]
                }
            }),
            hess: Box::new({
                let law2 = law.clone();
                move |x| {
                    let f1 = TestFunction::cos_wave(u1, 0.2, &law2);
                    let f2 = TestFunction::cos_wave(u2, -0.4, &law2);
                    let a = (f1.hess)(x);
                    let b = (f2.hess)(x);
                    let mut out = [[0.0; 2]; 2];
                    for i in 0..2 {
                        for j in 0..2 {
                            out[i][j] = 2.0 * a[i][j] - 3.0 * b[i][j];
                        }
                    }
                    out
                }
            }),
            sup_f: 5.0,
            sup_grad: 10.0,
            sup_hess: 20.0,
            generator_hint: None,
            support_radius: None,
        };
        let x = [0.4, -0.9];
        let va = apply_a(&law, &combo, x, 1e-8).unwrap().value;
        let v1 = apply_a(&law, &f1, x, 1e-8).unwrap().value;
        let v2 = apply_a(&law, &f2, x, 1e-8).unwrap().value;
        assert!((va - (2.0 * v1 - 3.0 * v2)).abs() < 1e-6);
    }

    #[test]
    fn gradient_validation_catches_mismatch() {
        let law = law([0.0, 0.0]);
        let mut f = TestFunction::cos_wave([1.0, 1.0], 0.0, &law);
        f.validate_gradient(&[[0.3, 0.4], [-1.0, 2.0]], 1e-6).unwrap();
        f.grad = Box::new(|_| [42.0, 0.0]);
        assert!(f.validate_gradient(&[[0.3, 0.4]], 1e-6).is_err());
    }

    #[test]
    fn slice_testfunction_behaves() {
        let lat = Lattice2::new(64, 8.0);
        let field = SpaceTimeField::from_fn(lat, 0.1, 2, crate::field::Tail::Zero, |_, x, y| {
            (-0.5 * (x * x + y * y)).exp()
        });
        let tf = TestFunction::from_slice(&field, 0, 0);
        tf.validate_gradient(&[[0.5, -0.3], [1.5, 2.0]], 1e-3).unwrap();
        let v = (tf.eval)([0.5, -0.3]);
        // Catmull-Rom on h = 0.25 resolves the Gaussian to ~1e-4
        assert_relative_eq!(v, (-0.5f64 * (0.25 + 0.09)).exp(), epsilon = 1e-3);
    }
}
