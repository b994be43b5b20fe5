//! Small special-function kit: log-gamma, gamma on the ranges this crate
//! needs, and the exponential-integrator weights used by the resolvent.

use num_complex::Complex64;

/// Lanczos approximation (g = 7, 9 terms), |error| < 1e-13 for x > 0.
const LANCZOS: [f64; 9] = [
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
];

pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "ln_gamma requires x > 0, got {x}");
    if x < 0.5 {
        // reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
        return (std::f64::consts::PI / (std::f64::consts::PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + 7.5;
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

pub fn gamma(x: f64) -> f64 {
    assert!(x > 0.0, "gamma requires x > 0, got {x}");
    ln_gamma(x).exp()
}

/// Gamma(-alpha) for alpha in (1,2), via Gamma(x) = Gamma(x+2)/(x(x+1)).
/// Positive on that range.
pub fn gamma_neg_alpha(alpha: f64) -> f64 {
    assert!(alpha > 1.0 && alpha < 2.0);
    gamma(2.0 - alpha) / (alpha * (alpha - 1.0))
}

/// Principal branch of (-i s)^alpha = |s|^alpha exp(-i sign(s) alpha pi/2).
pub fn neg_i_s_pow(s: f64, alpha: f64) -> Complex64 {
    if s == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let arg = -s.signum() * alpha * std::f64::consts::FRAC_PI_2;
    Complex64::from_polar(s.abs().powf(alpha), arg)
}

/// Weights for exact integration of e^{-z t} against a linear interpolant
/// on one step: int_0^1 e^{-tau*th}(1-th) dth and int_0^1 e^{-tau*th} th dth.
///
/// `expm_ab(tau) = (A, B)` with
///   A = (e^{-tau} - 1 + tau)/tau^2,  B = (1 - (1+tau) e^{-tau})/tau^2.
/// Series used below |tau| = 0.5 to avoid cancellation.
pub fn expm_ab(tau: Complex64) -> (Complex64, Complex64) {
    if tau.norm() < 0.5 {
        let mut a = Complex64::new(0.0, 0.0);
        let mut b = Complex64::new(0.0, 0.0);
        let mut pow = Complex64::new(1.0, 0.0);
        let mut fact = 2.0; // (k+2)! running
        for k in 0..24 {
            a += pow / fact;
            b += pow * (k as f64 + 1.0) / fact;
            pow *= -tau;
            fact *= k as f64 + 3.0;
        }
        (a, b)
    } else {
        let e = (-tau).exp();
        let t2 = tau * tau;
        ((e - 1.0 + tau) / t2, (1.0 - (1.0 + tau) * e) / t2)
    }
}

/// int_0^1 e^{-tau th} dth = (1 - e^{-tau})/tau, series for small |tau|.
pub fn expm_c(tau: Complex64) -> Complex64 {
    if tau.norm() < 0.5 {
        let mut c = Complex64::new(0.0, 0.0);
        let mut pow = Complex64::new(1.0, 0.0);
        let mut fact = 1.0;
        for k in 0..24 {
            c += pow / fact;
            pow *= -tau;
            fact *= k as f64 + 2.0;
        }
        c
    } else {
        (1.0 - (-tau).exp()) / tau
    }
}

/// Stable cos(x) - 1 = -2 sin^2(x/2).
pub fn cos_minus_one(x: f64) -> f64 {
    let s = (0.5 * x).sin();
    -2.0 * s * s
}

/// Stable sin(x) - x (series below 0.25).
pub fn sin_minus_x(x: f64) -> f64 {
    if x.abs() < 0.25 {
        let x2 = x * x;
        // -x^3/6 (1 - x^2/20 (1 - x^2/42 (1 - x^2/72)))
        -x * x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0)))
    } else {
        x.sin() - x
    }
}
