//! Order statistics and two-sample distances used by the empirical
//! uniqueness probe, plus deterministic reductions for ensemble averages.

/// Pairwise (tree) summation: deterministic and more accurate than a left
/// fold, independent of thread count because it runs on an ordered slice.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    let var =
        xs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Two-sample Kolmogorov-Smirnov statistic sup |F_x - F_y|.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> f64 {
    let mut xs = xs.to_vec();
    let mut ys = ys.to_vec();
    xs.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    ys.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let (n, m) = (xs.len(), ys.len());
    let mut i = 0;
    let mut j = 0;
    let mut d = 0.0f64;
    while i < n && j < m {
        let (xv, yv) = (xs[i], ys[j]);
        if xv <= yv {
            i += 1;
        }
        if yv <= xv {
            j += 1;
        }
        let diff = (i as f64 / n as f64 - j as f64 / m as f64).abs();
        if diff > d {
            d = diff;
        }
    }
    d
}

/// Asymptotic two-sample KS critical value at significance `alpha_level`
/// (0.05 gives the familiar c = 1.358).
pub fn ks_critical(n: usize, m: usize, alpha_level: f64) -> f64 {
    let c = (-0.5 * (alpha_level / 2.0).ln()).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Energy distance between two samples in R^2:
/// 2 E|X-Y| - E|X-X'| - E|Y-Y'|. Subsamples both inputs to at most
/// `cap` points (strided, deterministic) to bound the quadratic cost.
pub fn energy_distance(a: &[[f64; 2]], b: &[[f64; 2]], cap: usize) -> f64 {
    let sub = |v: &[[f64; 2]]| -> Vec<[f64; 2]> {
        if v.len() <= cap {
            v.to_vec()
        } else {
            let stride = v.len() as f64 / cap as f64;
            (0..cap).map(|k| v[(k as f64 * stride) as usize]).collect()
        }
    };
    let a = sub(a);
    let b = sub(b);
    let d = |p: &[f64; 2], q: &[f64; 2]| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
    let mut ab = 0.0;
    for p in &a {
        for q in &b {
            ab += d(p, q);
        }
    }
    ab /= (a.len() * b.len()) as f64;
    let mut aa = 0.0;
    for i in 0..a.len() {
        for j in (i + 1)..a.len() {
            aa += d(&a[i], &a[j]);
        }
    }
    aa *= 2.0 / (a.len() as f64 * a.len() as f64);
    let mut bb = 0.0;
    for i in 0..b.len() {
        for j in (i + 1)..b.len() {
            bb += d(&b[i], &b[j]);
        }
    }
    bb *= 2.0 / (b.len() as f64 * b.len() as f64);
    2.0 * ab - aa - bb
}
