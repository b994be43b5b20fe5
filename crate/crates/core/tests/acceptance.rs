//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line. Tolerances are pinned here, not configurable. Run with
//! `cargo test --test acceptance -- --nocapture` to see the table.

use std::sync::OnceLock;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stabledrift::drift::{check_admissible, DriftField};
use stabledrift::field::{SpaceTimeField, Tail};
use stabledrift::grid::Lattice2;
use stabledrift::kernel::{GeneratorVariant, KernelGrid};
use stabledrift::law::{levy_radial_integral, StableLaw};
use stabledrift::resolvent::{
    apply_resolvent, apply_resolvent_gradient, verify_resolvent_equation, ResolventConstants,
    ResolventParams,
};
use stabledrift::scenario::Scenario;
use stabledrift::series::{evaluate_series, lambda_threshold, DriftVariant};
use stabledrift::sim::{
    mc_laplace_vs_series, same_law_control, sampler_ecf_error, uniqueness_probe, LevelCoupling,
    SimDrift,
};
use stabledrift::special::{gamma_neg_alpha, neg_i_s_pow};

struct Fixture {
    scenario: Scenario,
    law: StableLaw,
    kernel: KernelGrid,
    consts: ResolventConstants,
    drift: DriftField,
    lambda0: f64,
}

static FIXTURE: OnceLock<Fixture> = OnceLock::new();

fn fixture() -> &'static Fixture {
    FIXTURE.get_or_init(|| {
        let text = include_str!("../../../scenarios/reference.toml");
        let scenario = Scenario::from_toml(text).expect("reference scenario");
        let law = scenario.build_law().expect("law");
        let kernel = scenario.build_kernel(&law).expect("kernel grid");
        let consts =
            ResolventConstants::from_grid(&kernel, scenario.drift.p, scenario.drift.q).unwrap();
        let drift = scenario.build_drift().expect("drift");
        let lambda0 =
            lambda_threshold(DriftVariant::Raw(&drift), &consts, scenario.series.lambda_margin)
                .expect("lambda threshold");
        Fixture {
            scenario,
            law,
            kernel,
            consts,
            drift,
            lambda0,
        }
    })
}

fn report(criterion: &str, pass: bool, detail: String) {
    println!(
        "criterion {criterion}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

#[test]
fn criterion_01_scaling_identity() {
    let f = fixture();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let u = [rng.gen::<f64>() * 8.0 - 4.0, rng.gen::<f64>() * 8.0 - 4.0];
        let rho = match k % 3 {
            0 => 0.5,
            1 => 2.0,
            _ => 10.0 * rng.gen::<f64>() + 0.1,
        };
        let ug = f.law.center[0] * u[0] + f.law.center[1] * u[1];
        let lhs =
            f.law.psi(&[rho * u[0], rho * u[1]]) + Complex64::new(0.0, rho * ug);
        let rhs = rho.powf(f.law.alpha) * (f.law.psi(&u) + Complex64::new(0.0, ug));
        worst = worst.max((lhs - rhs).norm() / rhs.norm().max(1e-30));
    }
    report("1 scaling identity", worst <= 1e-10, format!("max rel err {worst:.2e}"));
}

#[test]
fn criterion_02_psi_vs_radial_oracle() {
    let f = fixture();
    let alpha = f.law.alpha;
    let g = gamma_neg_alpha(alpha);
    let mut worst = 0.0f64;
    for k in 0..50 {
        // 50 log-spaced magnitudes over [1e-3, 1e3], alternating sign
        let mag = 10f64.powf(-3.0 + 6.0 * k as f64 / 49.0);
        let s = if k % 2 == 0 { mag } else { -mag };
        let (v, _) = levy_radial_integral(alpha, s, 1e-9).expect("oracle");
        let cf = g * neg_i_s_pow(s, alpha);
        worst = worst.max((v - cf).norm() / cf.norm());
    }
    report("2 closed form vs quadrature oracle", worst <= 1e-8, format!("max rel err {worst:.2e}"));
}

#[test]
fn criterion_03_kernel_normalization_and_scaling() {
    let f = fixture();
    let g = &f.kernel;
    assert_eq!(g.lattice.n, 512);
    let mass = g.mass();
    let mut detail = format!("mass {mass:.6}");
    let mut pass = (mass - 1.0).abs() <= 1e-3;
    for t in [0.5f64, 2.0, 4.0] {
        let lt = t.powf(1.0 / g.law.alpha) * g.lattice.extent;
        let (lat_t, pt) = g.invert_at_time(t, lt).unwrap();
        let peak = pt.iter().cloned().fold(f64::MIN, f64::max);
        let mut sup = 0.0f64;
        for i in 0..lat_t.n {
            for j in 0..lat_t.n {
                let x = [lat_t.x(i), lat_t.x(j)];
                if !g.in_footprint(t, x) {
                    continue; // documented tail clamp region
                }
                let v = g.density_at(t, x).unwrap();
                sup = sup.max((v - pt[i * lat_t.n + j]).abs());
            }
        }
        detail += &format!(", t={t}: sup/peak {:.2e}", sup / peak);
        pass &= sup <= 1e-4 * peak;
    }
    report("3 kernel normalization and scaling", pass, detail);
}

#[test]
fn criterion_04_time_derivative_equals_generator() {
    let f = fixture();
    let g = &f.kernel;
    let t = 1.0;
    let ap = g
        .generator_applied(t, GeneratorVariant::OnShiftedArgument)
        .unwrap();
    let dt = 0.02;
    let (_, pp) = g.invert_at_time(t + dt, g.lattice.extent).unwrap();
    let (_, pm) = g.invert_at_time(t - dt, g.lattice.extent).unwrap();
    let n = g.lattice.n;
    let mut sup_diff = 0.0f64;
    let mut sup_ap = 0.0f64;
    for i in n / 4..3 * n / 4 {
        for j in n / 4..3 * n / 4 {
            let k = i * n + j;
            let fd = (pp[k] - pm[k]) / (2.0 * dt);
            sup_diff = sup_diff.max((fd - ap[k]).abs());
            sup_ap = sup_ap.max(ap[k].abs());
        }
    }
    let rel = sup_diff / sup_ap;
    report("4 d/dt p_t = A_x p_t", rel <= 1e-3, format!("interior rel residual {rel:.2e}"));
}

#[test]
fn criterion_05_resolvent_equation() {
    let f = fixture();
    let sc = &f.scenario;
    let lat = sc.field_lattice();
    let run = |dt: f64| {
        let slices = (sc.field.horizon / dt).round() as usize + 1;
        let g = SpaceTimeField::from_fn(lat, dt, slices, Tail::Zero, {
            let gf = sc.observable_fn();
            move |t, x, y| gf(t, [x, y])
        });
        let p = ResolventParams::new(2.0, dt, 15.0).unwrap();
        verify_resolvent_equation(&p, &f.kernel, &g, 2e-2, 12).unwrap()
    };
    let coarse = run(0.025);
    let fine = run(0.0125);
    let pass = coarse.sup_residual <= 2e-2 * coarse.norm_g
        && fine.sup_residual <= 0.5 * coarse.sup_residual;
    report(
        "5 resolvent equation",
        pass,
        format!(
            "sup residual {:.3e} -> {:.3e} (norm {:.2}), quadrature cross-check {:.2e}",
            coarse.sup_residual, fine.sup_residual, coarse.norm_g, coarse.generator_cross_check
        ),
    );
}

#[test]
fn criterion_06_resolvent_constants() {
    let f = fixture();
    let c = &f.consts;
    // R^lambda 1 = 1/lambda
    let lam = 2.0;
    let ones = SpaceTimeField::from_fn(
        Lattice2::new(64, 10.0),
        0.1,
        3,
        Tail::HoldLast,
        |_, _, _| 1.0,
    );
    let p = ResolventParams::new(lam, 0.1, 15.0).unwrap();
    let r1 = apply_resolvent(&p, &f.kernel, &ones).unwrap();
    let dev = r1
        .data
        .iter()
        .fold(0.0f64, |m, v| m.max((v - 1.0 / lam).abs()));
    let mut pass = dev <= 1e-6;
    let mut detail = format!("|R 1 - 1/lambda| {dev:.2e}");
    // monotone decrease + exact power laws over {1,2,4,8,16}
    let lams = [1.0, 2.0, 4.0, 8.0, 16.0];
    let base = (c.n_lambda(1.0).unwrap(), c.m_lambda(1.0).unwrap(), c.l_lambda(1.0));
    let qs = c.q_star;
    let thn = 2.0 * qs * (c.p_star - 1.0) / (c.alpha * c.p_star);
    let thm = qs * 3.0 / c.alpha - 2.0 * qs / (c.alpha * c.p_star);
    let mut last = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut power_err = 0.0f64;
    for lam in lams {
        let n = c.n_lambda(lam).unwrap();
        let m = c.m_lambda(lam).unwrap();
        let l = c.l_lambda(lam);
        pass &= n < last.0 && m < last.1 && l < last.2;
        last = (n, m, l);
        power_err = power_err
            .max((n / (base.0 * lam.powf(-(1.0 - thn) / qs)) - 1.0).abs())
            .max((m / (base.1 * lam.powf(-(1.0 - thm) / qs)) - 1.0).abs())
            .max((l / (base.2 * lam.powf(1.0 / c.alpha - 1.0)) - 1.0).abs());
    }
    pass &= power_err <= 1e-10;
    detail += &format!(", power-law dev {power_err:.2e}");
    report("6 resolvent constants", pass, detail);
}

#[test]
fn criterion_07_norm_inequalities() {
    let f = fixture();
    let sc = &f.scenario;
    let lam = 2.0;
    let params = ResolventParams::new(lam, sc.field.dt, 15.0).unwrap();
    let l_lam = f.consts.l_lambda(lam);
    let lat = Lattice2::new(64, 10.0);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_ratio = 0.0f64;
    for _ in 0..20 {
        let mut g = SpaceTimeField::zeros(lat, sc.field.dt, 9, 1, Tail::Zero);
        for v in g.data.iter_mut() {
            *v = rng.gen::<f64>() * 2.0 - 1.0;
        }
        let grad = apply_resolvent_gradient(&params, &f.kernel, &g).unwrap();
        let ratio = grad.sup_norm() / (l_lam * g.sup_norm());
        worst_ratio = worst_ratio.max(ratio);
    }
    let mut pass = worst_ratio <= 1.0;
    let mut detail = format!("sup ||grad R g|| / (L ||g||) = {worst_ratio:.3}");
    // gradient bound for the singular drift component
    let m_lam = f.consts.m_lambda(lam).unwrap();
    let b2_norm = f.drift.singular_mixed_norm().unwrap();
    let slices = f.drift.singular.slices;
    let mut worst_b2 = 0.0f64;
    for comp in 0..2 {
        let mut g = SpaceTimeField::zeros(sc.field_lattice(), sc.field.dt, slices, 1, Tail::Zero);
        let n = sc.field_lattice().n;
        for k in 0..slices {
            let dst = g.slice_mut(k, 0);
            for i in 0..n {
                for j in 0..n {
                    let x = [sc.field_lattice().x(i), sc.field_lattice().x(j)];
                    dst[i * n + j] =
                        f.drift.singular.interp(k as f64 * sc.field.dt, x, comp);
                }
            }
        }
        let grad = apply_resolvent_gradient(&params, &f.kernel, &g).unwrap();
        worst_b2 = worst_b2.max(grad.sup_norm() / (m_lam * b2_norm));
    }
    pass &= worst_b2 <= 1.0;
    detail += &format!(", sup ||grad R b2|| / (M ||b2||) = {worst_b2:.3}");
    report("7 norm inequalities", pass, detail);
}

#[test]
fn criterion_08_series_contraction() {
    let f = fixture();
    let sc = &f.scenario;
    let lam = 2.0 * f.lambda0;
    let params = ResolventParams::new(lam, sc.field.dt, sc.resolvent.t_max_lambda / lam).unwrap();
    let g = sc.observable_field();
    let tol = sc.series.tol * g.sup_norm();
    let res = evaluate_series(
        DriftVariant::Raw(&f.drift),
        &params,
        &f.kernel,
        &f.consts,
        &g,
        tol,
        sc.series.max_terms,
    )
    .unwrap();
    let mut pass = res.bounds_hold(1e-6);
    let mut worst_ratio = 0.0f64;
    for w in res.term_norms.windows(2).skip(1) {
        if w[0] > 1e-13 {
            worst_ratio = worst_ratio.max(w[1] / w[0]);
        }
    }
    pass &= worst_ratio <= res.kappa * (1.0 + 1e-6);
    // zero-drift collapse
    let zero = DriftField {
        bounded: stabledrift::drift::BoundedPart::Zero,
        sup_bound: 0.0,
        singular: SpaceTimeField::zeros(Lattice2::new(16, 1.0), sc.field.dt, 2, 2, Tail::Zero),
        p: sc.drift.p,
        q: sc.drift.q,
        horizon: sc.drift.horizon,
    };
    let collapse = evaluate_series(
        DriftVariant::Raw(&zero),
        &params,
        &f.kernel,
        &f.consts,
        &g,
        tol,
        10,
    )
    .unwrap();
    let rg = apply_resolvent(&params, &f.kernel, &g).unwrap();
    pass &= collapse.truncation_order == 1 && collapse.sum.data == rg.data;
    report(
        "8 series contraction",
        pass,
        format!(
            "terms {}, kappa {:.4}, max ratio {:.4}, bounds hold {}, zero-drift collapse exact",
            res.truncation_order,
            res.kappa,
            worst_ratio,
            res.bounds_hold(1e-6)
        ),
    );
}

#[test]
fn criterion_09_sampler_exactness() {
    let f = fixture();
    let h = 0.01;
    let n = 1_000_000usize;
    let mut probes = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        probes.push([rng.gen::<f64>() * 12.0 - 6.0, rng.gen::<f64>() * 12.0 - 6.0]);
    }
    let worst = sampler_ecf_error(&f.law, h, &probes, n, 101).unwrap();
    let band = 4.0 / (n as f64).sqrt();
    report(
        "9 sampler exactness",
        worst <= band,
        format!("max |ecf - exp(-h psi)| {worst:.2e} vs band {band:.2e}"),
    );
}

#[test]
fn criterion_10_series_vs_monte_carlo() {
    let f = fixture();
    let sc = &f.scenario;
    let lam = 2.0 * f.lambda0;
    let params = ResolventParams::new(lam, sc.field.dt, sc.resolvent.t_max_lambda / lam).unwrap();
    let g_fn = sc.observable_fn();
    let g_field = sc.observable_field();
    let cfg = sc.sim_config();
    assert_eq!(cfg.paths, 100_000);
    assert_eq!(cfg.step, 1e-3);
    let mut pass = true;
    let mut detail = format!("lambda {lam:.3}");

    let cmp = mc_laplace_vs_series(
        &cfg, &f.law, SimDrift::None, None, &f.kernel, &f.consts, &params,
        &|t, x| g_fn(t, x), &g_field, sc.series.tol,
    )
    .unwrap();
    pass &= cmp.pass_3se;
    detail += &format!("; zero: z {:.2}", cmp.z);

    let mut bounded_only = f.drift.clone();
    bounded_only.singular.data.iter_mut().for_each(|v| *v = 0.0);
    let cmp = mc_laplace_vs_series(
        &cfg, &f.law, SimDrift::Raw(&bounded_only),
        Some(DriftVariant::Raw(&bounded_only)),
        &f.kernel, &f.consts, &params, &|t, x| g_fn(t, x), &g_field, sc.series.tol,
    )
    .unwrap();
    pass &= cmp.pass_3se;
    detail += &format!("; bounded: z {:.2}", cmp.z);

    let m16 = f.drift.mollify(16).unwrap();
    let cmp = mc_laplace_vs_series(
        &cfg, &f.law, SimDrift::Mollified(&m16),
        Some(DriftVariant::Mollified(&m16)),
        &f.kernel, &f.consts, &params, &|t, x| g_fn(t, x), &g_field, sc.series.tol,
    )
    .unwrap();
    pass &= cmp.pass_3se;
    detail += &format!("; mollified16: z {:.2}", cmp.z);

    report("10 series vs Monte Carlo", pass, detail);
}

#[test]
fn criterion_11_uniqueness_probe() {
    let f = fixture();
    let sc = &f.scenario;
    let mut cfg = sc.sim_config();
    cfg.paths = sc.sim.uniqueness_paths;
    let t = sc.sim.uniqueness_checkpoint;
    let lv = &sc.sim.uniqueness_levels;
    let coarse = uniqueness_probe(&cfg, &f.law, &f.drift, (lv[0], lv[2]), t, LevelCoupling::SharedNoise)
        .unwrap();
    let fine = uniqueness_probe(&cfg, &f.law, &f.drift, (lv[1], lv[3]), t, LevelCoupling::SharedNoise)
        .unwrap();
    let control = same_law_control(&cfg, &f.law, &f.drift, lv[1], t).unwrap();
    let trend = fine.energy < coarse.energy;
    let control_ok = control.ks_x < control.ks_critical_5pct
        && control.ks_y < control.ks_critical_5pct;
    report(
        "11 uniqueness probe",
        trend && control_ok,
        format!(
            "coupled energy ({},{}) {:.3e} > ({},{}) {:.3e}; control KS {:.4}/{:.4} < {:.4}",
            lv[0], lv[2], coarse.energy, lv[1], lv[3], fine.energy,
            control.ks_x, control.ks_y, control.ks_critical_5pct
        ),
    );
}

#[test]
fn criterion_12_admissibility_gate() {
    let a = check_admissible(2, 1.5, 12.0, 12.0);
    let b = check_admissible(2, 1.5, 4.0, 4.0);
    let c = check_admissible(2, 1.5, 8.0, 6.0); // exact boundary
    let pass = a.pass
        && (a.lhs - (2.0 / 12.0 + 1.5 / 12.0)).abs() < 1e-15
        && !b.pass
        && (b.lhs - 0.875).abs() < 1e-15
        && !c.pass;
    report(
        "12 admissibility gate",
        pass,
        format!(
            "(12,12): {:.5} PASS; (4,4): {:.5} FAIL; boundary strict FAIL",
            a.lhs, b.lhs
        ),
    );
}
