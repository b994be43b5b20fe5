//! Scenario-driven command line: parse one TOML scenario, run a
//! verification suite or experiment, and emit CSV/JSON artifacts plus a run
//! manifest.
//!
//! Exit codes: 1 validation failure, 2 numerical-budget failure, 3 I/O.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use stabledrift::drift::{check_admissible, mixed_norm};
use stabledrift::field::Tail;
use stabledrift::generator::{martingale_residual, MartingaleCheck, TestFunction};
use stabledrift::kernel::{write_kernel_binary, write_kernel_csv, KernelField};
use stabledrift::resolvent::{
    apply_resolvent, verify_resolvent_equation, ResolventConstants, ResolventParams,
};
use stabledrift::scenario::Scenario;
use stabledrift::series::{
    abs_drift_sup_bound, evaluate_series, kappa, lambda_threshold, series_of_abs_drift,
    DriftVariant,
};
use stabledrift::sim::{
    euler_paths, mc_laplace_vs_series, same_law_control, uniqueness_probe, LevelCoupling,
    SimDrift,
};
use stabledrift::Error as CoreError;

#[derive(Parser)]
#[command(name = "stabledrift", about = "Numerical experiments for stable-driven SDEs with singular drift", version)]
struct Cli {
    /// Scenario TOML file.
    #[arg(long, global = true, default_value = "scenarios/reference.toml")]
    scenario: PathBuf,
    /// Output directory (overrides the scenario's output block).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Rayon thread count (0 = default).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Clone, Copy, PartialEq)]
enum Cmd {
    /// Spectral-measure diagnostics: span rank, fitted decay constant.
    ValidateLaw,
    /// Build the heat kernel, check normalization, export it.
    Kernel,
    /// Generator symbol relation and martingale residuals.
    GeneratorCheck,
    /// Admissibility, mixed norms and mollification invariants.
    DriftCheck,
    /// Resolvent equation residual at default and refined resolution.
    Resolvent,
    /// N, M, L, kappa table over the lambda list plus lambda_0.
    Constants,
    /// Perturbation series: per-term norms, bounds, tail.
    Series,
    /// Monte Carlo Laplace functionals against the series.
    McCompare,
    /// Distributional distance between mollification levels.
    Uniqueness,
    /// Everything above in order.
    All,
}

fn main() {
    let cli = Cli::parse();
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .ok();
    }
    let code = match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<CoreError>() {
                Some(CoreError::Io(_)) => 3,
                Some(CoreError::QuadratureFailure { .. }) | Some(CoreError::Budget(_)) => 2,
                Some(_) => 1,
                None => {
                    if e.downcast_ref::<std::io::Error>().is_some() {
                        3
                    } else {
                        1
                    }
                }
            }
        }
    };
    std::process::exit(code);
}

struct Ctx {
    sc: Scenario,
    outdir: PathBuf,
    config_sha: String,
    artifacts: Vec<String>,
}

impl Ctx {
    fn artifact(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.to_string());
        self.outdir.join(name)
    }

    fn write_json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let path = self.artifact(name);
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, value)?;
        writeln!(f)?;
        Ok(())
    }

    fn write_jsonl<T: serde::Serialize>(&mut self, name: &str, rows: &[T]) -> anyhow::Result<()> {
        let path = self.artifact(name);
        let mut f = std::fs::File::create(path)?;
        for r in rows {
            serde_json::to_writer(&mut f, r)?;
            writeln!(f)?;
        }
        Ok(())
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&cli.scenario)
        .map_err(|e| anyhow::anyhow!(CoreError::Io(e)))?;
    let mut sc = Scenario::from_toml(&text).map_err(anyhow::Error::new)?;
    if let Some(seed) = cli.seed {
        sc.sim.seed = seed;
    }
    let outdir = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&sc.output.dir));
    std::fs::create_dir_all(&outdir).map_err(|e| anyhow::anyhow!(CoreError::Io(e)))?;
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    hasher.update(sc.sim.seed.to_le_bytes());
    let config_sha = format!("{:x}", hasher.finalize());
    let mut ctx = Ctx {
        sc,
        outdir,
        config_sha,
        artifacts: Vec::new(),
    };
    let started = Instant::now();
    let cmds: Vec<Cmd> = match cli.cmd {
        Cmd::All => vec![
            Cmd::ValidateLaw,
            Cmd::Kernel,
            Cmd::GeneratorCheck,
            Cmd::DriftCheck,
            Cmd::Resolvent,
            Cmd::Constants,
            Cmd::Series,
            Cmd::McCompare,
            Cmd::Uniqueness,
        ],
        c => vec![c],
    };
    for c in cmds {
        dispatch(c, &mut ctx)?;
    }
    let manifest = serde_json::json!({
        "config_sha256": ctx.config_sha,
        "seed": ctx.sc.sim.seed,
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": cmd_name(cli.cmd),
        "wall_ms": started.elapsed().as_millis() as u64,
        "artifacts": ctx.artifacts,
    });
    let mut f = std::fs::File::create(ctx.outdir.join("run_manifest.json"))?;
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    writeln!(f)?;
    Ok(())
}

fn cmd_name(c: Cmd) -> &'static str {
    match c {
        Cmd::ValidateLaw => "validate-law",
        Cmd::Kernel => "kernel",
        Cmd::GeneratorCheck => "generator-check",
        Cmd::DriftCheck => "drift-check",
        Cmd::Resolvent => "resolvent",
        Cmd::Constants => "constants",
        Cmd::Series => "series",
        Cmd::McCompare => "mc-compare",
        Cmd::Uniqueness => "uniqueness",
        Cmd::All => "all",
    }
}

fn dispatch(cmd: Cmd, ctx: &mut Ctx) -> anyhow::Result<()> {
    match cmd {
        Cmd::ValidateLaw => validate_law(ctx),
        Cmd::Kernel => kernel(ctx),
        Cmd::GeneratorCheck => generator_check(ctx),
        Cmd::DriftCheck => drift_check(ctx),
        Cmd::Resolvent => resolvent_cmd(ctx),
        Cmd::Constants => constants(ctx),
        Cmd::Series => series_cmd(ctx),
        Cmd::McCompare => mc_compare(ctx),
        Cmd::Uniqueness => uniqueness(ctx),
        Cmd::All => unreachable!(),
    }
}

fn validate_law(ctx: &mut Ctx) -> anyhow::Result<()> {
    let law = ctx.sc.build_law()?;
    let report = law.validate(10_000);
    println!(
        "law: d={} alpha={} rank={} nondegenerate={} fitted c={:.6}",
        report.dim, report.alpha, report.span_rank, report.nondegenerate,
        report.fitted_decay_constant
    );
    ctx.write_json("law_validation.json", &report)?;
    if !report.pass() {
        anyhow::bail!(CoreError::Degenerate {
            rank: report.span_rank,
            dim: report.dim,
        });
    }
    Ok(())
}

fn kernel(ctx: &mut Ctx) -> anyhow::Result<()> {
    let law = ctx.sc.build_law()?;
    let grid = ctx.sc.build_kernel(&law)?;
    let mass = grid.mass();
    let peak = grid.peak();
    if (mass - 1.0).abs() > 1e-3 {
        anyhow::bail!(CoreError::Budget(format!(
            "kernel mass {mass} violates the 1e-3 normalization budget"
        )));
    }
    let report = serde_json::json!({
        "mass": mass,
        "peak": peak,
        "truncation": grid.truncation,
        "norm_p1_l1": grid.lp_norm(KernelField::P1, 1.0)?,
        "norm_p1_l2": grid.lp_norm(KernelField::P1, 2.0)?,
        "norm_grad_l1": grid.lp_norm(KernelField::GradP1, 1.0)?,
    });
    println!("kernel: mass={mass:.8} peak={peak:.6}");
    ctx.write_json("kernel_report.json", &report)?;
    let formats = ctx.sc.output.formats.clone();
    if formats.iter().any(|f| f == "csv") {
        let path = ctx.artifact("kernel.csv");
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_kernel_csv(&mut f, &grid)?;
    }
    if formats.iter().any(|f| f == "binary") {
        let path = ctx.artifact("kernel.bin");
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_kernel_binary(&mut f, &grid)?;
    }
    Ok(())
}

fn generator_check(ctx: &mut Ctx) -> anyhow::Result<()> {
    let law = ctx.sc.build_law()?;
    let worst = stabledrift::generator::symbol_relation_error(
        &law,
        &[[0.5, 0.0], [1.0, 2.0], [-3.0, 1.5]],
        1e-8,
    )?;
    // martingale residuals under zero drift
    let mut rows = Vec::new();
    for (name, f) in [
        ("linear", TestFunction::linear([1.0, 0.5], &law)),
        ("cos_wave", TestFunction::cos_wave([0.8, -0.6], 0.0, &law)),
    ] {
        let check = MartingaleCheck {
            law: &law,
            f: &f,
            t1: 0.1,
            t2: 0.5,
        };
        let cfg = stabledrift::sim::SimConfig {
            step: 0.002,
            horizon: 0.5,
            paths: 20_000,
            seed: ctx.sc.sim.seed,
            start_time: 0.0,
            start: [0.0, 0.0],
            checkpoints: vec![],
        };
        let spec = stabledrift::sim::MartingaleSpec {
            check: &check,
            drift: SimDrift::None,
        };
        let ens = euler_paths(&cfg, &law, SimDrift::None, None, Some(&spec))?;
        let res = martingale_residual(&ens.martingale_increments);
        println!(
            "martingale[{name}]: mean={:.3e} se={:.3e} z={:.2}",
            res.mean, res.std_error, res.z
        );
        rows.push(serde_json::json!({ "f": name, "residual": res }));
    }
    let report = serde_json::json!({
        "symbol_relation_worst_rel_err": worst,
        "martingale": rows,
    });
    ctx.write_json("generator_check.json", &report)?;
    if worst > 1e-6 {
        anyhow::bail!(CoreError::Budget(format!(
            "generator symbol relation error {worst:e} exceeds 1e-6"
        )));
    }
    Ok(())
}

fn drift_check(ctx: &mut Ctx) -> anyhow::Result<()> {
    let sc = &ctx.sc;
    let table = [
        (2usize, 1.5f64, 12.0f64, 12.0f64),
        (2, 1.5, 4.0, 4.0),
        (2, 1.5, 8.0, 6.0),
        (2, sc.law.alpha, sc.drift.p, sc.drift.q),
    ];
    let rows: Vec<_> = table
        .iter()
        .map(|&(d, a, p, q)| {
            let adm = check_admissible(d, a, p, q);
            serde_json::json!({ "d": d, "alpha": a, "p": p, "q": q, "result": adm })
        })
        .collect();
    let drift = sc.build_drift()?;
    let norm = mixed_norm(&drift.singular, drift.p, drift.q)?;
    let mut moll = Vec::new();
    for n in [4usize, 8, 16, 32] {
        let m = drift.mollify(n)?;
        m.check_invariants(&drift)?;
        let nm = mixed_norm(&m.singular, drift.p, drift.q)?.value;
        let mut diff = drift.singular.clone();
        diff.axpy(-1.0, &m.singular);
        let dev = mixed_norm(&diff, drift.p, drift.q)?.value;
        moll.push(serde_json::json!({
            "level": n,
            "mixed_norm": nm,
            "deviation_from_raw": dev,
            "lipschitz_estimate": m.lipschitz_estimate,
        }));
    }
    println!("drift: ||b2||_LqLp = {:.6}", norm.value);
    let report = serde_json::json!({
        "admissibility_table": rows,
        "singular_mixed_norm": norm,
        "mollification": moll,
    });
    ctx.write_json("drift_check.json", &report)?;
    Ok(())
}

fn resolvent_cmd(ctx: &mut Ctx) -> anyhow::Result<()> {
    let sc = ctx.sc.clone();
    let law = sc.build_law()?;
    let grid = sc.build_kernel(&law)?;
    let lam = sc.resolvent.lambdas.first().copied().unwrap_or(2.0).max(1.0);
    let run = |dt: f64| -> anyhow::Result<stabledrift::resolvent::ResolventEquationReport> {
        let slices = (sc.field.horizon / dt).round() as usize + 1;
        let g = stabledrift::field::SpaceTimeField::from_fn(
            sc.field_lattice(),
            dt,
            slices,
            Tail::Zero,
            {
                let f = sc.observable_fn();
                move |t, x, y| f(t, [x, y])
            },
        );
        let p = ResolventParams::new(lam, dt, sc.resolvent.t_max_lambda / lam)?;
        Ok(verify_resolvent_equation(&p, &grid, &g, 2e-2, 16)?)
    };
    let coarse = run(sc.field.dt / 2.0)?;
    let fine = run(sc.field.dt / 4.0)?;
    // R^lambda 1 = 1/lambda sanity
    let ones = stabledrift::field::SpaceTimeField::from_fn(
        sc.field_lattice(),
        sc.field.dt,
        3,
        Tail::HoldLast,
        |_, _, _| 1.0,
    );
    let p1 = ResolventParams::new(lam, sc.field.dt, sc.resolvent.t_max_lambda / lam)?;
    let r1 = apply_resolvent(&p1, &grid, &ones)?;
    let dev_one = r1
        .data
        .iter()
        .fold(0.0f64, |m, v| m.max((v - 1.0 / lam).abs()));
    println!(
        "resolvent: residual {:.4e} -> {:.4e} (norm {:.3}), |R1 - 1/lambda| = {:.2e}",
        coarse.sup_residual, fine.sup_residual, coarse.norm_g, dev_one
    );
    let report = serde_json::json!({
        "lambda": lam,
        "default": coarse,
        "refined": fine,
        "resolvent_of_one_deviation": dev_one,
    });
    ctx.write_json("resolvent_residual.json", &report)?;
    if !coarse.within_tolerance || fine.sup_residual > 0.5 * coarse.sup_residual {
        anyhow::bail!(CoreError::Budget(format!(
            "resolvent equation residual budget violated: {} -> {}",
            coarse.sup_residual, fine.sup_residual
        )));
    }
    Ok(())
}

fn constants(ctx: &mut Ctx) -> anyhow::Result<()> {
    let sc = ctx.sc.clone();
    let law = sc.build_law()?;
    let grid = sc.build_kernel(&law)?;
    let consts = ResolventConstants::from_grid(&grid, sc.drift.p, sc.drift.q)?;
    let drift = sc.build_drift()?;
    let dv = DriftVariant::Raw(&drift);
    let lam0 = lambda_threshold(dv, &consts, sc.series.lambda_margin)?;
    let path = ctx.artifact("constants.csv");
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "lambda,n_lambda,m_lambda,l_lambda,kappa")?;
    let mut rows = Vec::new();
    for &lam in &sc.resolvent.lambdas {
        let n = consts.n_lambda(lam)?;
        let m = consts.m_lambda(lam)?;
        let l = consts.l_lambda(lam);
        let k = kappa(lam, dv, &consts)?;
        writeln!(f, "{lam:.17e},{n:.17e},{m:.17e},{l:.17e},{k:.17e}")?;
        rows.push(serde_json::json!({
            "lambda": lam, "n": n, "m": m, "l": l, "kappa": k,
        }));
    }
    println!("constants: lambda_0 = {lam0:.6}");
    let report = serde_json::json!({
        "lambda_0": lam0,
        "norms": consts,
        "table": rows,
    });
    ctx.write_json("constants.json", &report)?;
    Ok(())
}

fn series_cmd(ctx: &mut Ctx) -> anyhow::Result<()> {
    let sc = ctx.sc.clone();
    let law = sc.build_law()?;
    let grid = sc.build_kernel(&law)?;
    let consts = ResolventConstants::from_grid(&grid, sc.drift.p, sc.drift.q)?;
    let drift = sc.build_drift()?;
    let dv = DriftVariant::Raw(&drift);
    let lam0 = lambda_threshold(dv, &consts, sc.series.lambda_margin)?;
    let lam = 2.0 * lam0;
    let params = ResolventParams::new(lam, sc.field.dt, sc.resolvent.t_max_lambda / lam)?;
    let g = sc.observable_field();
    let tol = sc.series.tol * g.sup_norm().max(1e-12);
    let res = evaluate_series(dv, &params, &grid, &consts, &g, tol, sc.series.max_terms)?;
    let path = ctx.artifact("series_terms.csv");
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "k,term_norm,analytic_bound")?;
    for (k, (n, b)) in res.term_norms.iter().zip(&res.term_bounds).enumerate() {
        writeln!(f, "{k},{n:.17e},{b:.17e}")?;
    }
    // probe records at the configured start point and checkpoints
    let mut probes = Vec::new();
    let start = [sc.sim.start[0], sc.sim.start[1]];
    probes.push(serde_json::json!({
        "s": sc.sim.start_time, "x": start,
        "value": res.value_at(sc.sim.start_time, start),
    }));
    for &c in &sc.sim.checkpoints {
        probes.push(serde_json::json!({
            "s": c, "x": start, "value": res.value_at(c, start),
        }));
    }
    let (abs_res, abs_sup) = series_of_abs_drift(
        dv,
        &params,
        &grid,
        &consts,
        &g,
        tol,
        sc.series.max_terms,
    )?;
    let abs_bound = abs_drift_sup_bound(dv, &params, &consts)?;
    println!(
        "series: lambda={lam:.4} terms={} kappa={:.4} tail={:.2e}; G(|b|) sup {:.4} <= {:.4}",
        res.truncation_order, res.kappa, res.tail_bound, abs_sup, abs_bound
    );
    let report = serde_json::json!({
        "lambda": lam,
        "lambda_0": lam0,
        "kappa": res.kappa,
        "terms": res.truncation_order,
        "tail_bound": res.tail_bound,
        "bounds_hold": res.bounds_hold(1e-6),
        "probes": probes,
        "abs_drift_sup": abs_sup,
        "abs_drift_sup_bound": abs_bound,
        "abs_drift_kappa": abs_res.kappa,
    });
    ctx.write_json("series.json", &report)?;
    if !res.bounds_hold(1e-6) {
        anyhow::bail!(CoreError::Budget("series term bound violated".into()));
    }
    Ok(())
}

fn mc_compare(ctx: &mut Ctx) -> anyhow::Result<()> {
    let sc = ctx.sc.clone();
    let law = sc.build_law()?;
    let grid = sc.build_kernel(&law)?;
    let consts = ResolventConstants::from_grid(&grid, sc.drift.p, sc.drift.q)?;
    let drift = sc.build_drift()?;
    let lam0 = lambda_threshold(DriftVariant::Raw(&drift), &consts, sc.series.lambda_margin)?;
    let lam = 2.0 * lam0;
    let params = ResolventParams::new(lam, sc.field.dt, sc.resolvent.t_max_lambda / lam)?;
    let g_fn = sc.observable_fn();
    let g_field = sc.observable_field();
    let cfg = sc.sim_config();
    let mut rows = Vec::new();

    // (a) zero drift
    let cmp = mc_laplace_vs_series(
        &cfg, &law, SimDrift::None, None, &grid, &consts, &params,
        &|t, x| g_fn(t, x), &g_field, sc.series.tol,
    )?;
    println!("mc-compare[zero]: mc={:.6e} series={:.6e} z={:.2}", cmp.mc, cmp.series, cmp.z);
    rows.push(serde_json::json!({"case": "zero", "report": cmp}));

    // (b) bounded (constant-vector) drift only
    let mut bounded_only = drift.clone();
    bounded_only.singular.data.iter_mut().for_each(|v| *v = 0.0);
    let cmp = mc_laplace_vs_series(
        &cfg, &law, SimDrift::Raw(&bounded_only),
        Some(DriftVariant::Raw(&bounded_only)),
        &grid, &consts, &params, &|t, x| g_fn(t, x), &g_field, sc.series.tol,
    )?;
    println!("mc-compare[bounded]: mc={:.6e} series={:.6e} z={:.2}", cmp.mc, cmp.series, cmp.z);
    rows.push(serde_json::json!({"case": "bounded", "report": cmp}));

    // (c) mollified singular drift, n = 16
    let m16 = drift.mollify(16)?;
    let cmp = mc_laplace_vs_series(
        &cfg, &law, SimDrift::Mollified(&m16),
        Some(DriftVariant::Mollified(&m16)),
        &grid, &consts, &params, &|t, x| g_fn(t, x), &g_field, sc.series.tol,
    )?;
    println!("mc-compare[mollified16]: mc={:.6e} series={:.6e} z={:.2}", cmp.mc, cmp.series, cmp.z);
    rows.push(serde_json::json!({"case": "mollified16", "report": cmp}));

    ctx.write_jsonl("mc_compare.json", &rows)?;
    Ok(())
}

fn uniqueness(ctx: &mut Ctx) -> anyhow::Result<()> {
    let sc = ctx.sc.clone();
    let law = sc.build_law()?;
    let drift = sc.build_drift()?;
    let lv = &sc.sim.uniqueness_levels;
    if lv.len() < 4 {
        anyhow::bail!(CoreError::Config("need four uniqueness levels".into()));
    }
    let mut cfg = sc.sim_config();
    cfg.paths = sc.sim.uniqueness_paths;
    let t = sc.sim.uniqueness_checkpoint;
    let d_lo = uniqueness_probe(&cfg, &law, &drift, (lv[0], lv[2]), t, LevelCoupling::SharedNoise)?;
    let d_hi = uniqueness_probe(&cfg, &law, &drift, (lv[1], lv[3]), t, LevelCoupling::SharedNoise)?;
    let control = same_law_control(&cfg, &law, &drift, lv[1], t)?;
    println!(
        "uniqueness: energy({},{}) = {:.5} energy({},{}) = {:.5} control ks = {:.4}/{:.4} (crit {:.4})",
        lv[0], lv[2], d_lo.energy, lv[1], lv[3], d_hi.energy,
        control.ks_x, control.ks_y, control.ks_critical_5pct
    );
    let report = serde_json::json!({
        "coarse_pair": d_lo,
        "fine_pair": d_hi,
        "control": control,
        "trend_toward_unique_law": d_hi.energy < d_lo.energy,
    });
    ctx.write_json("uniqueness.json", &report)?;
    Ok(())
}
