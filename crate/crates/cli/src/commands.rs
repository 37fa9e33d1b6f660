//! Command implementations.

use std::path::{Path, PathBuf};
use std::time::Instant;

use kpz_core::identities::identity_suite;
use kpz_core::kernels::{
    admissible_contour, derive_params, phi1, phi1_contour, phi2, phi2_contour, phi3, phi3_contour, psi1, psi1_contour,
    FourFoldKernel, KernelEvalConfig, TwoTimeParams,
};
use kpz_core::prelimit::{
    joint_cdf_contour, joint_cdf_enumeration, rescaled_kernel_error, vector_prob, vector_prob_enumeration, FiniteKernelKind,
    GeomLppParams, JointContourSpec, ScalingEmbedding,
};
use kpz_core::quad::ContourSpec;
use kpz_core::sim::{field_for_embedding, ks_statistic, rescale_to_limit, sample_joint_many, DpScheme, EmpiricalCdf2D};
use kpz_core::tw::{f2_cdf, F2Table, FredholmSpec};
use kpz_core::twotime::{ftt, TruncationSpec};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};
use crate::output::{float_column, read_records, Cell, Format, Table};
use crate::{
    Cli, Command, CompareArgs, ConvergenceArgs, FttArgs, KernelArgs, KernelName, SchemeArg, SimulateArgs, Suite, TimeArgs, Tw2Args,
    VerifyArgs,
};

/// Largest number of grid points a command accepts.
pub const MAX_GRID_POINTS: usize = 1_000_000;

/// Runs the parsed command.
pub fn dispatch(cli: &Cli) -> CliResult<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // A pool built by an earlier call in the same process is kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let out = cli.output.as_deref();
    match &cli.command {
        Command::Tw2(a) => cmd_tw2(a)?.emit(cli.format, out),
        Command::Ftt(a) => cmd_ftt(a, cli.seed)?.emit(cli.format, out),
        Command::Kernels(a) => cmd_kernels(a)?.emit(cli.format, out),
        Command::Simulate(a) => {
            let (table, meta, summary) = cmd_simulate(a, cli.seed)?;
            table.emit(cli.format, out)?;
            if let Some(p) = out {
                std::fs::write(sidecar_path(p), serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n")?;
            }
            eprintln!("{summary}");
            Ok(())
        }
        Command::Verify(a) => {
            let table = cmd_verify(a, cli.seed)?;
            table.emit(cli.format, out)?;
            fail_on_false(&table, "check", "pass")
        }
        Command::Compare(a) => {
            let table = cmd_compare(a)?;
            table.emit(cli.format, out)?;
            fail_on_false(&table, "eta1_star", "pass")
        }
        Command::Convergence(a) => cmd_convergence(a)?.emit(cli.format, out),
    }
}

fn fail_on_false(table: &Table, label: &str, flag: &str) -> CliResult<()> {
    let li = table.columns.iter().position(|c| c == label).expect("label column");
    let fi = table.columns.iter().position(|c| c == flag).expect("flag column");
    let failed: Vec<String> = table
        .rows
        .iter()
        .filter(|r| r[fi] == Cell::B(false))
        .map(|r| match &r[li] {
            Cell::S(s) => s.clone(),
            Cell::F(v) => format!("{label} = {v}"),
            other => format!("{other:?}"),
        })
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(format!("{} failing: {}", failed.len(), failed.join("; "))))
    }
}

/// `from, from + step, …` up to `to`.
pub fn uniform_grid(from: f64, to: f64, step: f64) -> CliResult<Vec<f64>> {
    if !(from.is_finite() && to.is_finite() && step.is_finite()) || !(step > 0.0) || to < from {
        return Err(CliError::Usage(format!("bad grid: from {from} to {to} step {step}")));
    }
    let n = ((to - from) / step + 1e-9).floor() + 1.0;
    if n > MAX_GRID_POINTS as f64 {
        return Err(CliError::Usage(format!("grid has {n} points, more than {MAX_GRID_POINTS}")));
    }
    Ok((0..n as usize).map(|k| from + k as f64 * step).collect())
}

fn params(t: &TimeArgs, eta1: f64, eta2: f64) -> CliResult<TwoTimeParams> {
    Ok(derive_params(t.t1, t.t2, t.nu1, t.nu2, eta1, eta2)?)
}

fn embedding(t: &TimeArgs, m: f64, eta1: f64, eta2: f64) -> ScalingEmbedding {
    ScalingEmbedding { m, t1: t.t1, t2: t.t2, nu1: t.nu1, nu2: t.nu2, eta1, eta2 }
}

fn non_empty(name: &str, v: &[f64]) -> CliResult<()> {
    if v.is_empty() || v.len() > MAX_GRID_POINTS || v.iter().any(|x| !x.is_finite()) {
        return Err(CliError::Usage(format!("--{name} needs finite values")));
    }
    Ok(())
}

/// `(η, F2(η))` on a uniform grid.
pub fn cmd_tw2(a: &Tw2Args) -> CliResult<Table> {
    let grid = uniform_grid(a.from, a.to, a.step)?;
    let spec = FredholmSpec { nystrom_nodes: a.nodes, domain_cutoff: a.cutoff };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let vals = grid.par_iter().map(|e| f2_cdf(*e, &spec)).collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new(&["eta", "f2"]);
    for (e, v) in grid.iter().zip(vals) {
        t.push(vec![(*e).into(), v.into()]);
    }
    Ok(t)
}

/// `(η₁*, η₂, F_tt, trunc_bound)` on a product grid.
pub fn cmd_ftt(a: &FttArgs, seed: u64) -> CliResult<Table> {
    non_empty("eta1", &a.eta1)?;
    non_empty("eta2", &a.eta2)?;
    let trunc = TruncationSpec {
        rmax: a.shells,
        smax: a.shells,
        tmax: a.shells,
        shell_max: a.shells,
        eta_nodes: a.eta_nodes,
        inner_nodes: a.inner_nodes,
        eta1_cutoff: a.eta1_cutoff,
        seed,
        ..TruncationSpec::default()
    };
    trunc.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let cfg = KernelEvalConfig::default();
    let mut t = Table::new(&["eta1_star", "eta2", "ftt", "trunc_bound"]);
    for e1 in &a.eta1 {
        for e2 in &a.eta2 {
            let p = params(&a.times, *e1, *e2)?;
            let r = ftt(&p, *e1, &trunc, &cfg)?;
            t.push(vec![(*e1).into(), (*e2).into(), r.value.into(), r.trunc_bound.into()]);
        }
    }
    Ok(t)
}

fn contour_configs(p: &TwoTimeParams) -> (KernelEvalConfig, KernelEvalConfig) {
    let base = KernelEvalConfig::default();
    (
        KernelEvalConfig { contour: admissible_contour(p, FourFoldKernel::Phi1, &ContourSpec::default()), ..base },
        KernelEvalConfig { contour: admissible_contour(p, FourFoldKernel::Psi1, &ContourSpec::default()), ..base },
    )
}

/// Airy forms `[φ1, ψ1, φ2, φ3]` and, when `dual`, the contour forms.
pub fn kernel_values(p: &TwoTimeParams, x: f64, y: f64, dual: bool) -> CliResult<(Vec<f64>, Option<Vec<f64>>)> {
    let cfg = KernelEvalConfig::default();
    let airy = vec![phi1(p, x, y, &cfg)?, psi1(p, x, y, &cfg)?, phi2(p, x, y), phi3(p, x, y)];
    if !dual {
        return Ok((airy, None));
    }
    let (c1, c2) = contour_configs(p);
    let contour =
        vec![phi1_contour(p, x, y, &c1)?, psi1_contour(p, x, y, &c2)?, phi2_contour(p, x, y, &c1)?, phi3_contour(p, x, y, &c1)?];
    Ok((airy, Some(contour)))
}

/// Limiting kernels on a product grid.
pub fn cmd_kernels(a: &KernelArgs) -> CliResult<Table> {
    non_empty("x", &a.x)?;
    non_empty("y", &a.y)?;
    let p = params(&a.times, a.eta1, a.eta2)?;
    let mut cols = vec!["x", "y", "phi1", "psi1", "phi2", "phi3"];
    if a.dual {
        cols.extend(["phi1_contour", "psi1_contour", "phi2_contour", "phi3_contour", "max_abs_diff"]);
    }
    let points: Vec<(f64, f64)> = a.x.iter().flat_map(|x| a.y.iter().map(move |y| (*x, *y))).collect();
    let vals = points.par_iter().map(|(x, y)| kernel_values(&p, *x, *y, a.dual)).collect::<CliResult<Vec<_>>>()?;
    let mut t = Table::new(&cols);
    for ((x, y), (airy, contour)) in points.iter().zip(vals) {
        let mut row: Vec<Cell> = vec![(*x).into(), (*y).into()];
        row.extend(airy.iter().map(|v| Cell::F(*v)));
        if let Some(c) = contour {
            let diff = airy.iter().zip(&c).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
            row.extend(c.iter().map(|v| Cell::F(*v)));
            row.push(diff.into());
        }
        t.push(row);
    }
    Ok(t)
}

/// Path of the metadata written next to a sample dump.
pub fn sidecar_path(p: &Path) -> PathBuf {
    p.with_extension("meta.json")
}

/// Samples, metadata and a one-line JSON summary of a simulation.
pub fn cmd_simulate(a: &SimulateArgs, seed: u64) -> CliResult<(Table, serde_json::Value, String)> {
    if a.samples == 0 {
        return Err(CliError::Usage("--samples must be at least 1".into()));
    }
    let emb = embedding(&a.times, a.m, 0.0, 0.0);
    let fp = emb.finite()?;
    let dt = a.dt.unwrap_or(1e-3 * fp.mu2);
    let scheme = match a.scheme {
        SchemeArg::Bridge => DpScheme::BridgeCorrected,
        SchemeArg::Grid => DpScheme::Grid,
    };
    let field = field_for_embedding(&emb, dt, scheme, seed)?;
    let start = Instant::now();
    let samples = sample_joint_many(&field, &emb, a.first_replica, a.samples)?;
    let seconds = start.elapsed().as_secs_f64();
    let mut t = Table::new(&["h1", "h2", "x_m", "y_m", "seed", "M"]);
    let mut xs = Vec::with_capacity(samples.len());
    let mut ys = Vec::with_capacity(samples.len());
    for (h1, h2) in &samples {
        let (x, y) = rescale_to_limit(*h1, *h2, &emb);
        xs.push(x);
        ys.push(y);
        t.push(vec![(*h1).into(), (*h2).into(), x.into(), y.into(), seed.into(), a.m.into()]);
    }
    let f2 = F2Table::standard()?;
    let ks_x = ks_statistic(&xs, |v| f2.eval(v))?;
    let ks_y = ks_statistic(&ys, |v| f2.eval(v))?;
    let (v1, v2) = emb.effective_offsets()?;
    let meta = serde_json::json!({
        "M": a.m,
        "t1": a.times.t1,
        "t2": a.times.t2,
        "nu1": a.times.nu1,
        "nu2": a.times.nu2,
        "effective_nu1": v1,
        "effective_nu2": v2,
        "n1": fp.n1,
        "n2": fp.n2,
        "mu1": fp.mu1,
        "mu2": fp.mu2,
        "dt": field.dt(),
        "scheme": format!("{scheme:?}"),
        "seed": seed,
        "first_replica": a.first_replica,
        "samples": a.samples,
    });
    let summary = serde_json::json!({
        "samples": a.samples,
        "seconds": seconds,
        "samples_per_second": a.samples as f64 / seconds.max(1e-12),
        "ks_x_f2": ks_x,
        "ks_y_f2": ks_y,
        "dt": field.dt(),
    })
    .to_string();
    Ok((t, meta, summary))
}

/// One verification check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    /// Suite name.
    pub suite: &'static str,
    /// Check name.
    pub check: String,
    /// Measured value.
    pub value: f64,
    /// Pass threshold (`value < threshold`).
    pub threshold: f64,
    /// Outcome.
    pub pass: bool,
}

impl Check {
    fn below(suite: &'static str, check: String, value: f64, threshold: f64) -> Self {
        Self { suite, check, value, threshold, pass: value < threshold }
    }
}

/// Identity suite checks.
pub fn verify_identities(draws: usize, spot_draws: usize, seed: u64) -> CliResult<Vec<Check>> {
    Ok(identity_suite(draws, spot_draws, seed, &KernelEvalConfig::default())?
        .into_iter()
        .map(|r| Check {
            suite: "identities",
            check: format!("{} n={} ({} points)", r.name, r.n, r.points_tested),
            value: r.max_rel_err,
            threshold: r.threshold,
            pass: r.pass,
        })
        .collect())
}

/// Largest Airy-vs-contour deviation per kernel at two parameter sets on
/// `{−2,…,2}²`.
pub fn verify_kernels_dual() -> CliResult<Vec<Check>> {
    let sets = [("zero offsets", derive_params(1.0, 2.0, 0.0, 0.0, 0.0, 0.0)?), ("generic", derive_params(1.0, 3.0, 0.3, -0.2, 0.5, 1.0)?)];
    let names = ["phi1", "psi1", "phi2", "phi3"];
    let grid = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let mut out = Vec::new();
    for (label, p) in sets {
        let points: Vec<(f64, f64)> = grid.iter().flat_map(|x| grid.iter().map(move |y| (*x, *y))).collect();
        let vals = points.par_iter().map(|(x, y)| kernel_values(&p, *x, *y, true)).collect::<CliResult<Vec<_>>>()?;
        for (k, name) in names.iter().enumerate() {
            let dev = vals.iter().map(|(a, c)| (a[k] - c.as_ref().expect("dual")[k]).abs()).fold(0.0, f64::max);
            out.push(Check::below("kernels-dual", format!("{name} {label}"), dev, 1e-6));
        }
    }
    Ok(out)
}

/// Finite-size contour formulas against exhaustive enumeration.
pub fn verify_prelimit() -> CliResult<Vec<Check>> {
    let p = GeomLppParams { q: 0.3, m1: 1, m2: 2, n1: 1, n2: 2 };
    let cfg = JointContourSpec::default();
    let pts: Vec<(i64, i64)> = (0..=4).flat_map(|a| (0..=4).map(move |b| (a, b))).collect();
    let joint = pts
        .par_iter()
        .map(|(a, b)| Ok((joint_cdf_contour(&p, *a, *b, &cfg)? - joint_cdf_enumeration(&p, *a, *b)?).abs()))
        .collect::<CliResult<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let mut vec_dev: f64 = 0.0;
    for x1 in 0..=6i64 {
        for x2 in x1..=6 {
            vec_dev = vec_dev.max((vector_prob(&[x1, x2], 2, 0.3)? - vector_prob_enumeration(&[x1, x2], 2, 0.3)?).abs());
        }
    }
    Ok(vec![
        Check::below("prelimit", "joint CDF (1,1,2,2) v1,v2 in 0..4".into(), joint, 1e-8),
        Check::below("prelimit", "vector probability m=2 n=2".into(), vec_dev, 1e-8),
    ])
}

fn finite_kind(k: KernelName) -> FiniteKernelKind {
    match k {
        KernelName::A01 => FiniteKernelKind::A01,
        KernelName::B1 => FiniteKernelKind::B1,
        KernelName::C2 => FiniteKernelKind::C2,
        KernelName::C3 => FiniteKernelKind::C3,
    }
}

fn kernel_label(k: KernelName) -> &'static str {
    match k {
        KernelName::A01 => "a01",
        KernelName::B1 => "b1",
        KernelName::C2 => "c2",
        KernelName::C3 => "c3",
    }
}

/// Rescaled-kernel errors per kernel and scale.
pub fn convergence_table(a: &ConvergenceArgs) -> CliResult<Vec<(KernelName, f64, f64)>> {
    if a.kernels.is_empty() || a.m.is_empty() {
        return Err(CliError::Usage("need at least one kernel and one M".into()));
    }
    let cfg = KernelEvalConfig::default();
    let jobs: Vec<(KernelName, f64)> = a.kernels.iter().flat_map(|k| a.m.iter().map(move |m| (*k, *m))).collect();
    jobs.par_iter()
        .map(|(k, m)| {
            let emb = embedding(&a.times, *m, a.eta1, a.eta2);
            Ok((*k, *m, rescaled_kernel_error(finite_kind(*k), &emb, a.x, a.y, &cfg)?))
        })
        .collect()
}

/// Convergence checks: the error table, monotone decrease in `M`, and the
/// final-scale bound (0.05 for c2/c3, 0.1 for a01/b1).
pub fn verify_convergence() -> CliResult<Vec<Check>> {
    let args = ConvergenceArgs {
        times: TimeArgs { t1: 1.0, t2: 2.0, nu1: 0.0, nu2: 0.0 },
        eta1: 0.0,
        eta2: 0.0,
        kernels: vec![KernelName::A01, KernelName::B1, KernelName::C2, KernelName::C3],
        m: vec![50.0, 100.0, 200.0, 400.0],
        x: 0.0,
        y: 0.0,
    };
    let table = convergence_table(&args)?;
    let mut out = Vec::new();
    for k in &args.kernels {
        let errs: Vec<(f64, f64)> = table.iter().filter(|r| r.0 == *k).map(|r| (r.1, r.2)).collect();
        let bound = if matches!(k, KernelName::C2 | KernelName::C3) { 0.05 } else { 0.1 };
        for (m, e) in &errs {
            out.push(Check { suite: "convergence", check: format!("{} M={m}", kernel_label(*k)), value: *e, threshold: f64::INFINITY, pass: e.is_finite() });
        }
        let worst = errs.windows(2).map(|w| w[1].1 / w[0].1).fold(0.0, f64::max);
        out.push(Check::below("convergence", format!("{} largest ratio of successive errors", kernel_label(*k)), worst, 1.0));
        let last = errs.last().expect("non-empty").1;
        out.push(Check::below("convergence", format!("{} error at M={}", kernel_label(*k), args.m[3]), last, bound));
    }
    Ok(out)
}

/// Runs a verification suite.
pub fn cmd_verify(a: &VerifyArgs, seed: u64) -> CliResult<Table> {
    let mut checks = Vec::new();
    let all = a.suite == Suite::All;
    if all || a.suite == Suite::Identities {
        let start = Instant::now();
        checks.extend(verify_identities(a.draws, a.spot_draws, seed)?);
        let secs = start.elapsed().as_secs_f64();
        checks.push(Check::below("identities", "runtime seconds".into(), secs, 60.0));
    }
    if all || a.suite == Suite::KernelsDual {
        checks.extend(verify_kernels_dual()?);
    }
    if all || a.suite == Suite::Prelimit {
        checks.extend(verify_prelimit()?);
    }
    if all || a.suite == Suite::Convergence {
        checks.extend(verify_convergence()?);
    }
    let mut t = Table::new(&["suite", "check", "value", "threshold", "pass"]);
    for c in checks {
        t.push(vec![c.suite.into(), c.check.into(), c.value.into(), c.threshold.into(), c.pass.into()]);
    }
    Ok(t)
}

/// Grid comparison of a sample dump or a second `F_tt` grid with an `F_tt` grid.
pub fn cmd_compare(a: &CompareArgs) -> CliResult<Table> {
    let (fc, fr) = read_records(&a.ftt)?;
    let e1 = float_column(&fc, &fr, "eta1_star")?;
    let e2 = float_column(&fc, &fr, "eta2")?;
    let f = float_column(&fc, &fr, "ftt")?;
    let tb = float_column(&fc, &fr, "trunc_bound")?;
    if e1.is_empty() {
        return Err(CliError::Usage("F_tt grid has no rows".into()));
    }
    let (rc, rr) = read_records(&a.reference)?;
    let reference: Vec<(f64, f64, f64)> = if rc.iter().any(|c| c == "x_m") {
        let x = float_column(&rc, &rr, "x_m")?;
        let y = float_column(&rc, &rr, "y_m")?;
        if x.is_empty() {
            return Err(CliError::Usage("sample dump has no samples".into()));
        }
        let pairs: Vec<(f64, f64)> = x.into_iter().zip(y).collect();
        let emp = EmpiricalCdf2D::new(&pairs)?;
        e1.iter().zip(&e2).map(|(a, b)| (emp.eval(*a, *b), emp.std_error(*a, *b), 0.0)).collect()
    } else {
        let r1 = float_column(&rc, &rr, "eta1_star")?;
        let r2 = float_column(&rc, &rr, "eta2")?;
        let rf = float_column(&rc, &rr, "ftt")?;
        let rt = float_column(&rc, &rr, "trunc_bound")?;
        e1.iter()
            .zip(&e2)
            .map(|(a, b)| {
                let i = r1
                    .iter()
                    .zip(&r2)
                    .position(|(c, d)| c == a && d == b)
                    .ok_or_else(|| CliError::Usage(format!("reference grid lacks ({a}, {b})")))?;
                Ok((rf[i], 0.0, rt[i]))
            })
            .collect::<CliResult<_>>()?
    };
    let mut t = Table::new(&["eta1_star", "eta2", "reference", "ftt", "gap", "mc_se", "trunc_bound", "tolerance", "pass"]);
    for i in 0..e1.len() {
        let (r, se, rtb) = reference[i];
        let gap = (r - f[i]).abs();
        let bound = tb[i] + rtb;
        let tol = a.base_tol + 3.0 * (se + bound);
        t.push(vec![e1[i].into(), e2[i].into(), r.into(), f[i].into(), gap.into(), se.into(), bound.into(), tol.into(), (gap <= tol).into()]);
    }
    Ok(t)
}

/// `(kernel, M, error)` rows.
pub fn cmd_convergence(a: &ConvergenceArgs) -> CliResult<Table> {
    let mut t = Table::new(&["kernel", "M", "error"]);
    for (k, m, e) in convergence_table(a)? {
        t.push(vec![kernel_label(k).into(), m.into(), e.into()]);
    }
    Ok(t)
}

/// Renders `table` into a string.
pub fn render(table: &Table, format: Format) -> CliResult<String> {
    let mut buf = Vec::new();
    table.write_to(format, &mut buf)?;
    String::from_utf8(buf).map_err(|e| CliError::Io(e.to_string()))
}
