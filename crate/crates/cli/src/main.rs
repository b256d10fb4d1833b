//! `dropshape` — command-line driver for the nonlocal isoperimetric lab.
//!
//! Subcommands wire kernels, shapes, the energy evaluators, and the scripted
//! experiments together, reading JSON specifications and emitting JSON or CSV
//! artifacts. Exit codes: 0 success, 1 usage, 2 invalid input, 3 numeric
//! failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use dropshape_core::kernels::{check_hypotheses, KernelFamily, KernelSpec, RadialKernel};
use dropshape_core::nonlocal::{self, EvalConfig, Method};
use dropshape_core::onedim;
use dropshape_core::optimize::{self, OptimizerConfig};
use dropshape_core::sampling;
use dropshape_core::shapes2d::{ShapeSpec, StarShape2D};
use dropshape_core::spectral::{self, FieldSpec, SphericalField};
use dropshape_core::Error;

#[derive(Parser)]
#[command(name = "dropshape", version, about = "Nonlocal perimeters and drop-shape optimization")]
struct Cli {
    /// Worker threads (default: all cores; env DROPSHAPE_THREADS as fallback)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a kernel and report moments and hypothesis checks
    KernelInfo(KernelInfoArgs),
    /// Nonlocal perimeter of a shape by one evaluation method
    Perim(EnergyArgs),
    /// Full energy report (or batch evaluation with --batch)
    Energy(EnergyArgs),
    /// Cross-method agreement on one shape, with optional slice dump
    SliceCheck(SliceCheckArgs),
    /// Stability checks for a nearly spherical perturbation field
    FugledeCheck(FugledeArgs),
    /// Minimize the energy from one initialization
    Optimize(OptimizeArgs),
    /// Optimizer sweep over an ε grid and random initializations
    Sweep(SweepArgs),
    /// Convexification experiment on random nonconvex shapes
    Convexify(ConvexifyArgs),
    /// 1D closed forms against the brute-force oracle
    OnedCheck(OnedArgs),
}

#[derive(Args)]
struct KernelInfoArgs {
    /// kernel spec JSON: {"family": …, "params": {…}, "n": …}
    #[arg(long)]
    kernel: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EnergyArgs {
    #[arg(long)]
    shape: Option<PathBuf>,
    #[arg(long)]
    kernel: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    eps: Option<f64>,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long, default_value = "slicing")]
    method: String,
    /// JSON list of {"shape": …, "kernel": …, "eps": …, "gamma": …, "method": …}
    #[arg(long)]
    batch: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SliceCheckArgs {
    #[arg(long)]
    shape: PathBuf,
    #[arg(long)]
    kernel: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    eps: f64,
    /// write per-(direction, offset) slice energies as CSV
    #[arg(long)]
    dump: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    dump_directions: usize,
    #[arg(long, default_value_t = 64)]
    dump_offsets: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FugledeArgs {
    /// field JSON: {"n": …, "L": …, "coeffs": [[k,i,a], …]}
    #[arg(long)]
    field: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    t: f64,
    #[arg(long)]
    kernel: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    eps: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long)]
    kernel: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    eps: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.5)]
    gamma: f64,
    /// initial shape JSON (default: seeded random perturbation)
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    k_max: u32,
    #[arg(long, default_value_t = 120)]
    max_iters: usize,
    #[arg(long, allow_hyphen_values = true, default_value_t = 2e-4)]
    grad_tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    kernel: PathBuf,
    /// comma-separated ε grid, e.g. 0.05,0.1,0.2
    #[arg(long)]
    eps: String,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long, default_value_t = 5)]
    inits: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ConvexifyArgs {
    #[arg(long)]
    kernel: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    eps: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.5)]
    gamma: f64,
    /// explicit shape files; otherwise `count` random nonconvex shapes
    #[arg(long)]
    shapes: Vec<PathBuf>,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OnedArgs {
    #[arg(long)]
    kernel: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    eps: f64,
    #[arg(long, default_value_t = 50)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // usage problems (unknown subcommand, bad flags) exit 1; clap's
            // own help/version output keeps exit 0
            use clap::error::ErrorKind::*;
            let code = match e.kind() {
                DisplayHelp | DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let threads = cli
        .threads
        .or_else(|| std::env::var("DROPSHAPE_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }

    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Numeric(_) => 3,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::KernelInfo(a) => kernel_info(a),
        Command::Perim(a) => energy_cmd(a, true),
        Command::Energy(a) => energy_cmd(a, false),
        Command::SliceCheck(a) => slice_check(a),
        Command::FugledeCheck(a) => fuglede_check(a),
        Command::Optimize(a) => optimize_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Convexify(a) => convexify_cmd(a),
        Command::OnedCheck(a) => oned_check(a),
    }
}

// ---------------------------------------------------------------------------
// input/output helpers
// ---------------------------------------------------------------------------

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn load_kernel(path: &Path) -> Result<Arc<RadialKernel>, Error> {
    let spec: KernelSpec = read_json(path)?;
    Ok(Arc::new(RadialKernel::build(&spec)?))
}

fn load_shape(path: &Path) -> Result<StarShape2D, Error> {
    let spec: ShapeSpec = read_json(path)?;
    StarShape2D::from_spec(&spec)
}

fn family(base: Arc<RadialKernel>, eps: f64) -> Result<KernelFamily, Error> {
    KernelFamily::new(base, eps)
}

/// Pretty JSON with sorted keys (serde_json objects are ordered maps).
fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), Error> {
    let v = serde_json::to_value(value)?;
    let text = serde_json::to_string_pretty(&v)? + "\n";
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Parse(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// C-style `%.12e` so artifacts are byte-stable across runs.
fn fmt_e(x: f64) -> String {
    let s = format!("{x:.12e}");
    // normalize rust's bare exponent ("1.2e0") to two digits with sign
    if let Some(pos) = s.find('e') {
        let (mant, exp) = s.split_at(pos);
        let exp = &exp[1..];
        let (sign, digits) = match exp.strip_prefix('-') {
            Some(d) => ('-', d),
            None => ('+', exp),
        };
        format!("{mant}e{sign}{digits:0>2}")
    } else {
        s
    }
}

fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<(), Error> {
    let mut text = String::with_capacity(rows.len() * 80 + header.len() + 2);
    text.push_str(header);
    text.push('\n');
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn validate_eps(eps: f64) -> Result<f64, Error> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("epsilon must be positive, got {eps}")));
    }
    Ok(eps)
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

fn kernel_info(a: KernelInfoArgs) -> Result<(), Error> {
    let kernel = load_kernel(&a.kernel)?;
    let report = check_hypotheses(&kernel);
    let payload = json!({
        "family": kernel.family.tag(),
        "n": kernel.n,
        "scale_factor": kernel.scale_factor,
        "raw_first_moment": kernel.raw_first_moment,
        "l1_norm": kernel.l1_norm,
        "first_moment": kernel.moment(1)?,
        "second_moment": kernel.moment(2)?,
        "hypotheses": report,
    });
    emit_json(&payload, a.out.as_deref())?;
    println!(
        "kernel {} (n={}): hypotheses {}",
        kernel.family.tag(),
        kernel.n,
        if serde_json::to_value(check_hypotheses(&kernel))?["all_ok"] == json!(true) {
            "ok"
        } else {
            "FAILED"
        }
    );
    Ok(())
}

#[derive(serde::Deserialize)]
struct BatchEntry {
    shape: PathBuf,
    kernel: PathBuf,
    eps: f64,
    #[serde(default = "default_gamma")]
    gamma: f64,
    #[serde(default = "default_method")]
    method: String,
}

fn default_gamma() -> f64 {
    0.5
}

fn default_method() -> String {
    "slicing".into()
}

fn energy_cmd(a: EnergyArgs, perim_only: bool) -> Result<(), Error> {
    if let Some(batch) = &a.batch {
        let entries: Vec<BatchEntry> = read_json(batch)?;
        let mut reports = Vec::new();
        for e in &entries {
            let kernel = load_kernel(&e.kernel)?;
            let fam = family(kernel, validate_eps(e.eps)?)?;
            let shape = load_shape(&e.shape)?;
            let method: Method = e.method.parse()?;
            reports.push(nonlocal::energy_with(
                &shape,
                &fam,
                e.gamma,
                method,
                &EvalConfig::default(),
            )?);
        }
        emit_json(&reports, a.out.as_deref())?;
        println!("evaluated {} batch entries", reports.len());
        return Ok(());
    }
    let (Some(shape_path), Some(kernel_path), Some(eps)) = (&a.shape, &a.kernel, a.eps) else {
        return Err(Error::Parse("--shape, --kernel and --eps are required (or --batch)".into()));
    };
    let kernel = load_kernel(kernel_path)?;
    let fam = family(kernel, validate_eps(eps)?)?;
    let shape = load_shape(shape_path)?;
    let method: Method = a.method.parse()?;
    let report = nonlocal::energy_with(&shape, &fam, a.gamma, method, &EvalConfig::default())?;
    emit_json(&report, a.out.as_deref())?;
    if perim_only {
        println!(
            "Per_G_eps = {} (P = {}, eps = {})",
            fmt_e(report.per_nonlocal),
            fmt_e(report.per_local),
            fmt_e(report.epsilon)
        );
    } else {
        println!(
            "F_gamma = {} (Per = {}, gamma = {})",
            fmt_e(report.f_gamma),
            fmt_e(report.per_nonlocal),
            fmt_e(report.gamma)
        );
    }
    Ok(())
}

fn slice_check(a: SliceCheckArgs) -> Result<(), Error> {
    let kernel = load_kernel(&a.kernel)?;
    let fam = family(kernel, validate_eps(a.eps)?)?;
    let shape = load_shape(&a.shape)?;
    let cfg = EvalConfig { error_estimate: false, ..EvalConfig::default() };
    let slicing = nonlocal::per_value(&shape, &fam, Method::Slicing, &cfg)?.0;
    let area = nonlocal::per_value(&shape, &fam, Method::Area, &cfg)?.0;
    let polar = nonlocal::per_value(&shape, &fam, Method::Polar, &cfg).map(|v| v.0).ok();
    let mut lo = slicing.min(area);
    let mut hi = slicing.max(area);
    if let Some(p) = polar {
        lo = lo.min(p);
        hi = hi.max(p);
    }
    let spread = (hi - lo) / hi.abs().max(1e-300);
    let payload = json!({
        "per_slicing": slicing,
        "per_area": area,
        "per_polar": polar,
        "relative_spread": spread,
        "per_local": shape.measure().local_perimeter,
    });
    emit_json(&payload, a.out.as_deref())?;

    if let Some(dump) = &a.dump {
        let mut rows = Vec::new();
        for mi in 0..a.dump_directions {
            let phi = std::f64::consts::PI * (mi as f64 + 0.5) / a.dump_directions as f64;
            let sigma = [phi.cos(), phi.sin()];
            for jy in 0..a.dump_offsets {
                let y = -1.5 + 3.0 * (jy as f64 + 0.5) / a.dump_offsets as f64;
                let slice = onedim::slice_star_shape(&shape, sigma, y)?;
                let crit = onedim::crit1_closed_form(&slice.union, &fam)?;
                let per1 = slice.union.perimeter() - crit;
                rows.push(format!(
                    "{},{},{},{},{}",
                    mi,
                    fmt_e(phi),
                    fmt_e(y),
                    fmt_e(per1),
                    fmt_e(crit)
                ));
            }
        }
        write_csv(dump, "direction,phi,offset,per1,crit1", &rows)?;
    }
    println!("method spread {:.3e}", spread);
    Ok(())
}

fn fuglede_check(a: FugledeArgs) -> Result<(), Error> {
    let kernel = load_kernel(&a.kernel)?;
    let fam = family(kernel, validate_eps(a.eps)?)?;
    let spec: FieldSpec = read_json(&a.field)?;
    let field = SphericalField::from_spec(&spec)?;
    let constraints = spectral::constraint_checks(&field, a.t)?;
    let deficits = if field.n == 2 {
        Some(spectral::deficit_checks(a.t, &field, &fam, a.gamma)?)
    } else {
        None
    };
    let (psi, direct) = spectral::psi_constant_identity(a.t.max(1e-3), 1.0, &fam)?;
    let payload = json!({
        "constraints": constraints,
        "deficits": deficits,
        "psi_constant_identity": {
            "psi": psi,
            "disk_direct": direct,
            "relative_gap": (psi - direct).abs() / direct.abs().max(1e-300),
        },
    });
    emit_json(&payload, a.out.as_deref())?;
    println!("fuglede checks done (t = {})", fmt_e(a.t));
    Ok(())
}

fn optimize_cmd(a: OptimizeArgs) -> Result<(), Error> {
    let kernel = load_kernel(&a.kernel)?;
    let fam = family(kernel, validate_eps(a.eps)?)?;
    let cfg = OptimizerConfig {
        k_max: a.k_max,
        max_iters: a.max_iters,
        grad_tol: a.grad_tol,
        seed: a.seed,
        ..OptimizerConfig::default()
    };
    let init = match &a.init {
        Some(p) => load_shape(p)?,
        None => {
            let mut rng = sampling::rng(a.seed);
            sampling::nearly_spherical_shape(&mut rng, cfg.k_max, 0.4)
        }
    };
    let report = optimize::minimize(&init, &fam, a.gamma, &cfg)?;
    emit_json(&report, a.out.as_deref())?;
    println!(
        "converged={} iters={} f_final={} u_h1={}",
        report.converged,
        report.iterations,
        fmt_e(report.f_final),
        fmt_e(report.u_h1)
    );
    Ok(())
}

fn sweep_cmd(a: SweepArgs) -> Result<(), Error> {
    let kernel = load_kernel(&a.kernel)?;
    let eps_grid: Vec<f64> = a
        .eps
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad epsilon '{s}' in --eps")))
        })
        .collect::<Result<_, _>>()?;
    for &e in &eps_grid {
        validate_eps(e)?;
    }
    let fam = family(kernel, eps_grid[0])?;
    let cfg = OptimizerConfig { seed: a.seed, ..OptimizerConfig::default() };
    let rows = optimize::sweep(&fam, a.gamma, &eps_grid, a.inits, &cfg)?;
    let csv_rows: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{},{},{}",
                fmt_e(r.eps),
                fmt_e(r.gamma),
                r.init_id,
                r.iters,
                fmt_e(r.f_final),
                fmt_e(r.f_disk_gap),
                fmt_e(r.u_h1),
                fmt_e(r.delta_hat),
                r.converged
            )
        })
        .collect();
    write_csv(
        &a.out,
        "eps,gamma,init_id,iters,f_final,f_disk_gap,u_h1,delta_hat,converged",
        &csv_rows,
    )?;
    println!("wrote {} sweep rows to {}", rows.len(), a.out.display());
    Ok(())
}

fn convexify_cmd(a: ConvexifyArgs) -> Result<(), Error> {
    let kernel = load_kernel(&a.kernel)?;
    let fam = family(kernel, validate_eps(a.eps)?)?;
    let shapes: Vec<StarShape2D> = if a.shapes.is_empty() {
        let mut rng = sampling::rng(a.seed);
        (0..a.count).map(|_| sampling::nonconvex_shape(&mut rng)).collect()
    } else {
        a.shapes.iter().map(|p| load_shape(p)).collect::<Result<_, _>>()?
    };
    let rows = optimize::convexification_experiment(&shapes, &fam, a.gamma)?;
    let passes = rows.iter().filter(|r| r.passes).count();
    match &a.out {
        Some(p) if p.extension().is_some_and(|e| e == "csv") => {
            let csv_rows: Vec<String> = rows
                .iter()
                .map(|r| {
                    format!(
                        "{},{},{},{},{},{},{},{},{}",
                        r.id,
                        r.was_convex,
                        fmt_e(r.critical_shape),
                        fmt_e(r.critical_hull),
                        fmt_e(r.critical_margin),
                        fmt_e(r.f_shape),
                        fmt_e(r.f_scaled_hull),
                        fmt_e(r.f_margin),
                        r.passes
                    )
                })
                .collect();
            write_csv(
                p,
                "id,was_convex,critical_shape,critical_hull,critical_margin,f_shape,f_scaled_hull,f_margin,passes",
                &csv_rows,
            )?;
        }
        other => emit_json(&rows, other.as_deref())?,
    }
    println!("{passes}/{} shapes pass the convexification checks", rows.len());
    Ok(())
}

fn oned_check(a: OnedArgs) -> Result<(), Error> {
    let kernel = load_kernel(&a.kernel)?;
    let fam = family(kernel, validate_eps(a.eps)?)?;
    let mut rng = sampling::rng(a.seed);
    let mut max_err = 0.0f64;
    let mut cases = Vec::new();
    for id in 0..a.count {
        let union = sampling::interval_union(&mut rng, 4);
        let closed = onedim::crit1_closed_form(&union, &fam)?;
        let brute = union.perimeter() - onedim::per1_bruteforce(&union, &fam)?;
        let err = (closed - brute).abs();
        max_err = max_err.max(err);
        cases.push(json!({
            "id": id,
            "intervals": union.intervals(),
            "crit1_closed": closed,
            "crit1_bruteforce": brute,
            "abs_error": err,
        }));
    }
    let payload = json!({ "count": a.count, "max_abs_error": max_err, "cases": cases });
    emit_json(&payload, a.out.as_deref())?;
    println!("max |closed - bruteforce| = {}", fmt_e(max_err));
    Ok(())
}
