//! Volume-constrained minimization of `ℱ_γ` over star shapes.
//!
//! The search space is the Fourier coefficient vector `(a_k, b_k)` for
//! `k = 2..K`: mode 1 is pinned to zero (it is the translation null space) and
//! `r₀` is eliminated by the exact area projection
//! `r₀ = √(A/π - ½ Σ (a_k² + b_k²))`, so every visited shape has area exactly
//! `A`. Descent is projected gradient with central finite differences and an
//! Armijo backtracking line search; energies during the search run the slicing
//! evaluator at reduced resolution, full resolution only for the reported
//! values. Every accepted value is re-measured after the recenter/refit
//! projection, so the recorded trace is non-increasing by construction.

use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::kernels::KernelFamily;
use crate::nonlocal::{self, EvalConfig, Method};
use crate::sampling;
use crate::shapes2d::{fit_fourier, ShapeSpec, StarShape2D, Transform};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    /// highest Fourier mode in the search space
    pub k_max: u32,
    /// initial line-search step
    pub step: f64,
    pub max_iters: usize,
    /// stop when `‖∇ℱ‖_∞` drops below this
    pub grad_tol: f64,
    pub area_target: f64,
    /// central finite-difference step
    pub fd_step: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            k_max: 8,
            step: 1.0,
            max_iters: 120,
            grad_tol: 2e-4,
            area_target: PI,
            fd_step: 1e-5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizerReport {
    pub final_shape: ShapeSpec,
    /// `ℱ` after every accepted (projected) step, reduced resolution
    pub trace: Vec<f64>,
    /// `ℱ` of the final shape at full resolution
    pub f_final: f64,
    /// `H¹` distance of the boundary to the unit circle
    pub u_h1: f64,
    /// `max(1 - r_min, r_max - 1)`
    pub delta_hat: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Area-exact shape from the reduced coordinate vector `[a_2, b_2, …]`.
fn shape_from_coords(coords: &[f64], k_max: u32, area: f64) -> Result<StarShape2D> {
    let sumsq: f64 = coords.iter().map(|c| c * c).sum();
    let r0sq = area / PI - 0.5 * sumsq;
    if r0sq <= 0.0 {
        return Err(Error::InvalidShape("area projection ran out of mean radius".into()));
    }
    let modes: Vec<(u32, f64, f64)> = (2..=k_max)
        .map(|k| {
            let i = 2 * (k - 2) as usize;
            (k, coords[i], coords[i + 1])
        })
        .collect();
    StarShape2D::from_fourier([0.0, 0.0], r0sq.sqrt(), &modes)
}

/// Extract search coordinates from a shape (modes 2..K about its center),
/// dropping mode 1 and the constant.
fn coords_from_shape(shape: &StarShape2D, k_max: u32) -> Vec<f64> {
    let mut coords = vec![0.0; 2 * (k_max - 1) as usize];
    for &(k, a, b) in &shape.modes {
        if (2..=k_max).contains(&k) {
            let i = 2 * (k - 2) as usize;
            coords[i] = a;
            coords[i + 1] = b;
        }
    }
    coords
}

/// One full constraint projection: build, recenter about the barycenter,
/// refit, and return the cleaned coordinates.
fn project(coords: &[f64], k_max: u32, area: f64) -> Result<Vec<f64>> {
    let shape = shape_from_coords(coords, k_max, area)?;
    let rec = shape.transform(Transform::Recenter)?;
    // refit about the new center with modes up to K, drop mode 1, rescale
    let n = 1024usize;
    let samples: Vec<f64> = (0..n)
        .map(|j| rec.radius(2.0 * PI * j as f64 / n as f64))
        .collect();
    let refit = fit_fourier(rec.center, &samples, k_max)?;
    let scaled = refit.transform(Transform::ScaleToArea(area))?;
    Ok(coords_from_shape(&scaled, k_max))
}

/// Projected gradient descent on `ℱ_{γ,G_ε}` under `|E| = area_target`.
pub fn minimize(
    init: &StarShape2D,
    fam: &KernelFamily,
    gamma: f64,
    cfg: &OptimizerConfig,
) -> Result<OptimizerReport> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!("gamma must lie in (0,1), got {gamma}")));
    }
    if cfg.k_max < 2 || cfg.step <= 0.0 {
        return Err(Error::Domain("optimizer needs K >= 2 and step > 0".into()));
    }
    let reduced = EvalConfig::reduced();
    let full = EvalConfig { error_estimate: false, ..EvalConfig::default() };
    let k_max = cfg.k_max;
    let area = cfg.area_target;

    let eval = |coords: &[f64]| -> Result<f64> {
        let shape = shape_from_coords(coords, k_max, area)?;
        Ok(nonlocal::energy_with(&shape, fam, gamma, Method::Slicing, &reduced)?.f_gamma)
    };

    // diagonal metric: near the disk the Hessian of ℱ is diagonal in Fourier
    // coordinates with stiffness ≈ (1-γ)π(k²-1); scaling the gradient by it
    // removes the mode-number ill-conditioning
    let precond: Vec<f64> = (0..2 * (k_max - 1) as usize)
        .map(|i| {
            let k = (2 + i / 2) as f64;
            ((1.0 - gamma) * PI * (k * k - 1.0)).max(1.0)
        })
        .collect();

    // initial projection of the input shape onto the constraint manifold
    let init_scaled = init
        .transform(Transform::Recenter)?
        .transform(Transform::ScaleToArea(area))?;
    let mut coords = coords_from_shape(&init_scaled, k_max);
    coords = project(&coords, k_max, area).unwrap_or(coords);
    let mut f_cur = eval(&coords)?;
    let mut trace = vec![f_cur];
    let mut step = cfg.step;
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..cfg.max_iters {
        iterations = it + 1;
        // central finite-difference gradient, components in parallel
        let grads: Vec<f64> = (0..coords.len())
            .into_par_iter()
            .map(|i| {
                let mut plus = coords.clone();
                plus[i] += cfg.fd_step;
                let mut minus = coords.clone();
                minus[i] -= cfg.fd_step;
                match (eval(&plus), eval(&minus)) {
                    (Ok(fp), Ok(fm)) => (fp - fm) / (2.0 * cfg.fd_step),
                    _ => 0.0,
                }
            })
            .collect();
        let gnorm_inf = grads.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let dir: Vec<f64> = grads.iter().zip(&precond).map(|(g, h)| g / h).collect();
        let decrease: f64 = grads.iter().zip(&dir).map(|(g, d)| g * d).sum();
        if std::env::var_os("DROPSHAPE_OPT_DEBUG").is_some() {
            eprintln!("iter {it}: f {f_cur:.10} gnorm {gnorm_inf:.3e} step {step:.3e}");
        }
        if gnorm_inf <= cfg.grad_tol {
            converged = true;
            break;
        }

        // Armijo backtracking on the projected objective
        let mut accepted = false;
        for _ in 0..30 {
            let candidate: Vec<f64> = coords
                .iter()
                .zip(&dir)
                .map(|(c, d)| c - step * d)
                .collect();
            let Ok(projected) = project(&candidate, k_max, area) else {
                step *= 0.5;
                continue;
            };
            match eval(&projected) {
                Ok(f_new) if f_new <= f_cur - 1e-4 * step * decrease => {
                    coords = projected;
                    f_cur = f_new;
                    trace.push(f_cur);
                    step = (step * 1.5).min(2.0);
                    accepted = true;
                    break;
                }
                _ => step *= 0.5,
            }
        }
        if !accepted {
            // line search exhausted: flat to fd noise
            converged = gnorm_inf <= 10.0 * cfg.grad_tol;
            break;
        }
    }

    let shape = shape_from_coords(&coords, k_max, area)?;
    let f_final = nonlocal::energy_with(&shape, fam, gamma, Method::Slicing, &full)?.f_gamma;
    let m = shape.measure();
    let delta_hat = (1.0 - m.r_min).max(m.r_max - 1.0);
    Ok(OptimizerReport {
        final_shape: shape.to_spec(),
        trace,
        f_final,
        u_h1: boundary_h1_distance(&shape),
        delta_hat,
        iterations,
        converged,
    })
}

/// `‖R - 1‖_{H¹(S¹)}` of a shape about its barycenter.
pub fn boundary_h1_distance(shape: &StarShape2D) -> f64 {
    let rec = shape.transform(Transform::Recenter).unwrap_or_else(|_| shape.clone());
    let n = 2048;
    let h = 2.0 * PI / n as f64;
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for j in 0..n {
        let th = h * j as f64;
        let v = rec.radius(th) - 1.0;
        let dv = rec.radius_deriv(th);
        l2 += v * v;
        h1 += dv * dv;
    }
    ((l2 + h1) * h).sqrt()
}

/// One row of the ε-sweep table.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub gamma: f64,
    pub init_id: usize,
    pub iters: usize,
    pub f_final: f64,
    pub f_disk_gap: f64,
    pub u_h1: f64,
    pub delta_hat: f64,
    pub converged: bool,
}

/// Minimize from seeded random perturbed initializations over an ε grid.
/// Rows are sorted by ε then by init id; `f_disk_gap = ℱ(final) - ℱ(B_1)`
/// with both sides from the same full-resolution evaluator.
pub fn sweep(
    base: &KernelFamily,
    gamma: f64,
    eps_grid: &[f64],
    n_inits: usize,
    cfg: &OptimizerConfig,
) -> Result<Vec<SweepRow>> {
    for &e in eps_grid {
        if !(e > 0.0 && e <= 1.0) {
            return Err(Error::Domain(format!("sweep epsilons must lie in (0,1], got {e}")));
        }
    }
    let mut eps_sorted = eps_grid.to_vec();
    eps_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let full = EvalConfig { error_estimate: false, ..EvalConfig::default() };
    let disk = StarShape2D::disk([0.0, 0.0], 1.0);
    let mut rows = Vec::new();
    for &eps in &eps_sorted {
        let fam = KernelFamily::new(base.base.clone(), eps)?;
        let f_disk = nonlocal::energy_with(&disk, &fam, gamma, Method::Slicing, &full)?.f_gamma;
        for init_id in 0..n_inits {
            let mut rng = sampling::rng(cfg.seed.wrapping_add(init_id as u64));
            let init = sampling::nearly_spherical_shape(&mut rng, cfg.k_max, 0.4);
            let rep = minimize(&init, &fam, gamma, cfg)?;
            rows.push(SweepRow {
                eps,
                gamma,
                init_id,
                iters: rep.iterations,
                f_final: rep.f_final,
                f_disk_gap: rep.f_final - f_disk,
                u_h1: rep.u_h1,
                delta_hat: rep.delta_hat,
                converged: rep.converged,
            });
        }
    }
    Ok(rows)
}

/// One row of the convexification experiment.
#[derive(Debug, Clone, Serialize)]
pub struct ConvexifyRow {
    pub id: usize,
    pub was_convex: bool,
    pub critical_shape: f64,
    pub critical_hull: f64,
    /// `ℰ(co E) ≤ ℰ(E)` margin (positive = inequality satisfied strictly)
    pub critical_margin: f64,
    pub f_shape: f64,
    pub f_scaled_hull: f64,
    /// `ℱ(t·co E) < ℱ(E)` margin for nonconvex inputs
    pub f_margin: f64,
    pub passes: bool,
}

/// For each shape: compare the critical energy against its convex hull, and
/// `ℱ` against the hull rescaled back to the target area.
pub fn convexification_experiment(
    shapes: &[StarShape2D],
    fam: &KernelFamily,
    gamma: f64,
) -> Result<Vec<ConvexifyRow>> {
    let mut out = Vec::with_capacity(shapes.len());
    for (id, shape) in shapes.iter().enumerate() {
        let m = shape.measure();
        let rep = nonlocal::energy(shape, fam, gamma)?;
        let hull = shape.convex_hull()?;
        let rep_hull = nonlocal::energy(&hull, fam, gamma)?;
        let scaled = hull.transform(Transform::ScaleToArea(m.area))?;
        let rep_scaled = nonlocal::energy(&scaled, fam, gamma)?;
        let critical_margin = rep.critical - rep_hull.critical;
        let f_margin = rep.f_gamma - rep_scaled.f_gamma;
        let tol = 1e-3 * rep.critical.abs().max(1e-3);
        let passes = if m.is_convex {
            critical_margin.abs() <= 10.0 * tol
        } else {
            critical_margin >= -tol && f_margin > 0.0
        };
        out.push(ConvexifyRow {
            id,
            was_convex: m.is_convex,
            critical_shape: rep.critical,
            critical_hull: rep_hull.critical,
            critical_margin,
            f_shape: rep.f_gamma,
            f_scaled_hull: rep_scaled.f_gamma,
            f_margin,
            passes,
        });
    }
    Ok(out)
}
