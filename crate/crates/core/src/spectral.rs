//! Spherical-harmonic machinery for the stability analysis.
//!
//! Fields live in coefficient space over an orthonormal basis: Fourier modes
//! on `S¹` (n = 2) and real spherical harmonics on `S²` (n = 3). The
//! Laplace–Beltrami eigenvalue of degree `k` is `l_k = k(k+n-2)`, so
//!
//! ```text
//! ‖u‖²_{L²} = Σ (a_k^i)²,    ‖∇_τ u‖²_{L²} = Σ l_k (a_k^i)².
//! ```
//!
//! The module provides the `expand`/`synthesize` pair, the nonlocal quadratic
//! form `Q_ε(u) = ∬ (u(x)-u(y))²/|x-y|² η_ε(|x-y|)` whose ratio to the `H¹`
//! seminorm measures the kernel-form convergence, the constraint identities of
//! volume-preserving centered perturbations, and the deficit comparisons
//! (local isoperimetric bracket, the exact `t²φ_ε + ψ_ε` decomposition, and
//! the stability lower bound for `ℱ_γ`).

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::kernels::KernelFamily;
use crate::nonlocal::{self, EvalConfig, Method};
use crate::shapes2d::StarShape2D;
use crate::{ball_volume, quad, Error, Result};

/// Field file layout: `{"n":…, "L":…, "coeffs":[[k,i,a],…]}` with `i` 1-based.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldSpec {
    pub n: u32,
    #[serde(rename = "L")]
    pub l_max: u32,
    pub coeffs: Vec<(u32, u32, f64)>,
}

/// Coefficient table over an orthonormal harmonic basis.
#[derive(Debug, Clone)]
pub struct SphericalField {
    pub n: u32,
    pub l_max: u32,
    coeffs: Vec<f64>,
}

/// Multiplicity of degree `k`: `d(0) = 1`, `d(1) = n`; on `S¹` it is 2 for
/// every `k ≥ 1`, on `S²` it is `2k+1`.
pub fn multiplicity(n: u32, k: u32) -> u32 {
    match n {
        2 => {
            if k == 0 {
                1
            } else {
                2
            }
        }
        3 => 2 * k + 1,
        _ => unreachable!("fields exist for n in {{2,3}}"),
    }
}

/// Laplace–Beltrami eigenvalue `l_k = k(k+n-2)`.
pub fn eigenvalue(n: u32, k: u32) -> f64 {
    (k * (k + n - 2)) as f64
}

impl SphericalField {
    pub fn zero(n: u32, l_max: u32) -> Result<SphericalField> {
        if n != 2 && n != 3 {
            return Err(Error::Domain(format!("fields exist for n in {{2,3}}, got {n}")));
        }
        let len: u32 = (0..=l_max).map(|k| multiplicity(n, k)).sum();
        Ok(SphericalField { n, l_max, coeffs: vec![0.0; len as usize] })
    }

    fn offset(&self, k: u32) -> usize {
        match self.n {
            2 => {
                if k == 0 {
                    0
                } else {
                    (2 * k - 1) as usize
                }
            }
            _ => (k * k) as usize,
        }
    }

    /// Coefficient `a_k^i`, `i` 1-based, `i ≤ d(k)`.
    pub fn coeff(&self, k: u32, i: u32) -> f64 {
        assert!(k <= self.l_max && i >= 1 && i <= multiplicity(self.n, k));
        self.coeffs[self.offset(k) + (i - 1) as usize]
    }

    pub fn set_coeff(&mut self, k: u32, i: u32, a: f64) {
        assert!(k <= self.l_max && i >= 1 && i <= multiplicity(self.n, k));
        let o = self.offset(k) + (i - 1) as usize;
        self.coeffs[o] = a;
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|a| a * a).sum()
    }

    pub fn h1_seminorm_sq(&self) -> f64 {
        let mut s = 0.0;
        for k in 0..=self.l_max {
            let lk = eigenvalue(self.n, k);
            for i in 1..=multiplicity(self.n, k) {
                let a = self.coeff(k, i);
                s += lk * a * a;
            }
        }
        s
    }

    /// Zero the degree-0 and degree-1 coefficients (the modes excluded by the
    /// volume and barycenter constraints).
    pub fn zero_low_modes(&mut self) {
        for k in 0..=self.l_max.min(1) {
            for i in 1..=multiplicity(self.n, k) {
                self.set_coeff(k, i, 0.0);
            }
        }
    }

    pub fn from_spec(spec: &FieldSpec) -> Result<SphericalField> {
        let mut f = SphericalField::zero(spec.n, spec.l_max)?;
        for &(k, i, a) in &spec.coeffs {
            if k > spec.l_max || i == 0 || i > multiplicity(spec.n, k) {
                return Err(Error::Parse(format!("coefficient index ({k},{i}) out of range")));
            }
            f.set_coeff(k, i, a);
        }
        Ok(f)
    }

    pub fn to_spec(&self) -> FieldSpec {
        let mut coeffs = Vec::new();
        for k in 0..=self.l_max {
            for i in 1..=multiplicity(self.n, k) {
                let a = self.coeff(k, i);
                if a != 0.0 {
                    coeffs.push((k, i, a));
                }
            }
        }
        FieldSpec { n: self.n, l_max: self.l_max, coeffs }
    }

    /// Evaluate the field at an angle on the circle (n = 2).
    pub fn eval_circle(&self, theta: f64) -> f64 {
        let mut u = self.coeff(0, 1) / (2.0 * PI).sqrt();
        let inv = 1.0 / PI.sqrt();
        for k in 1..=self.l_max {
            let (s, c) = (k as f64 * theta).sin_cos();
            u += (self.coeff(k, 1) * c + self.coeff(k, 2) * s) * inv;
        }
        u
    }

    /// Tangential derivative on the circle (n = 2).
    pub fn eval_circle_deriv(&self, theta: f64) -> f64 {
        let inv = 1.0 / PI.sqrt();
        let mut d = 0.0;
        for k in 1..=self.l_max {
            let kf = k as f64;
            let (s, c) = (kf * theta).sin_cos();
            d += kf * (-self.coeff(k, 1) * s + self.coeff(k, 2) * c) * inv;
        }
        d
    }
}

// ---------------------------------------------------------------------------
// expand / synthesize
// ---------------------------------------------------------------------------

/// Quadrature grid on `S²` resolving degree `L`: Gauss–Legendre in `μ = cos φ`
/// times a uniform azimuth grid; row-major `[i_mu * n_theta + i_theta]`.
pub struct SphereGrid {
    pub mu: Vec<f64>,
    pub w_mu: Vec<f64>,
    pub n_theta: usize,
}

impl SphereGrid {
    pub fn for_degree(l_max: u32) -> SphereGrid {
        let (mu, w_mu) = quad::gauss_legendre((2 * l_max + 2) as usize);
        SphereGrid { mu, w_mu, n_theta: (4 * l_max + 4) as usize }
    }

    pub fn len(&self) -> usize {
        self.mu.len() * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn theta(&self, it: usize) -> f64 {
        2.0 * PI * it as f64 / self.n_theta as f64
    }
}

/// Associated Legendre `P_k^m(μ)` without the Condon–Shortley phase.
fn legendre_assoc(k: u32, m: u32, mu: f64) -> f64 {
    let s = (1.0 - mu * mu).max(0.0).sqrt();
    let mut pmm = 1.0;
    for j in 1..=m {
        pmm *= (2 * j - 1) as f64 * s;
    }
    if k == m {
        return pmm;
    }
    let mut p_prev = pmm;
    let mut p = mu * (2 * m + 1) as f64 * pmm;
    if k == m + 1 {
        return p;
    }
    for l in m + 2..=k {
        let lf = l as f64;
        let mf = m as f64;
        let next = ((2.0 * lf - 1.0) * mu * p - (lf + mf - 1.0) * p_prev) / (lf - mf);
        p_prev = p;
        p = next;
    }
    p
}

/// Real orthonormal spherical harmonic of degree `k`, index `i` (1-based):
/// `i = 1..k` are the `sin` harmonics, `i = k+1` is zonal, the rest `cos`.
pub fn real_harmonic_s2(k: u32, i: u32, mu: f64, theta: f64) -> f64 {
    let kk = k as i64;
    let m = (i as i64) - kk - 1; // m in [-k, k]
    let ma = m.unsigned_abs() as u32;
    let mut ratio = 1.0; // (k-|m|)!/(k+|m|)!
    for j in (k - ma + 1)..=(k + ma) {
        ratio /= j as f64;
    }
    let norm = ((2 * k + 1) as f64 / (4.0 * PI) * ratio).sqrt();
    let p = legendre_assoc(k, ma, mu);
    if m == 0 {
        norm * p
    } else if m > 0 {
        2.0f64.sqrt() * norm * p * (ma as f64 * theta).cos()
    } else {
        2.0f64.sqrt() * norm * p * (ma as f64 * theta).sin()
    }
}

/// Project grid samples onto the harmonic basis up to degree `l_max`.
///
/// For n = 2, `samples` is a uniform grid on `[0, 2π)` with at least `8·L`
/// points; for n = 3 the row-major [`SphereGrid::for_degree`] layout.
pub fn expand(n: u32, samples: &[f64], l_max: u32) -> Result<SphericalField> {
    match n {
        2 => {
            let npts = samples.len();
            if npts < (8 * l_max.max(1)) as usize {
                return Err(Error::Precondition(format!(
                    "grid of {npts} points cannot resolve degree {l_max} (aliasing)"
                )));
            }
            let mut f = SphericalField::zero(2, l_max)?;
            let h = 2.0 * PI / npts as f64;
            let mut a0 = 0.0;
            for &s in samples {
                a0 += s;
            }
            f.set_coeff(0, 1, a0 * h / (2.0 * PI).sqrt());
            for k in 1..=l_max {
                let mut ac = 0.0;
                let mut as_ = 0.0;
                for (j, &s) in samples.iter().enumerate() {
                    let (sn, cs) = (k as f64 * 2.0 * PI * j as f64 / npts as f64).sin_cos();
                    ac += s * cs;
                    as_ += s * sn;
                }
                f.set_coeff(k, 1, ac * h / PI.sqrt());
                f.set_coeff(k, 2, as_ * h / PI.sqrt());
            }
            Ok(f)
        }
        3 => {
            let grid = SphereGrid::for_degree(l_max);
            if samples.len() != grid.len() {
                return Err(Error::Precondition(format!(
                    "expected {} grid samples for degree {l_max}, got {}",
                    grid.len(),
                    samples.len()
                )));
            }
            let mut f = SphericalField::zero(3, l_max)?;
            let w_th = 2.0 * PI / grid.n_theta as f64;
            for k in 0..=l_max {
                for i in 1..=multiplicity(3, k) {
                    let mut a = 0.0;
                    for (imu, (&mu, &wmu)) in grid.mu.iter().zip(&grid.w_mu).enumerate() {
                        for it in 0..grid.n_theta {
                            let y = real_harmonic_s2(k, i, mu, grid.theta(it));
                            a += samples[imu * grid.n_theta + it] * y * wmu * w_th;
                        }
                    }
                    f.set_coeff(k, i, a);
                }
            }
            Ok(f)
        }
        _ => Err(Error::Domain(format!("expand supports n in {{2,3}}, got {n}"))),
    }
}

/// Evaluate a field back on its standard grid (`npts_circle` is used for
/// n = 2 only; the sphere grid is determined by the degree).
pub fn synthesize(field: &SphericalField, npts_circle: usize) -> Vec<f64> {
    match field.n {
        2 => (0..npts_circle)
            .map(|j| field.eval_circle(2.0 * PI * j as f64 / npts_circle as f64))
            .collect(),
        _ => {
            let grid = SphereGrid::for_degree(field.l_max);
            let mut out = vec![0.0; grid.len()];
            for (imu, &mu) in grid.mu.iter().enumerate() {
                for it in 0..grid.n_theta {
                    let mut v = 0.0;
                    for k in 0..=field.l_max {
                        for i in 1..=multiplicity(3, k) {
                            let a = field.coeff(k, i);
                            if a != 0.0 {
                                v += a * real_harmonic_s2(k, i, mu, grid.theta(it));
                            }
                        }
                    }
                    out[imu * grid.n_theta + it] = v;
                }
            }
            out
        }
    }
}

// ---------------------------------------------------------------------------
// nonlocal quadratic form
// ---------------------------------------------------------------------------

/// Report of the nonlocal form against the `H¹` seminorm.
#[derive(Debug, Clone, Serialize)]
pub struct QuadraticFormReport {
    pub q_value: f64,
    pub h1_seminorm: f64,
    pub ratio: f64,
    /// measured `ratio - 1`, the empirical `q_η(ε)`
    pub q_eta_hat: f64,
}

/// `Q_ε(u) = ∬_{S¹×S¹} (u(x)-u(y))²/|x-y|² η_ε(|x-y|)`, trapezoid on a
/// 1024² periodic grid; the difference quotient is bounded for Lipschitz `u`
/// and extends by `|∇_τ u|²` on the diagonal (where `η_ε(0⁺) = 0`).
pub fn nonlocal_form_q(field: &SphericalField, fam: &KernelFamily) -> Result<QuadraticFormReport> {
    nonlocal_form_q_with_grid(field, fam, 1024)
}

/// Same form on a caller-chosen grid. The default resolves every analytic
/// kernel spectrally; profiles with algebraic kinks (truncated Riesz) need
/// the grid to grow like `1/ε` once the kernel support shrinks below ~50
/// grid spacings.
pub fn nonlocal_form_q_with_grid(
    field: &SphericalField,
    fam: &KernelFamily,
    n: usize,
) -> Result<QuadraticFormReport> {
    if field.n != 2 {
        return Err(Error::Precondition("the quadrature-backed form is n = 2 only".into()));
    }
    let n = n.max(64);
    let h = 2.0 * PI / n as f64;
    let u: Vec<f64> = (0..n).map(|i| field.eval_circle(h * i as f64)).collect();

    let mut max_quot: f64 = 0.0;
    // the chord depends only on the angular offset: accumulate per offset
    let mut total = 0.0;
    for dj in 1..n {
        let chord = 2.0 * (0.5 * h * dj as f64).sin().abs();
        let eta = fam.eta_eps_fast(chord);
        if eta == 0.0 {
            continue;
        }
        let mut sum_sq = 0.0;
        for i in 0..n {
            let d = u[(i + dj) % n] - u[i];
            sum_sq += d * d;
        }
        let quot = sum_sq / (chord * chord);
        max_quot = max_quot.max(quot / n as f64);
        total += quot * eta;
    }
    if max_quot > 1e6 {
        return Err(Error::Numeric(format!(
            "difference quotient reached {max_quot:.3e}; samples are not Lipschitz"
        )));
    }
    let q_value = total * h * h;
    let h1 = field.h1_seminorm_sq();
    let ratio = if h1 > 0.0 { q_value / h1 } else { 0.0 };
    Ok(QuadraticFormReport { q_value, h1_seminorm: h1, ratio, q_eta_hat: ratio - 1.0 })
}

// ---------------------------------------------------------------------------
// constraint identities
// ---------------------------------------------------------------------------

/// Volume and barycenter norm of the radial-graph set `R = 1 + t·u` from
/// sphere-grid quadrature (n = 2 or 3).
fn graph_volume_barycenter(field: &SphericalField, t: f64) -> (f64, f64) {
    match field.n {
        2 => {
            let m = 4096usize;
            let h = 2.0 * PI / m as f64;
            let mut vol = 0.0;
            let (mut bx, mut by) = (0.0, 0.0);
            for j in 0..m {
                let th = h * j as f64;
                let r = 1.0 + t * field.eval_circle(th);
                vol += r * r / 2.0;
                let r3 = r * r * r / 3.0;
                bx += r3 * th.cos();
                by += r3 * th.sin();
            }
            (vol * h, (bx * h).hypot(by * h))
        }
        _ => {
            let grid = SphereGrid::for_degree(field.l_max + 2);
            let w_th = 2.0 * PI / grid.n_theta as f64;
            let mut vol = 0.0;
            let mut b = [0.0f64; 3];
            for (imu, (&mu, &wmu)) in grid.mu.iter().zip(&grid.w_mu).enumerate() {
                let s = (1.0 - mu * mu).max(0.0).sqrt();
                for it in 0..grid.n_theta {
                    let th = grid.theta(it);
                    let mut uval = 0.0;
                    for k in 0..=field.l_max {
                        for i in 1..=multiplicity(3, k) {
                            let a = field.coeff(k, i);
                            if a != 0.0 {
                                uval += a * real_harmonic_s2(k, i, mu, th);
                            }
                        }
                    }
                    let r = 1.0 + t * uval;
                    let w = wmu * w_th;
                    vol += r.powi(3) / 3.0 * w;
                    let r4 = r.powi(4) / 4.0 * w;
                    b[0] += r4 * s * th.cos();
                    b[1] += r4 * s * th.sin();
                    b[2] += r4 * mu;
                }
                let _ = imu;
            }
            (vol, (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt())
        }
    }
}

/// Constraint identities for a centered volume-preserving perturbation.
#[derive(Debug, Clone, Serialize)]
pub struct ConstraintReport {
    /// `| |E_t| - |B_1| |` of the induced shape
    pub volume_residual: f64,
    /// `|∫_{E_t} x dx|`
    pub barycenter_residual: f64,
    /// both constraints hold to tolerance; the first-variation identity only
    /// applies in that case
    pub applicable: bool,
    /// `|t∫u + (n-1)(t²/2)∫u²|`
    pub identity_residual: f64,
    /// `t³ ∫|u|³`
    pub identity_bound: f64,
    /// measured constant `Ĉ = residual / bound`
    pub c_hat: f64,
    /// `½‖∇u‖² - (n-1)‖u‖² - ½‖u‖²`, from coefficients
    pub spectral_gap: f64,
    pub gap_nonnegative: bool,
}

pub fn constraint_checks(field: &SphericalField, t: f64) -> Result<ConstraintReport> {
    if !(t >= 0.0 && t < 0.5) {
        return Err(Error::Precondition(format!("t must lie in [0, 1/2), got {t}")));
    }
    let n = field.n;
    let (vol, bary) = graph_volume_barycenter(field, t);
    let volume_residual = (vol - ball_volume(n)).abs();
    let applicable = volume_residual <= 1e-7 && bary <= 1e-7;

    // grid moments of u
    let (int_u, int_u2, int_u3) = match n {
        2 => {
            let m = 4096usize;
            let h = 2.0 * PI / m as f64;
            let mut s1 = 0.0;
            let mut s2 = 0.0;
            let mut s3 = 0.0;
            for j in 0..m {
                let u = field.eval_circle(h * j as f64);
                s1 += u;
                s2 += u * u;
                s3 += u.abs().powi(3);
            }
            (s1 * h, s2 * h, s3 * h)
        }
        _ => {
            let grid = SphereGrid::for_degree(field.l_max + 2);
            let w_th = 2.0 * PI / grid.n_theta as f64;
            let mut s1 = 0.0;
            let mut s2 = 0.0;
            let mut s3 = 0.0;
            for (&mu, &wmu) in grid.mu.iter().zip(&grid.w_mu) {
                for it in 0..grid.n_theta {
                    let mut u = 0.0;
                    for k in 0..=field.l_max {
                        for i in 1..=multiplicity(3, k) {
                            let a = field.coeff(k, i);
                            if a != 0.0 {
                                u += a * real_harmonic_s2(k, i, mu, grid.theta(it));
                            }
                        }
                    }
                    let w = wmu * w_th;
                    s1 += u * w;
                    s2 += u * u * w;
                    s3 += u.abs().powi(3) * w;
                }
            }
            (s1, s2, s3)
        }
    };
    let identity_residual = (t * int_u + (n - 1) as f64 * 0.5 * t * t * int_u2).abs();
    let identity_bound = t.powi(3) * int_u3;
    let c_hat = if identity_bound > 0.0 { identity_residual / identity_bound } else { 0.0 };

    let l2 = field.l2_norm_sq();
    let h1 = field.h1_seminorm_sq();
    let gap = 0.5 * h1 - (n - 1) as f64 * l2 - 0.5 * l2;
    Ok(ConstraintReport {
        volume_residual,
        barycenter_residual: bary,
        applicable,
        identity_residual,
        identity_bound,
        c_hat,
        spectral_gap: gap,
        gap_nonnegative: gap >= -1e-12,
    })
}

// ---------------------------------------------------------------------------
// deficit checks
// ---------------------------------------------------------------------------

/// Stability comparisons for a centered nearly spherical set `E_t` (n = 2).
#[derive(Debug, Clone, Serialize)]
pub struct DeficitReport {
    pub t: f64,
    /// `P(E_t) - P(B_1)` and its Fuglede-type bracket
    pub local_deficit: f64,
    pub local_lower: f64,
    pub local_upper: f64,
    pub local_bracket_ok: bool,
    /// slicing perimeter against the exact `t²φ_ε + ψ_ε` decomposition
    pub per_slicing: f64,
    pub per_polar: f64,
    pub polar_residual_rel: f64,
    /// `ℱ_γ(E_t) - ℱ_γ(B_1)` against `(t²/16)(1-γ)(‖∇u‖² + ‖u‖²)`
    pub f_deficit: f64,
    pub stability_lower: f64,
    pub stability_ok: bool,
}

/// Build the star shape `R(θ) = 1 + t·u(θ)` from a circle field (exact,
/// the field is a trigonometric polynomial).
pub fn induced_shape(field: &SphericalField, t: f64) -> Result<StarShape2D> {
    if field.n != 2 {
        return Err(Error::Precondition("induced shapes are built on S¹".into()));
    }
    let r0 = 1.0 + t * field.coeff(0, 1) / (2.0 * PI).sqrt();
    let inv = 1.0 / PI.sqrt();
    let modes: Vec<(u32, f64, f64)> = (1..=field.l_max)
        .map(|k| (k, t * field.coeff(k, 1) * inv, t * field.coeff(k, 2) * inv))
        .collect();
    StarShape2D::from_fourier([0.0, 0.0], r0, &modes)
}

/// Extract `(t, u)` from a shape about its center: `t = ‖R-1‖_∞`,
/// `u = (R-1)/t` expanded to degree `l_max`.
pub fn extract_field(shape: &StarShape2D, l_max: u32) -> Result<(f64, SphericalField)> {
    let npts = (8 * l_max.max(1) as usize).max(1024);
    let mut samples = vec![0.0; npts];
    let mut t = 0.0f64;
    for (j, s) in samples.iter_mut().enumerate() {
        *s = shape.radius(2.0 * PI * j as f64 / npts as f64) - 1.0;
        t = t.max(s.abs());
    }
    if t == 0.0 {
        return Ok((0.0, SphericalField::zero(2, l_max)?));
    }
    for s in &mut samples {
        *s /= t;
    }
    Ok((t, expand(2, &samples, l_max)?))
}

pub fn deficit_checks(
    t: f64,
    field: &SphericalField,
    fam: &KernelFamily,
    gamma: f64,
) -> Result<DeficitReport> {
    if !(t > 0.0 && t < 0.5) {
        return Err(Error::Precondition(format!("t must lie in (0, 1/2), got {t}")));
    }
    if field.n != 2 {
        return Err(Error::Precondition("deficit checks are quadrature-backed for n = 2".into()));
    }
    let shape = induced_shape(field, t)?;
    let l2 = field.l2_norm_sq();
    let h1 = field.h1_seminorm_sq();

    let m = shape.measure();
    let p_disk = 2.0 * PI;
    let local_deficit = m.local_perimeter - p_disk;
    let local_lower = t * t / 10.0 * (l2 + h1);
    let local_upper = 3.0 * t * t / 5.0 * h1;

    let cfg = EvalConfig { error_estimate: false, ..EvalConfig::default() };
    let per_slicing = nonlocal::per_value(&shape, fam, Method::Slicing, &cfg)?.0;
    let per_polar = nonlocal::per_value(&shape, fam, Method::Polar, &cfg)?.0;
    let polar_residual_rel = (per_slicing - per_polar).abs() / per_slicing.abs().max(1e-12);

    let disk = StarShape2D::disk([0.0, 0.0], 1.0);
    let per_disk = nonlocal::per_value(&disk, fam, Method::Slicing, &cfg)?.0;
    let f_shape = m.local_perimeter - gamma * per_slicing;
    let f_disk = p_disk - gamma * per_disk;
    let f_deficit = f_shape - f_disk;
    let stability_lower = t * t / 16.0 * (1.0 - gamma) * (h1 + l2);

    Ok(DeficitReport {
        t,
        local_deficit,
        local_lower,
        local_upper,
        local_bracket_ok: local_lower <= local_deficit && local_deficit <= local_upper,
        per_slicing,
        per_polar,
        polar_residual_rel,
        f_deficit,
        stability_lower,
        stability_ok: f_deficit >= stability_lower,
    })
}

/// The constant-perturbation identity: `ψ_ε(t)` at `u ≡ c` must equal the
/// nonlocal perimeter of the disk `B_{1+tc}`. Returns `(ψ, direct)`.
pub fn psi_constant_identity(t: f64, c: f64, fam: &KernelFamily) -> Result<(f64, f64)> {
    let grid = vec![c; 512];
    let psi = nonlocal::polar_psi(&grid, t, fam)?;
    let direct = nonlocal::disk_per_slicing(1.0 + t * c, fam)?;
    Ok((psi, direct))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::RadialKernel;
    use std::sync::Arc;

    fn exp_fam(eps: f64) -> KernelFamily {
        KernelFamily::new(Arc::new(RadialKernel::exponential(2)), eps).unwrap()
    }

    fn cos_k_field(k: u32, l_max: u32) -> SphericalField {
        // u = cos(kθ) = √π · Y_k^1
        let mut f = SphericalField::zero(2, l_max).unwrap();
        f.set_coeff(k, 1, PI.sqrt());
        f
    }

    #[test]
    fn circle_expand_basis_function() {
        let n = 256;
        let samples: Vec<f64> = (0..n)
            .map(|j| (3.0 * 2.0 * PI * j as f64 / n as f64).cos())
            .collect();
        let f = expand(2, &samples, 8).unwrap();
        for k in 0..=8u32 {
            for i in 1..=multiplicity(2, k) {
                let a = f.coeff(k, i);
                if k == 3 && i == 1 {
                    assert!((a - PI.sqrt()).abs() < 1e-12, "a_3 = {a}");
                } else {
                    assert!(a.abs() < 1e-12, "leak at ({k},{i}): {a}");
                }
            }
        }
        assert!(expand(2, &samples[..16], 8).is_err(), "aliasing guard");
    }

    #[test]
    fn circle_roundtrip_degree_8() {
        let mut f = SphericalField::zero(2, 8).unwrap();
        let mut x = 11u64;
        let mut nextf = move || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((x >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        for k in 0..=8u32 {
            for i in 1..=multiplicity(2, k) {
                f.set_coeff(k, i, nextf());
            }
        }
        let samples = synthesize(&f, 128);
        let g = expand(2, &samples, 8).unwrap();
        for k in 0..=8u32 {
            for i in 1..=multiplicity(2, k) {
                assert!((f.coeff(k, i) - g.coeff(k, i)).abs() < 1e-10);
            }
        }
        // Parseval on the grid
        let h = 2.0 * PI / samples.len() as f64;
        let grid_norm: f64 = samples.iter().map(|u| u * u * h).sum();
        assert!((grid_norm - f.l2_norm_sq()).abs() < 1e-8);
    }

    #[test]
    fn sphere_expand_coordinate_function() {
        // u = x₁ on S² is degree 1 with coefficient √|B₁| = √(4π/3)
        let grid = SphereGrid::for_degree(4);
        let mut samples = vec![0.0; grid.len()];
        for (imu, &mu) in grid.mu.iter().enumerate() {
            let s = (1.0 - mu * mu).sqrt();
            for it in 0..grid.n_theta {
                samples[imu * grid.n_theta + it] = s * grid.theta(it).cos();
            }
        }
        let f = expand(3, &samples, 4).unwrap();
        let expect = (4.0 * PI / 3.0f64).sqrt();
        let mut found = 0;
        for k in 0..=4u32 {
            for i in 1..=multiplicity(3, k) {
                let a = f.coeff(k, i);
                if a.abs() > 1e-9 {
                    assert_eq!(k, 1, "leak at degree {k}: {a}");
                    assert!((a.abs() - expect).abs() < 1e-10, "{a} vs {expect}");
                    found += 1;
                }
            }
        }
        assert_eq!(found, 1);
    }

    #[test]
    fn sphere_roundtrip_random_field() {
        let mut f = SphericalField::zero(3, 6).unwrap();
        let mut x = 99u64;
        let mut nextf = move || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((x >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        for k in 0..=6u32 {
            for i in 1..=multiplicity(3, k) {
                f.set_coeff(k, i, nextf());
            }
        }
        let samples = synthesize(&f, 0);
        let g = expand(3, &samples, 6).unwrap();
        for k in 0..=6u32 {
            for i in 1..=multiplicity(3, k) {
                assert!(
                    (f.coeff(k, i) - g.coeff(k, i)).abs() < 1e-10,
                    "({k},{i}): {} vs {}",
                    f.coeff(k, i),
                    g.coeff(k, i)
                );
            }
        }
    }

    #[test]
    fn harmonics_are_orthonormal_spotcheck() {
        let grid = SphereGrid::for_degree(5);
        let w_th = 2.0 * PI / grid.n_theta as f64;
        let pairs = [(2u32, 3u32, 2u32, 3u32), (2, 3, 2, 4), (3, 1, 5, 1), (4, 9, 4, 9)];
        for &(k1, i1, k2, i2) in &pairs {
            let mut dot = 0.0;
            for (&mu, &wmu) in grid.mu.iter().zip(&grid.w_mu) {
                for it in 0..grid.n_theta {
                    let th = grid.theta(it);
                    dot += real_harmonic_s2(k1, i1, mu, th) * real_harmonic_s2(k2, i2, mu, th)
                        * wmu
                        * w_th;
                }
            }
            let expect = if (k1, i1) == (k2, i2) { 1.0 } else { 0.0 };
            assert!((dot - expect).abs() < 1e-10, "({k1},{i1})·({k2},{i2}) = {dot}");
        }
    }

    #[test]
    fn q_form_vanishes_for_constants_and_converges_for_cos3() {
        let mut c = SphericalField::zero(2, 4).unwrap();
        c.set_coeff(0, 1, 2.0);
        let rep = nonlocal_form_q(&c, &exp_fam(0.1)).unwrap();
        assert_eq!(rep.q_value, 0.0);

        let f = cos_k_field(3, 8);
        let target = 9.0 * PI;
        let mut prev_gap = f64::INFINITY;
        for eps in [0.2, 0.1, 0.05] {
            let rep = nonlocal_form_q(&f, &exp_fam(eps)).unwrap();
            let gap = (rep.q_value - target).abs();
            assert!(gap < prev_gap, "gap must shrink along the ε grid");
            prev_gap = gap;
        }
        assert!(prev_gap / target < 0.10, "gap {prev_gap}");
    }

    #[test]
    fn q_form_ratio_decreases_for_every_family() {
        use crate::kernels::{KernelSpec, ProfileKind};
        let f = cos_k_field(3, 4);
        let families = [
            ProfileKind::Exponential,
            ProfileKind::Gaussian,
            ProfileKind::CompactBump { radius: 1.0 },
            ProfileKind::TruncatedRiesz { exponent: 0.5, radius: 1.0 },
            ProfileKind::Bessel { kappa: 1.0, alpha: 1.0 },
        ];
        let _ = KernelSpec { family: "exponential".into(), params: Default::default(), n: 2 };
        for fam_kind in families {
            let tag = fam_kind.tag();
            let kinked = matches!(fam_kind, ProfileKind::TruncatedRiesz { .. });
            let kernel = Arc::new(RadialKernel::from_profile(fam_kind, 2).unwrap());
            let mut prev = f64::INFINITY;
            for eps in [0.2, 0.1, 0.05] {
                let fam = KernelFamily::new(kernel.clone(), eps).unwrap();
                // the C¹-tapered Riesz profile is not smooth: its form needs
                // a grid growing with 1/ε, the analytic families do not
                let n = if kinked { (820.0 / eps) as usize } else { 1024 };
                let rep = nonlocal_form_q_with_grid(&f, &fam, n).unwrap();
                let dev = rep.q_eta_hat.abs();
                assert!(dev < prev + 1e-12, "{tag}: |q̂_η| not decreasing at ε={eps}");
                prev = dev;
            }
            assert!(prev < 0.25, "{tag}: |q̂_η(0.05)| = {prev}");
        }
    }

    #[test]
    fn q_form_mode_one_bound() {
        let f = cos_k_field(1, 4);
        let rep = nonlocal_form_q(&f, &exp_fam(0.05)).unwrap();
        assert!(rep.q_value <= 1.1 * PI, "Q = {}", rep.q_value);
        assert!(rep.q_eta_hat.abs() <= 0.1, "q_hat = {}", rep.q_eta_hat);
    }

    #[test]
    fn constraint_gap_examples() {
        // u = cos3θ: gap = ½·9π - π - ½π = 3π
        let rep = constraint_checks(&cos_k_field(3, 4), 0.01).unwrap();
        assert!((rep.spectral_gap - 3.0 * PI).abs() < 1e-10);
        assert!(rep.gap_nonnegative);

        // u = cosθ: gap = -π, and the induced barycenter violates centering
        let rep = constraint_checks(&cos_k_field(1, 4), 0.01).unwrap();
        assert!((rep.spectral_gap + PI).abs() < 1e-10);
        assert!(!rep.gap_nonnegative);
        assert!(!rep.applicable);

        // n=3 degree-2 harmonic with unit norm: gap = ½·6 - 2 - ½ = ½
        let mut f = SphericalField::zero(3, 3).unwrap();
        f.set_coeff(2, 1, 1.0);
        let rep = constraint_checks(&f, 0.01).unwrap();
        assert!((rep.spectral_gap - 0.5).abs() < 1e-12);
    }

    #[test]
    fn spectral_gap_exact_with_low_modes_zeroed() {
        let mut x = 4242u64;
        let mut nextf = move || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((x >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        for n in [2u32, 3] {
            for _ in 0..20 {
                let mut f = SphericalField::zero(n, 8).unwrap();
                for k in 0..=8u32 {
                    for i in 1..=multiplicity(n, k) {
                        f.set_coeff(k, i, nextf());
                    }
                }
                f.zero_low_modes();
                let l2 = f.l2_norm_sq();
                let h1 = f.h1_seminorm_sq();
                assert!(
                    0.5 * h1 - (n - 1) as f64 * l2 >= 0.5 * l2 - 1e-12,
                    "n={n}: gap violated"
                );
            }
        }
    }

    #[test]
    fn deficit_checks_cos3_case() {
        // u = cos3θ with sup norm 1, t = 0.02: all three comparisons hold
        let fam = exp_fam(0.05);
        let rep = deficit_checks(0.02, &cos_k_field(3, 4), &fam, 0.5).unwrap();
        assert!(rep.local_bracket_ok, "{rep:?}");
        assert!(rep.polar_residual_rel <= 2e-3, "{}", rep.polar_residual_rel);
        assert!(rep.stability_ok, "{rep:?}");
        assert!(deficit_checks(0.6, &cos_k_field(3, 4), &fam, 0.5).is_err());
    }

    #[test]
    fn deficit_checks_trivial_and_constant_identity() {
        let fam = exp_fam(0.05);
        // u ≡ 0 induces the unit disk itself
        let f = SphericalField::zero(2, 4).unwrap();
        let shape = induced_shape(&f, 0.01).unwrap();
        assert!((shape.measure().local_perimeter - 2.0 * PI).abs() < 1e-12);

        // ψ at constant u reduces to the disk perimeter
        let (psi, direct) = psi_constant_identity(0.02, 1.0, &fam).unwrap();
        assert!((psi - direct).abs() / direct < 1e-4, "psi {psi} vs direct {direct}");
    }

    #[test]
    fn field_spec_roundtrip() {
        let mut f = SphericalField::zero(3, 4).unwrap();
        f.set_coeff(2, 5, 0.7);
        f.set_coeff(0, 1, -0.1);
        let spec = f.to_spec();
        let g = SphericalField::from_spec(&spec).unwrap();
        assert_eq!(g.coeff(2, 5), 0.7);
        assert_eq!(g.coeff(0, 1), -0.1);
        assert!(SphericalField::from_spec(&FieldSpec {
            n: 2,
            l_max: 2,
            coeffs: vec![(3, 1, 1.0)]
        })
        .is_err());
    }
}
