//! Numerical laboratory for nonlocal isoperimetric energies in the plane.
//!
//! The central object is the kernel-smeared perimeter
//!
//! ```text
//! Per_G(E) = 2 ∬_{E × E^c} G(x - y) dx dy,
//! ```
//!
//! built from a radial kernel `G` normalized so that its first moment equals
//! `1/K_{1,n}`. Rescaling `G_ε(x) = ε^{-(n+1)} G(x/ε)` concentrates the kernel
//! and drives `Per_{G_ε}(E) → P(E)`. The crate evaluates `Per_{G_ε}` by three
//! independent routes (bulk double integrals, 1D slicing, polar graphs over the
//! circle), exposes the associated critical energy `ℰ = P - Per_{G_ε}` and the
//! interpolated energy `ℱ_γ = P - γ·Per_{G_ε}`, and minimizes `ℱ_γ` over
//! Fourier-parametrized star shapes under an area constraint.
//!
//! Modules mirror the mathematical layers:
//!
//! * [`kernels`] — radial kernel families, normalization, moments, rescaling;
//! * [`shapes2d`] — star-shaped sets `R(θ) = r₀ + Σ a_k cos kθ + b_k sin kθ`;
//! * [`onedim`] — 1D nonlocal perimeters with closed forms and a brute-force
//!   oracle, plus slice extraction;
//! * [`nonlocal`] — the three `Per_{G_ε}` evaluators, `P̃_{G_ε}`, scaling and
//!   Gamow-equivalence identities;
//! * [`spectral`] — Fourier/spherical-harmonic machinery for the stability
//!   (Fuglede-type) expansion;
//! * [`optimize`] — projected gradient descent under `|E| = π` and the scripted
//!   experiments (sweeps, convexification);
//! * [`sampling`] — seeded generators for the randomized suites.

pub mod error;
pub mod kernels;
pub mod nonlocal;
pub mod onedim;
pub mod optimize;
pub mod quad;
pub mod sampling;
pub mod shapes2d;
pub mod spectral;

pub use error::Error;

/// Convenience result alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Surface measure `|S^{n-1}|` of the unit sphere in `ℝ^n`.
pub fn sphere_area(n: u32) -> f64 {
    let nf = n as f64;
    2.0 * std::f64::consts::PI.powf(nf / 2.0) / libm::tgamma(nf / 2.0)
}

/// Volume `ω_n = |B_1|` of the unit ball in `ℝ^n`.
pub fn ball_volume(n: u32) -> f64 {
    let nf = n as f64;
    std::f64::consts::PI.powf(nf / 2.0) / libm::tgamma(1.0 + nf / 2.0)
}

/// Compensated (Neumaier) summation over an ordered slice.
///
/// All parallel reductions in the crate collect per-item terms into an indexed
/// buffer and fold it through this function, so results do not depend on the
/// number of worker threads.
pub fn ksum(terms: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    sum + comp
}
