//! Seeded generators for the randomized suites.
//!
//! Every random experiment in the crate (and in the CLI) draws from a ChaCha
//! stream keyed by a single 64-bit seed, so suites are reproducible bit for
//! bit. Generators use rejection where a geometric side condition (convexity,
//! radial pinching, star-shapedness) must hold.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::onedim::IntervalUnion;
use crate::shapes2d::{StarShape2D, Transform};
use crate::spectral::{expand, SphericalField};
use crate::Result;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Nearly spherical random shape: modes `2..=k_max` with coefficients drawn
/// uniformly in `±amp/k²`.
pub fn nearly_spherical_shape(rng: &mut ChaCha8Rng, k_max: u32, amp: f64) -> StarShape2D {
    loop {
        let modes: Vec<(u32, f64, f64)> = (2..=k_max)
            .map(|k| {
                let a = amp / (k * k) as f64;
                (k, rng.gen_range(-a..a), rng.gen_range(-a..a))
            })
            .collect();
        if let Ok(s) = StarShape2D::from_fourier([0.0, 0.0], 1.0, &modes) {
            return s;
        }
    }
}

/// Convex shape pinched between `B_{0.95}` and `B_{1.05}`.
pub fn convex_near_ball(rng: &mut ChaCha8Rng) -> StarShape2D {
    loop {
        let modes: Vec<(u32, f64, f64)> = (2..=5)
            .map(|k| {
                let a = 0.012 / (k * k) as f64;
                (k, rng.gen_range(-a..a), rng.gen_range(-a..a))
            })
            .collect();
        let Ok(s) = StarShape2D::from_fourier([0.0, 0.0], 1.0, &modes) else {
            continue;
        };
        let m = s.measure();
        if m.is_convex && m.r_min >= 0.95 && m.r_max <= 1.05 {
            return s;
        }
    }
}

/// Connected but nonconvex star shape (one dominant high mode).
pub fn nonconvex_shape(rng: &mut ChaCha8Rng) -> StarShape2D {
    loop {
        let k = rng.gen_range(3..=6u32);
        let a = rng.gen_range(0.12..0.28);
        let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let extra = rng.gen_range(-0.03..0.03);
        let modes = vec![(k, a * phase.cos(), a * phase.sin()), (2, extra, 0.0)];
        let Ok(s) = StarShape2D::from_fourier([0.0, 0.0], 1.0, &modes) else {
            continue;
        };
        if !s.measure().is_convex {
            return s;
        }
    }
}

/// Bounded interval union with up to `max_intervals` components in `[-3, 3]`.
pub fn interval_union(rng: &mut ChaCha8Rng, max_intervals: usize) -> IntervalUnion {
    let k = rng.gen_range(1..=max_intervals);
    let mut pts: Vec<f64> = (0..2 * k).map(|_| rng.gen_range(-3.0..3.0)).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // enforce strict separation so components do not merge
    for i in 1..pts.len() {
        if pts[i] - pts[i - 1] < 1e-3 {
            pts[i] = pts[i - 1] + 1e-3;
        }
    }
    let intervals: Vec<(f64, f64)> = pts.chunks(2).map(|c| (c[0], c[1])).collect();
    IntervalUnion::new(intervals).expect("separated endpoints form a valid union")
}

/// Centered, volume-constrained nearly spherical pair `(t, u)` for the
/// stability suite: a random field on modes `2..=l_max` is normalized so that
/// `‖u‖_∞ + ‖∇_τ u‖_∞ = 1`, the induced shape is rescaled to area π and
/// recentered, and the perturbation re-extracted with the same normalization.
pub fn centered_nearly_spherical(
    rng: &mut ChaCha8Rng,
    l_max: u32,
    t_target: f64,
) -> Result<(f64, SphericalField)> {
    use std::f64::consts::PI;
    loop {
        let mut raw = SphericalField::zero(2, l_max)?;
        for k in 2..=l_max {
            let a = 1.0 / (k * k * k) as f64;
            raw.set_coeff(k, 1, rng.gen_range(-a..a));
            raw.set_coeff(k, 2, rng.gen_range(-a..a));
        }
        if raw.l2_norm_sq() < 1e-12 {
            continue;
        }
        // normalize: sup|u| + sup|u'| = 1
        let m = 2048;
        let mut sup = 0.0f64;
        let mut lip = 0.0f64;
        for j in 0..m {
            let th = 2.0 * PI * j as f64 / m as f64;
            sup = sup.max(raw.eval_circle(th).abs());
            lip = lip.max(raw.eval_circle_deriv(th).abs());
        }
        let scale = 1.0 / (sup + lip);
        let samples: Vec<f64> = (0..m)
            .map(|j| scale * raw.eval_circle(2.0 * PI * j as f64 / m as f64))
            .collect();
        let u0 = expand(2, &samples, l_max)?;

        // enforce the constraints on the induced shape, then re-extract
        let shape = crate::spectral::induced_shape(&u0, t_target)?;
        let shape = shape
            .transform(Transform::ScaleToArea(PI))?
            .transform(Transform::Recenter)?;
        let npts = 2048;
        let mut v = vec![0.0; npts];
        let mut sup_v = 0.0f64;
        let mut lip_v = 0.0f64;
        for (j, s) in v.iter_mut().enumerate() {
            let th = 2.0 * PI * j as f64 / npts as f64;
            *s = shape.radius(th) - 1.0;
            sup_v = sup_v.max(s.abs());
            lip_v = lip_v.max(shape.radius_deriv(th).abs());
        }
        let t = sup_v + lip_v;
        if !(t > 0.0 && t < 0.5) {
            continue;
        }
        for s in &mut v {
            *s /= t;
        }
        let field = expand(2, &v, l_max.max(shape.max_mode()))?;
        return Ok((t, field));
    }
}
