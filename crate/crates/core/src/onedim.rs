//! One-dimensional nonlocal perimeters and critical energies.
//!
//! For the slicing kernel `ρ_ε` the 1D critical energy of a segment has the
//! closed form
//!
//! ```text
//! ℰ¹((a,b)) = 4 ∫_{-∞}^a ∫_b^{+∞} ρ_ε(s-t) ds dt = 4 J(b-a),
//! J(d) = ∫_d^∞ (τ-d) ρ_ε(τ) dτ,
//! ```
//!
//! and for a finite union the energy decomposes over the connected components
//! `C_i` of the complement:
//!
//! ```text
//! ℰ¹(E) = 2 Σ_{i≠j} ∬_{C_i×C_j} ρ_ε + Σ_i ℰ¹(C_i),
//! ```
//!
//! where every box integral reduces to four `J` evaluations through
//! `∬ = J(g) - J(g+L₁) - J(g+L₂) + J(g+L₁+L₂)` (`g` the gap between the
//! components, `L_i` their lengths, `J(∞) = 0`). The normalization
//! `∫|t|ρ_ε dt = 1` forces `J(0) = 1/2` for every kernel and scale.
//!
//! `per1_bruteforce` integrates the defining double integral directly with
//! tensor Gauss–Legendre panels; it exists to cross-check the closed forms and
//! shares nothing with the `J`-table path.

use crate::kernels::KernelFamily;
use crate::quad;
use crate::shapes2d::StarShape2D;
use crate::{Error, Result};

/// Ordered disjoint union of open intervals; endpoints may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalUnion {
    intervals: Vec<(f64, f64)>,
}

impl IntervalUnion {
    /// Normalize and validate: sorts, merges touching intervals, drops empty
    /// ones, and rejects overlapping input.
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<IntervalUnion> {
        intervals.retain(|&(a, b)| b > a);
        intervals.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
        for (a, b) in intervals {
            if a.is_nan() || b.is_nan() {
                return Err(Error::Domain("interval endpoints must not be NaN".into()));
            }
            match out.last_mut() {
                Some(last) if a < last.1 => {
                    return Err(Error::Domain(format!(
                        "intervals overlap: ({}, {}) meets ({}, {})",
                        last.0, last.1, a, b
                    )))
                }
                Some(last) if a == last.1 => last.1 = b,
                _ => out.push((a, b)),
            }
        }
        Ok(IntervalUnion { intervals: out })
    }

    pub fn empty() -> IntervalUnion {
        IntervalUnion { intervals: Vec::new() }
    }

    pub fn full_line() -> IntervalUnion {
        IntervalUnion { intervals: vec![(f64::NEG_INFINITY, f64::INFINITY)] }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn is_bounded(&self) -> bool {
        self.intervals
            .iter()
            .all(|&(a, b)| a.is_finite() && b.is_finite())
    }

    pub fn total_length(&self) -> f64 {
        self.intervals.iter().map(|&(a, b)| b - a).sum()
    }

    /// Standard 1D perimeter: the number of finite endpoints.
    pub fn perimeter(&self) -> f64 {
        self.intervals
            .iter()
            .map(|&(a, b)| a.is_finite() as u32 + b.is_finite() as u32)
            .sum::<u32>() as f64
    }

    /// Interval spanned by the union (its convex hull).
    pub fn convex_hull(&self) -> IntervalUnion {
        if self.intervals.is_empty() {
            return IntervalUnion::empty();
        }
        IntervalUnion {
            intervals: vec![(self.intervals[0].0, self.intervals.last().unwrap().1)],
        }
    }

    /// Connected components of the complement, outermost ones unbounded.
    pub fn complement_components(&self) -> Vec<(f64, f64)> {
        if self.intervals.is_empty() {
            return vec![(f64::NEG_INFINITY, f64::INFINITY)];
        }
        let mut comps = Vec::with_capacity(self.intervals.len() + 1);
        let first = self.intervals[0].0;
        if first > f64::NEG_INFINITY {
            comps.push((f64::NEG_INFINITY, first));
        }
        for w in self.intervals.windows(2) {
            comps.push((w[0].1, w[1].0));
        }
        let last = self.intervals.last().unwrap().1;
        if last < f64::INFINITY {
            comps.push((last, f64::INFINITY));
        }
        comps
    }
}

/// Result of slicing a star shape along a line.
#[derive(Debug, Clone)]
pub struct SliceOutcome {
    pub union: IntervalUnion,
    /// true when a near-tangent crossing produced a degenerate interval that
    /// was dropped (measure-zero event in the outer integrals)
    pub tangency_dropped: bool,
}

/// Slice `E_{σ,y} = { s : y σ^⊥ + s σ ∈ E }` of a star shape.
///
/// Boundary crossings are bracketed as sign changes of
/// `b(θ) = (∂E(θ) - p₀) × σ` on the validation grid and polished by
/// bisection + Newton; membership of the midpoints decides which segments
/// lie inside.
pub fn slice_star_shape(shape: &StarShape2D, sigma: [f64; 2], y: f64) -> Result<SliceOutcome> {
    let norm = sigma[0].hypot(sigma[1]);
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Domain("slice direction must be a nonzero vector".into()));
    }
    let sig = [sigma[0] / norm, sigma[1] / norm];
    let perp = [-sig[1], sig[0]];
    let p0 = [y * perp[0], y * perp[1]];

    let n = crate::shapes2d::VALIDATION_GRID;
    let two_pi = 2.0 * std::f64::consts::PI;
    let b = |theta: f64| -> f64 {
        let p = shape.boundary_point(theta);
        (p[0] - p0[0]) * sig[1] - (p[1] - p0[1]) * sig[0]
    };
    let db = |theta: f64| -> f64 {
        let r = shape.radius(theta);
        let dr = shape.radius_deriv(theta);
        let (s, c) = theta.sin_cos();
        let tx = dr * c - r * s;
        let ty = dr * s + r * c;
        tx * sig[1] - ty * sig[0]
    };

    let mut prev = b(0.0);
    let mut crossings: Vec<f64> = Vec::new();
    for i in 1..=n {
        let th = two_pi * i as f64 / n as f64;
        let cur = b(th);
        if prev == 0.0 || prev * cur < 0.0 {
            let mut lo = two_pi * (i - 1) as f64 / n as f64;
            let mut hi = th;
            let mut blo = prev;
            for _ in 0..20 {
                let mid = 0.5 * (lo + hi);
                let bm = b(mid);
                if blo * bm <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    blo = bm;
                }
            }
            let mut root = 0.5 * (lo + hi);
            for _ in 0..6 {
                let d = db(root);
                if d.abs() < 1e-14 {
                    break;
                }
                let step = b(root) / d;
                root -= step;
                if !(lo - 1e-3..=hi + 1e-3).contains(&root) {
                    root = 0.5 * (lo + hi);
                    break;
                }
                if step.abs() < 1e-14 {
                    break;
                }
            }
            let p = shape.boundary_point(root);
            crossings.push((p[0] - p0[0]) * sig[0] + (p[1] - p0[1]) * sig[1]);
        }
        prev = cur;
    }

    crossings.sort_by(|a, b| a.partial_cmp(b).unwrap());
    crossings.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let mut intervals = Vec::new();
    let mut tangency_dropped = false;
    for w in crossings.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let p = [p0[0] + mid * sig[0], p0[1] + mid * sig[1]];
        if shape.contains(p) {
            if w[1] - w[0] < 1e-8 {
                tangency_dropped = true;
            } else {
                intervals.push((w[0], w[1]));
            }
        }
    }
    Ok(SliceOutcome { union: IntervalUnion::new(intervals)?, tangency_dropped })
}

/// Tail integral `J(d) = ∫_d^∞ (τ-d) ρ_ε(τ) dτ`.
pub fn tail_integral_j(fam: &KernelFamily, d: f64) -> Result<f64> {
    if d < 0.0 {
        return Err(Error::Domain(format!("tail integral needs d >= 0, got {d}")));
    }
    fam.j_tail(d)
}

/// Closed-form critical energy `ℰ¹(J) = P¹(J) - Per¹_{ρ_ε}(J)`.
///
/// Empty set, the whole line, and half-lines all give 0.
pub fn crit1_closed_form(union: &IntervalUnion, fam: &KernelFamily) -> Result<f64> {
    let comps = union.complement_components();
    if union.is_empty() || comps.is_empty() {
        return Ok(0.0);
    }
    let j = |d: f64| -> Result<f64> {
        if d.is_infinite() {
            Ok(0.0)
        } else {
            fam.j_tail(d)
        }
    };
    let mut total = 0.0;
    // cross terms between distinct complement components (4 J's per box)
    for i in 0..comps.len() {
        for k in i + 1..comps.len() {
            let (p, q) = comps[i];
            let (u, v) = comps[k];
            let g = u - q;
            let l1 = q - p;
            let l2 = v - u;
            // J(g) - J(g+L1) - J(g+L2) + J(g+L1+L2), infinite lengths drop out
            let box_int = j(g)? - j(g + l1)? - j(g + l2)? + j(g + l1 + l2)?;
            total += 4.0 * box_int;
        }
    }
    // own energies of bounded complement components
    for &(a, b) in &comps {
        if a.is_finite() && b.is_finite() {
            total += 4.0 * j(b - a)?;
        }
    }
    Ok(total)
}

/// Closed-form 1D nonlocal perimeter `Per¹ = P¹ - ℰ¹` for bounded unions.
pub fn per1_closed_form(union: &IntervalUnion, fam: &KernelFamily) -> Result<f64> {
    Ok(union.perimeter() - crit1_closed_form(union, fam)?)
}

/// Direct 2D quadrature of `Per¹_{ρ_ε}(J) = 2 ∬_{J × J^c} ρ_ε(s-t) ds dt`.
///
/// The complement is truncated where the kernel has no remaining tail mass;
/// panels refine geometrically toward shared endpoints of adjacent intervals.
pub fn per1_bruteforce(union: &IntervalUnion, fam: &KernelFamily) -> Result<f64> {
    if !union.is_bounded() {
        return Err(Error::Precondition(
            "brute-force 1D perimeter needs a bounded union; use the closed forms".into(),
        ));
    }
    if union.is_empty() {
        return Ok(0.0);
    }
    let reach = fam.reach()?;
    let lo = union.intervals()[0].0 - reach;
    let hi = union.intervals().last().unwrap().1 + reach;
    let comps: Vec<(f64, f64)> = union
        .complement_components()
        .into_iter()
        .map(|(a, b)| (a.max(lo), b.min(hi)))
        .filter(|&(a, b)| b > a)
        .collect();

    let (nodes, weights) = quad::gauss_legendre(12);
    let mut total = 0.0;
    for &(a, b) in union.intervals() {
        for &(u, v) in &comps {
            total += box_integral(fam, (a, b), (u, v), &nodes, &weights);
        }
    }
    Ok(2.0 * total)
}

/// `∬_{I×C} ρ_ε(s-t)` with geometric refinement toward the touching corner.
fn box_integral(
    fam: &KernelFamily,
    i: (f64, f64),
    c: (f64, f64),
    nodes: &[f64],
    weights: &[f64],
) -> f64 {
    // panels refined toward the side of I (resp. C) closest to the other box
    let s_panels = panels_toward(i.0, i.1, c.0 >= i.1);
    let t_panels = panels_toward(c.0, c.1, i.0 >= c.1);
    let mut sum = 0.0;
    for sw in s_panels.windows(2) {
        let s_nodes = quad::gl_on(nodes, weights, sw[0], sw[1]);
        for tw in t_panels.windows(2) {
            let t_nodes = quad::gl_on(nodes, weights, tw[0], tw[1]);
            for &(s, ws) in &s_nodes {
                for &(t, wt) in &t_nodes {
                    sum += ws * wt * fam.rho_eps(s - t);
                }
            }
        }
    }
    sum
}

fn panels_toward(a: f64, b: f64, toward_b: bool) -> Vec<f64> {
    let pts = quad::geometric_toward(0.0, b - a, 8, 2.2);
    if toward_b {
        pts.iter().rev().map(|&x| b - x).collect()
    } else {
        pts.iter().map(|&x| a + x).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::RadialKernel;
    use std::sync::Arc;

    fn exp_family(eps: f64) -> KernelFamily {
        KernelFamily::new(Arc::new(RadialKernel::exponential(2)), eps).unwrap()
    }

    #[test]
    fn union_normalization_and_complement() {
        let u = IntervalUnion::new(vec![(2.0, 3.0), (0.0, 1.0)]).unwrap();
        assert_eq!(u.intervals(), &[(0.0, 1.0), (2.0, 3.0)]);
        assert_eq!(u.perimeter(), 4.0);
        let comps = u.complement_components();
        assert_eq!(comps.len(), 3);
        assert_eq!(comps[1], (1.0, 2.0));
        assert!(IntervalUnion::new(vec![(0.0, 2.0), (1.0, 3.0)]).is_err());
        // touching intervals merge
        let m = IntervalUnion::new(vec![(0.0, 1.0), (1.0, 2.0)]).unwrap();
        assert_eq!(m.intervals(), &[(0.0, 2.0)]);
    }

    #[test]
    fn disk_slices() {
        let disk = StarShape2D::disk([0.0, 0.0], 1.0);
        let s = slice_star_shape(&disk, [1.0, 0.0], 0.0).unwrap();
        assert_eq!(s.union.intervals().len(), 1);
        let (a, b) = s.union.intervals()[0];
        assert!((a + 1.0).abs() < 1e-9 && (b - 1.0).abs() < 1e-9);

        // chord at height 0.6 has half-length 0.8
        let s = slice_star_shape(&disk, [1.0, 0.0], 0.6).unwrap();
        let (a, b) = s.union.intervals()[0];
        assert!((a + 0.8).abs() < 1e-9 && (b - 0.8).abs() < 1e-9, "({a}, {b})");

        // line outside the disk: empty slice
        let s = slice_star_shape(&disk, [1.0, 0.0], 1.5).unwrap();
        assert!(s.union.is_empty());
    }

    #[test]
    fn peanut_slice_has_two_components() {
        let peanut = StarShape2D::from_fourier([0.0, 0.0], 1.0, &[(3, 0.3, 0.0)]).unwrap();
        // vertical line at x = -0.75 passes outside the waist but through
        // both left lobes
        let s = slice_star_shape(&peanut, [0.0, 1.0], 0.75).unwrap();
        assert_eq!(s.union.intervals().len(), 2, "{:?}", s.union);
        // dense membership oracle agrees on the component count
        let mut inside_runs = 0;
        let mut was_inside = false;
        for i in 0..4000 {
            let t = -2.0 + 4.0 * i as f64 / 4000.0;
            let inside = peanut.contains([-0.75, t]);
            if inside && !was_inside {
                inside_runs += 1;
            }
            was_inside = inside;
        }
        assert_eq!(inside_runs, 2);
    }

    #[test]
    fn tail_integral_values() {
        let fam = exp_family(1.0);
        assert!((tail_integral_j(&fam, 0.0).unwrap() - 0.5).abs() < 1e-10);
        let exact = 0.75 * (-1.0f64).exp();
        assert!((tail_integral_j(&fam, 1.0).unwrap() - exact).abs() < 1e-10);
        assert!(tail_integral_j(&fam, 50.0).unwrap() <= 1e-12);
        assert!(tail_integral_j(&fam, -0.1).is_err());
    }

    #[test]
    fn segment_closed_form_and_monotonicity() {
        let fam = exp_family(1.0);
        let seg = IntervalUnion::new(vec![(0.0, 1.0)]).unwrap();
        let e1 = crit1_closed_form(&seg, &fam).unwrap();
        assert!((e1 - 3.0 * (-1.0f64).exp()).abs() < 1e-10, "{e1}");
        let seg2 = IntervalUnion::new(vec![(0.0, 2.0)]).unwrap();
        let e2 = crit1_closed_form(&seg2, &fam).unwrap();
        assert!((e2 - 4.0 * (-2.0f64).exp()).abs() < 1e-10);
        assert!(e2 < e1, "energy must decrease as the segment grows");
    }

    #[test]
    fn degenerate_sets_have_zero_energy() {
        let fam = exp_family(0.7);
        for u in [
            IntervalUnion::empty(),
            IntervalUnion::full_line(),
            IntervalUnion::new(vec![(2.0, f64::INFINITY)]).unwrap(),
            IntervalUnion::new(vec![(f64::NEG_INFINITY, -1.0)]).unwrap(),
        ] {
            assert_eq!(crit1_closed_form(&u, &fam).unwrap(), 0.0);
        }
    }

    #[test]
    fn bruteforce_matches_closed_form() {
        let fam = exp_family(1.0);
        let seg = IntervalUnion::new(vec![(0.0, 1.0)]).unwrap();
        let per = per1_bruteforce(&seg, &fam).unwrap();
        let expected = 2.0 - 3.0 * (-1.0f64).exp();
        assert!((per - expected).abs() < 1e-8, "{per} vs {expected}");

        let two = IntervalUnion::new(vec![(0.0, 1.0), (2.0, 3.0)]).unwrap();
        let bf = per1_bruteforce(&two, &fam).unwrap();
        let cf = per1_closed_form(&two, &fam).unwrap();
        assert!((bf - cf).abs() < 1e-6, "{bf} vs {cf}");

        assert_eq!(per1_bruteforce(&IntervalUnion::empty(), &fam).unwrap(), 0.0);
        assert!(per1_bruteforce(&IntervalUnion::full_line(), &fam).is_err());
    }

    #[test]
    fn convexification_decreases_energy() {
        let fam = exp_family(0.5);
        let u = IntervalUnion::new(vec![(0.0, 0.5), (1.0, 1.2), (2.0, 2.8)]).unwrap();
        let e = crit1_closed_form(&u, &fam).unwrap();
        let h = crit1_closed_form(&u.convex_hull(), &fam).unwrap();
        assert!(e >= 0.0 && h >= 0.0);
        assert!(h <= e + 1e-12);
    }
}
