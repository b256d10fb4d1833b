//! One-dimensional quadrature primitives.
//!
//! Everything downstream (kernel normalization, tail tables, disk formulas)
//! is built from three pieces: Gauss–Legendre rules with computed nodes, a
//! 15-point Gauss–Kronrod rule with the classical error estimate, and an
//! adaptive bisection driver. Semi-infinite integrals go through doubling
//! windows with a Cauchy test so that divergent tails are detected instead of
//! silently truncated.

/// 7-point Gauss / 15-point Kronrod abscissae on [0, 1] (positive half).
const XGK15: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.000000000000000,
];

/// Kronrod weights matching `XGK15`.
const WGK15: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];

/// Gauss weights for the embedded 7-point rule (odd Kronrod points).
const WG7: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// Single 15-point Gauss–Kronrod panel; returns `(integral, error_estimate)`.
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let fc = f(center);
    let mut kronrod = fc * WGK15[7];
    let mut gauss = fc * WG7[3];
    let mut res_abs = kronrod.abs();

    let mut fv = [0.0f64; 15];
    fv[7] = fc;
    for j in 0..7 {
        let x = half * XGK15[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv[j] = f1;
        fv[14 - j] = f2;
        kronrod += WGK15[j] * (f1 + f2);
        res_abs += WGK15[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG7[j / 2] * (f1 + f2);
        }
    }

    let mean = kronrod * 0.5;
    let mut res_asc = WGK15[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK15[j] * ((fv[j] - mean).abs() + (fv[14 - j] - mean).abs());
    }

    let integral = kronrod * half;
    let mut err = ((kronrod - gauss) * half).abs();
    res_asc *= half.abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    let res_abs = res_abs * half.abs();
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (integral, err)
}

/// Adaptive Gauss–Kronrod bisection on a finite interval.
///
/// Splits the worst panel until `|error| <= max(abs_tol, rel_tol * |value|)`
/// or the panel budget is exhausted; returns `(value, error_estimate)`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> (f64, f64) {
    if a == b {
        return (0.0, 0.0);
    }
    struct Panel {
        a: f64,
        b: f64,
        val: f64,
        err: f64,
    }
    let (val, err) = gk15(f, a, b);
    let mut panels = vec![Panel { a, b, val, err }];
    for _ in 0..2000 {
        let total: f64 = panels.iter().map(|p| p.val).sum();
        let toterr: f64 = panels.iter().map(|p| p.err).sum();
        if toterr <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        // split the worst panel
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.partial_cmp(&y.1.err).unwrap())
            .unwrap();
        let p = panels.swap_remove(idx);
        let mid = 0.5 * (p.a + p.b);
        if mid == p.a || mid == p.b {
            // interval exhausted at machine precision
            panels.push(p);
            break;
        }
        let (v1, e1) = gk15(f, p.a, mid);
        let (v2, e2) = gk15(f, mid, p.b);
        panels.push(Panel { a: p.a, b: mid, val: v1, err: e1 });
        panels.push(Panel { a: mid, b: p.b, val: v2, err: e2 });
    }
    let total: f64 = panels.iter().map(|p| p.val).sum();
    let toterr: f64 = panels.iter().map(|p| p.err).sum();
    (total, toterr)
}

/// Result of a semi-infinite tail integration.
#[derive(Debug, Clone, Copy)]
pub struct TailIntegral {
    pub value: f64,
    pub error: f64,
    /// false when the doubling windows did not form a Cauchy sequence.
    pub converged: bool,
}

/// `∫_a^∞ f` by doubling windows `[a, a+w], [a+w, a+3w], …`.
///
/// The window sum must decay; if 60 doublings fail the Cauchy test the
/// integral is flagged divergent and `value` is whatever accumulated.
pub fn integrate_tail<F: Fn(f64) -> f64>(f: &F, a: f64, rel_tol: f64) -> TailIntegral {
    let mut lo = a;
    let mut w = 1.0f64.max(a.abs() * 0.5);
    let mut total = 0.0;
    let mut toterr = 0.0;
    let mut converged = false;
    for _ in 0..60 {
        let hi = lo + w;
        let (v, e) = integrate(f, lo, hi, rel_tol * 0.1, 0.0);
        total += v;
        toterr += e;
        if v.abs() <= rel_tol * total.abs().max(f64::MIN_POSITIVE) && total.abs() > 0.0 {
            converged = true;
            break;
        }
        if v.abs() <= 1e-300 {
            converged = true;
            break;
        }
        lo = hi;
        w *= 2.0;
    }
    TailIntegral { value: total, error: toterr, converged }
}

/// Gauss–Legendre nodes and weights on [-1, 1], computed by Newton iteration
/// on the three-term Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_pd(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
        let (_, d) = legendre_pd(n, 0.0);
        weights[n / 2] = 2.0 / (d * d);
    }
    (nodes, weights)
}

fn legendre_pd(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (p0 - x * p1) / (1.0 - x * x);
    (p1, d)
}

/// Gauss–Legendre rule mapped onto `[a, b]`.
pub fn gl_on(nodes: &[f64], weights: &[f64], a: f64, b: f64) -> Vec<(f64, f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    nodes
        .iter()
        .zip(weights)
        .map(|(&x, &w)| (c + h * x, h * w))
        .collect()
}

/// Geometric panel breakpoints from `a` to `b` refined toward `a`
/// (first panel has width `(b-a) * ratio^{1-count} * (ratio-1)/(ratio^{count}... )`);
/// simply: points `a + (b-a)·r^j` for decreasing powers, plus the endpoints.
pub fn geometric_toward(a: f64, b: f64, count: usize, ratio: f64) -> Vec<f64> {
    assert!(count >= 1 && ratio > 1.0);
    let mut pts = Vec::with_capacity(count + 1);
    pts.push(a);
    let len = b - a;
    let mut frac = 1.0;
    let mut fr = Vec::with_capacity(count);
    for _ in 0..count - 1 {
        frac /= ratio;
        fr.push(frac);
    }
    for &f in fr.iter().rev() {
        pts.push(a + len * f);
    }
    pts.push(b);
    pts
}
