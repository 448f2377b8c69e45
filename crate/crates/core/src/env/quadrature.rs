//! Quadrature rules shared by the medium and the tabulated paths.

use std::sync::OnceLock;

/// Default absolute tolerance for adaptive quadrature.
pub const TOL_QUAD: f64 = 1e-9;

const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Five-point Gauss-Legendre rule on `[a, b]` (exact for degree 9).
#[inline]
pub fn gauss_legendre5(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (x, w) in GL5_NODES.iter().zip(GL5_WEIGHTS.iter()) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

/// Nodes and weights of the five-point Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre5_points(a: f64, b: f64) -> [(f64, f64); 5] {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    std::array::from_fn(|i| (mid + half * GL5_NODES[i], half * GL5_WEIGHTS[i]))
}

/// `tail[i][j] = ∫_{x_i}^{1} L_j(x) dx` for the Lagrange basis on the
/// reference Gauss-Legendre nodes (exact: degree-4 integrand, degree-9 rule).
fn reference_tails() -> &'static [[f64; 5]; 5] {
    static TAILS: OnceLock<[[f64; 5]; 5]> = OnceLock::new();
    TAILS.get_or_init(|| {
        let basis = |j: usize, x: f64| {
            (0..5)
                .filter(|&m| m != j)
                .map(|m| (x - GL5_NODES[m]) / (GL5_NODES[j] - GL5_NODES[m]))
                .product::<f64>()
        };
        std::array::from_fn(|i| {
            std::array::from_fn(|j| gauss_legendre5(&|x| basis(j, x), GL5_NODES[i], 1.0))
        })
    })
}

/// Given the values of a function at the Gauss-Legendre nodes of `[a, b]`,
/// returns `∫_{s_i}^b` of its degree-4 interpolant for every node `s_i`.
pub fn gauss_legendre5_tails(values: &[f64; 5], a: f64, b: f64) -> [f64; 5] {
    let half = 0.5 * (b - a);
    let w = reference_tails();
    std::array::from_fn(|i| half * (0..5).map(|j| w[i][j] * values[j]).sum::<f64>())
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
///
/// The interval is first cut into pieces of length at most one so that
/// oscillating integrands cannot fool the initial error estimate; the
/// tolerance is shared between pieces in proportion to their length.
/// Reversed limits return the negated integral.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if b < a {
        return -adaptive_simpson(f, b, a, tol);
    }
    let len = b - a;
    let pieces = len.ceil().max(1.0) as usize;
    let h = len / pieces as f64;
    let mut total = 0.0;
    for k in 0..pieces {
        let lo = a + k as f64 * h;
        let hi = if k + 1 == pieces { b } else { lo + h };
        let fa = f(lo);
        let fb = f(hi);
        let fm = f(0.5 * (lo + hi));
        let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
        total += simpson_step(&f, lo, hi, fa, fm, fb, whole, tol * (hi - lo) / len, 40);
    }
    total
}
