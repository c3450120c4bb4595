//! Small numerical kernels: bracketing root search, adaptive Gauss-Kronrod
//! quadrature, golden-section search and binomial coefficients.

/// Binomial coefficient as a float; zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (1..=k).fold(1.0, |acc, j| acc * (n - k + j) as f64 / j as f64)
}

/// Outcome of [`bisect`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
}

/// Bisection on `[lo, hi]` where `f(lo)` and `f(hi)` have opposite signs
/// (zero counts as either). Runs until the bracket collapses to adjacent
/// floats or `x_tol` is reached, whichever comes first.
///
/// Returns `None` if the endpoints do not bracket a sign change.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, x_tol: f64) -> Option<Root>
where
    F: FnMut(f64) -> f64,
{
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Some(Root { x: lo, fx: 0.0, iterations: 0 });
    }
    if f_hi == 0.0 {
        return Some(Root { x: hi, fx: 0.0, iterations: 0 });
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return None;
    }
    let mut iterations = 0;
    let mut best = if f_lo.abs() < f_hi.abs() { (lo, f_lo) } else { (hi, f_hi) };
    while hi - lo > x_tol && iterations < 200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        iterations += 1;
        if f_mid.abs() < best.1.abs() {
            best = (mid, f_mid);
        }
        if f_mid == 0.0 {
            break;
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Some(Root { x: best.0, fx: best.1, iterations })
}

const KRONROD_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_2,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd-indexed Kronrod nodes (0.949.., 0.741.., 0.405.., 0).
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod_15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);
    let mut kronrod = KRONROD_WEIGHTS[7] * f_center;
    let mut gauss = GAUSS_WEIGHTS[3] * f_center;
    for (j, (&node, &weight)) in KRONROD_NODES[..7].iter().zip(&KRONROD_WEIGHTS[..7]).enumerate() {
        let dx = half * node;
        let pair = f(center - dx) + f(center + dx);
        kronrod += weight * pair;
        if j % 2 == 1 {
            gauss += GAUSS_WEIGHTS[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Result of [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

/// Adaptive 15-point Gauss-Kronrod quadrature of `f` over `[a, b]`.
///
/// Subintervals are bisected until each one's Kronrod/Gauss discrepancy is
/// below its share of `abs_tol`, or `max_evals` function evaluations have
/// been spent. Smooth polynomial integrands of degree up to 22 are exact on
/// the first panel.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64, max_evals: usize) -> Quadrature {
    if a == b {
        return Quadrature { value: 0.0, error_estimate: 0.0, evaluations: 0 };
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let width = hi - lo;
    let mut stack = vec![(lo, hi)];
    let mut value = 0.0;
    let mut error = 0.0;
    let mut evaluations = 0;
    while let Some((l, r)) = stack.pop() {
        let (v, e) = gauss_kronrod_15(&mut f, l, r);
        evaluations += 15;
        let share = abs_tol * (r - l) / width;
        let exhausted = evaluations + 30 * (stack.len() + 1) > max_evals;
        if e <= share.max(f64::EPSILON * v.abs()) || exhausted || r - l < 1e-14 * width {
            value += v;
            error += e;
        } else {
            let mid = 0.5 * (l + r);
            stack.push((mid, r));
            stack.push((l, mid));
        }
    }
    Quadrature { value: sign * value, error_estimate: error, evaluations }
}

/// Golden-section search for a maximiser of a unimodal `f` on `[a, b]`.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, iterations: usize) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iterations {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Relative-tolerance equality used to detect the marginal parameter
/// regions (R = Kc, R = c), where verdicts change discontinuously.
pub fn nearly_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}
