//! Gauss-Legendre rules, adaptive Gauss-Kronrod and tanh-sinh quadrature.

use crate::error::{Error, Result};
use std::collections::BinaryHeap;
use std::f64::consts::FRAC_PI_2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive 15-point Gauss-Kronrod on a finite interval.
pub fn adaptive_gk<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_segments: usize,
) -> Result<Estimate> {
    let (v, e) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value: v, error: e });
    let (mut total, mut err) = (v, e);
    let mut count = 1;
    while err > abs_tol.max(rel_tol * total.abs()) {
        if count >= max_segments {
            return Err(Error::Quadrature(format!(
                "adaptive rule on [{a}, {b}] stopped at error {err:e} after {count} segments"
            )));
        }
        let seg = heap.pop().expect("heap never empty");
        let mid = 0.5 * (seg.a + seg.b);
        let (v1, e1) = gk15(&f, seg.a, mid);
        let (v2, e2) = gk15(&f, mid, seg.b);
        total += v1 + v2 - seg.value;
        err += e1 + e2 - seg.error;
        heap.push(Segment { a: seg.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: seg.b, value: v2, error: e2 });
        count += 1;
        if !total.is_finite() {
            return Err(Error::Quadrature("non-finite integrand".into()));
        }
    }
    // re-add from the leaves to shed accumulated rounding
    let value = heap.iter().map(|s| s.value).sum();
    let error = heap.iter().map(|s| s.error).sum();
    Ok(Estimate { value, error })
}

/// Tanh-sinh rule on [a, b]. The integrand receives `(x, x - a, b - x)` with
/// both distances computed without cancellation, so endpoint singularities
/// can be evaluated accurately.
pub fn tanh_sinh<F: Fn(f64, f64, f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Estimate> {
    const T_MAX: f64 = 6.5;
    const MAX_LEVEL: usize = 12;
    let half = 0.5 * (b - a);
    let eval = |t: f64| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let ch = u.cosh();
        let w = FRAC_PI_2 * t.cosh() / (ch * ch);
        if !w.is_finite() || w == 0.0 {
            return 0.0;
        }
        let x = u.tanh();
        let near = half * (-u.abs()).exp() / ch;
        let far = half * (1.0 + x.abs());
        if near == 0.0 {
            return 0.0;
        }
        let (dl, dr) = if t >= 0.0 { (far, near) } else { (near, far) };
        let pos = if dl <= dr { a + dl } else { b - dr };
        let v = f(pos, dl, dr);
        if v == 0.0 {
            0.0
        } else {
            v * w
        }
    };
    let mut sum = eval(0.0);
    let mut k = 1;
    loop {
        let t = k as f64;
        if t > T_MAX {
            break;
        }
        sum += eval(t) + eval(-t);
        k += 1;
    }
    let mut h = 1.0;
    let mut prev = sum * h * half;
    let mut last_err = f64::NAN;
    for level in 1..=MAX_LEVEL {
        h *= 0.5;
        let mut t = h;
        let mut add = 0.0;
        while t <= T_MAX {
            add += eval(t) + eval(-t);
            t += 2.0 * h;
        }
        sum += add;
        let cur = sum * h * half;
        if !cur.is_finite() {
            return Err(Error::Quadrature("non-finite integrand in tanh-sinh".into()));
        }
        let err = (cur - prev).abs();
        if level >= 3 && err <= abs_tol.max(rel_tol * cur.abs()) {
            return Ok(Estimate { value: cur, error: err });
        }
        last_err = err;
        prev = cur;
    }
    Err(Error::Quadrature(format!(
        "tanh-sinh on [{a}, {b}] stalled at {prev:e} with level change {last_err:e}"
    )))
}

/// Integral over (0, inf) through x = scale * s / (1 - s) and tanh-sinh in s.
pub fn half_line<F: Fn(f64) -> f64>(f: F, scale: f64, abs_tol: f64, rel_tol: f64) -> Result<Estimate> {
    tanh_sinh(
        |s, _, sc| {
            let x = scale * s / sc;
            if !x.is_finite() {
                return 0.0;
            }
            let v = f(x);
            // far tail: the integrand has underflowed and its factors may not be finite
            if v == 0.0 || (!v.is_finite() && x > 1e6 * scale) {
                0.0
            } else {
                v * scale / (sc * sc)
            }
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
    )
}

/// Integral over (0, inf): tanh-sinh on `[0, scale]` for the endpoint, then
/// adaptive Gauss-Kronrod on doubling panels until two panels in a row are
/// negligible. Suited to oscillating integrands with exponential decay.
pub fn half_line_panels<F: Fn(f64) -> f64>(f: F, scale: f64, abs_tol: f64, rel_tol: f64) -> Result<Estimate> {
    let guarded = |x: f64| {
        let v = f(x);
        if v.is_finite() || x < 1e6 * scale {
            v
        } else {
            0.0
        }
    };
    let head = tanh_sinh(|x, _, _| guarded(x), 0.0, scale, abs_tol, rel_tol)?;
    let (mut value, mut error) = (head.value, head.error);
    let mut quiet = 0;
    let mut lo = scale;
    for _ in 0..64 {
        let hi = 2.0 * lo;
        let tol = abs_tol.max(rel_tol * value.abs());
        let piece = adaptive_gk(guarded, lo, hi, 0.25 * tol, 0.25 * rel_tol, 4000)?;
        value += piece.value;
        error += piece.error;
        if piece.value.abs() <= 1e-3 * tol {
            quiet += 1;
            if quiet == 2 {
                return Ok(Estimate { value, error });
            }
        } else {
            quiet = 0;
        }
        lo = hi;
    }
    Err(Error::Quadrature(format!("half-line integrand has not decayed by {lo:e}")))
}
