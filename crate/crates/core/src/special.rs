//! Gamma-family special functions on the complex plane, plus a few
//! accurate elementary helpers used throughout the crate.

use num_complex::Complex64 as C64;
use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
// published digits kept as printed
#[allow(clippy::excessive_precision)]
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

// B_{2k}/(2k(2k-1)) for k = 1..8, Stirling series for ln Gamma.
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

// B_{2k}/(2k) for k = 1..7, asymptotic digamma.
const DIGAMMA_ASYM: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32_760.0,
    1.0 / 12.0,
];

// B_{2k} for k = 1..7, asymptotic trigamma.
const BERNOULLI_EVEN: [f64; 7] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
];

/// `ln sin(pi z)`, safe for large imaginary parts.
pub fn ln_sin_pi(z: C64) -> C64 {
    if z.im.abs() < 15.0 {
        return (z * PI).sin().ln();
    }
    // sin(pi z) = e^{-i pi z} (e^{2 i pi z} - 1) / (2i) for Im z > 0, mirrored below.
    if z.im > 0.0 {
        let q = (C64::i() * 2.0 * PI * z).exp();
        -C64::i() * PI * z + ln1p_c(-q) + C64::new(-std::f64::consts::LN_2, PI / 2.0)
    } else {
        ln_sin_pi(z.conj()).conj()
    }
}

/// Logarithm of the Gamma function; real part exact, imaginary part
/// defined modulo 2 pi away from the positive real axis.
pub fn ln_gamma(z: C64) -> C64 {
    if z.re < 0.5 {
        return C64::new(PI.ln(), 0.0) - ln_sin_pi(z) - ln_gamma(C64::new(1.0, 0.0) - z);
    }
    if z.norm() > 20.0 {
        return ln_gamma_stirling(z);
    }
    let z = z - 1.0;
    let mut x = C64::new(LANCZOS_COEF[0], 0.0);
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    C64::new(LN_SQRT_2PI, 0.0) + (z + 0.5) * t.ln() - t + x.ln()
}

fn ln_gamma_stirling(z: C64) -> C64 {
    let inv = z.inv();
    let inv2 = inv * inv;
    let mut series = C64::new(0.0, 0.0);
    let mut p = inv;
    for &c in STIRLING.iter() {
        series += p * c;
        p *= inv2;
    }
    (z - 0.5) * z.ln() - z + LN_SQRT_2PI + series
}

pub fn ln_gamma_real(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    ln_gamma(C64::new(x, 0.0)).re
}

pub fn gamma_real(x: f64) -> f64 {
    if x > 0.0 {
        ln_gamma_real(x).exp()
    } else {
        // reflection; caller keeps away from poles
        PI / ((PI * x).sin() * gamma_real(1.0 - x))
    }
}

/// `ln Gamma(a) - ln Gamma(a - delta)` without the cancellation that the
/// plain difference suffers for large `|a|`.
pub fn ln_gamma_ratio(a: C64, delta: f64) -> C64 {
    if a.norm() >= 20.0 && (a - delta).re > 1.0 {
        let b = a - delta;
        let mut d = (a - 0.5) * (-ln1p_c(-delta / a)) + b.ln() * delta - delta;
        let (ia, ib) = (a.inv(), b.inv());
        let (ia2, ib2) = (ia * ia, ib * ib);
        let (mut pa, mut pb) = (ia, ib);
        for &c in STIRLING.iter() {
            d += (pa - pb) * c;
            pa *= ia2;
            pb *= ib2;
        }
        d
    } else {
        ln_gamma(a) - ln_gamma(a - delta)
    }
}

pub fn cot_pi(z: C64) -> C64 {
    if z.im.abs() < 15.0 {
        let s = (z * PI).sin();
        return (z * PI).cos() / s;
    }
    if z.im > 0.0 {
        let q = (C64::i() * 2.0 * PI * z).exp();
        C64::i() * (q + 1.0) / (q - 1.0)
    } else {
        cot_pi(z.conj()).conj()
    }
}

pub fn digamma(z: C64) -> C64 {
    if z.re < 0.5 {
        return digamma(C64::new(1.0, 0.0) - z) - cot_pi(z) * PI;
    }
    let mut z = z;
    let mut acc = C64::new(0.0, 0.0);
    while z.norm() < 12.0 {
        acc -= z.inv();
        z += 1.0;
    }
    let inv = z.inv();
    let inv2 = inv * inv;
    let mut series = C64::new(0.0, 0.0);
    let mut p = inv2;
    for &c in DIGAMMA_ASYM.iter() {
        series += p * c;
        p *= inv2;
    }
    acc + z.ln() - inv * 0.5 - series
}

pub fn digamma_real(x: f64) -> f64 {
    digamma(C64::new(x, 0.0)).re
}

pub fn trigamma_real(x: f64) -> f64 {
    if x < 0.5 {
        let s = (PI * x).sin();
        return -trigamma_real(1.0 - x) + PI * PI / (s * s);
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < 12.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut p = inv2 * inv;
    for &b in BERNOULLI_EVEN.iter() {
        series += b * p;
        p *= inv2;
    }
    acc + inv + 0.5 * inv2 + series
}

/// `ln(1 + w)` accurate for small `|w|`.
pub fn ln1p_c(w: C64) -> C64 {
    let re = 0.5 * (2.0 * w.re + w.re * w.re + w.im * w.im).ln_1p();
    let im = w.im.atan2(1.0 + w.re);
    C64::new(re, im)
}

/// `exp(w) - 1` accurate for small `|w|`.
pub fn expm1_c(w: C64) -> C64 {
    let em1 = w.re.exp_m1();
    let half = (0.5 * w.im).sin();
    let cos_m1 = -2.0 * half * half;
    let ea = em1 + 1.0;
    C64::new(em1 * w.im.cos() + cos_m1, ea * w.im.sin())
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSumC {
    re: KahanSum,
    im: KahanSum,
}

impl KahanSumC {
    pub fn add(&mut self, z: C64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> C64 {
        C64::new(self.re.value(), self.im.value())
    }
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Compensated Horner evaluation of `sum coeffs[k] x^k`; behaves as if the
/// accumulation were carried in twice the working precision.
pub fn horner_compensated(coeffs: &[f64], x: f64) -> f64 {
    let Some((&last, rest)) = coeffs.split_last() else {
        return 0.0;
    };
    let mut s = last;
    let mut c = 0.0;
    for &a in rest.iter().rev() {
        let (p, pe) = two_prod(s, x);
        let (t, se) = two_sum(p, a);
        s = t;
        c = c * x + (pe + se);
    }
    s + c
}

/// Generalized Laguerre polynomial `L_n^(a)(x)` by the forward recurrence.
pub fn laguerre(n: usize, a: f64, x: f64) -> f64 {
    let (mut l0, mut l1) = (1.0, 1.0 + a - x);
    if n == 0 {
        return l0;
    }
    for k in 1..n {
        let kf = k as f64;
        let l2 = ((2.0 * kf + 1.0 + a - x) * l1 - (kf + a) * l0) / (kf + 1.0);
        l0 = l1;
        l1 = l2;
    }
    l1
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut r = 1.0;
    for j in 0..k {
        r = r * (n - j) as f64 / (j + 1) as f64;
    }
    r.round()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: C64, b: C64) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn gamma_at_integers_and_half() {
        let mut f = 1.0;
        for n in 1..30 {
            assert!((ln_gamma_real(n as f64) - f64::ln(f)).abs() < 1e-12 * f64::ln(f).abs().max(1.0));
            f *= n as f64;
        }
        assert!((gamma_real(0.5) - PI.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn gamma_recurrence_complex() {
        for &(x, y) in &[(0.3, 0.2), (1.5, -4.0), (3.0, 10.0), (25.0, 3.0), (-2.3, 0.7), (0.5, 40.0)] {
            let z = C64::new(x, y);
            let lhs = (ln_gamma(z + 1.0) - ln_gamma(z)).exp();
            assert!(rel(lhs, z) < 1e-12, "{z}");
        }
    }

    #[test]
    fn abs_gamma_on_imaginary_line() {
        // |Gamma(ib)|^2 = pi / (b sinh(pi b))
        for &b in &[0.5, 2.0, 7.0, 20.0] {
            let v = ln_gamma(C64::new(0.0, b)).re;
            let exact = 0.5 * (PI / (b * (PI * b).sinh())).ln();
            assert!((v - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn ratio_matches_difference() {
        for &(x, y) in &[(25.0, 0.0), (30.0, 7.0), (1e6, 3.0), (50.0, -60.0)] {
            let a = C64::new(x, y);
            let r = ln_gamma_ratio(a, 0.5);
            let d = ln_gamma(a) - ln_gamma(a - 0.5);
            assert!((r - d).norm() < 1e-9 * d.norm().max(1.0));
        }
    }

    #[test]
    fn digamma_values() {
        let euler = 0.577_215_664_901_532_9;
        assert!((digamma_real(1.0) + euler).abs() < 1e-14);
        assert!((digamma_real(0.5) + euler + 2.0 * 2f64.ln()).abs() < 1e-13);
        let z = C64::new(2.5, 3.0);
        assert!((digamma(z + 1.0) - digamma(z) - z.inv()).norm() < 1e-13);
        assert!((trigamma_real(1.0) - PI * PI / 6.0).abs() < 1e-13);
        assert!((trigamma_real(0.3) - trigamma_real(1.3) - 1.0 / 0.09).abs() < 1e-11);
    }

    #[test]
    fn compensated_horner_beats_cancellation() {
        // (x - 1)^8 expanded, evaluated near its root
        let c = [1.0, -8.0, 28.0, -56.0, 70.0, -56.0, 28.0, -8.0, 1.0];
        let x = 1.0 + 1e-3;
        let v = horner_compensated(&c, x);
        assert!((v - 1e-24).abs() < 1e-30);
    }
}
