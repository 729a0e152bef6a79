//! Generalized Weierstrass product `W_phi`, the constant `gamma_phi`, Mellin
//! transforms of the invariant law and of the exponential functional, and
//! the decay envelope used to truncate inversion contours.

use crate::error::{Error, Result};
use crate::levy_model::LevyModel;
use crate::quadrature::{adaptive_gk, gauss_legendre};
use crate::special::{ln_gamma, KahanSum, KahanSumC};
use num_complex::Complex64 as C64;
use std::sync::OnceLock;

const WARM_TERMS: usize = 1 << 14;

fn unit_legendre() -> &'static (Vec<f64>, Vec<f64>) {
    static NODES: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    NODES.get_or_init(|| {
        let (x, w) = gauss_legendre(20);
        (x.iter().map(|x| 0.5 * (x + 1.0)).collect(), w.iter().map(|w| 0.5 * w).collect())
    })
}

/// Cached evaluator of `W_phi` for one model.
#[derive(Debug, Clone)]
pub struct SpectralContext {
    model: LevyModel,
    product_terms_cap: usize,
    tol: f64,
    contour_a: f64,
    // ln phi(k) at index k - 1, and running sums of the same
    ln_phi_k: Vec<f64>,
    ln_phi_prefix: Vec<f64>,
}

impl SpectralContext {
    pub fn new(model: &LevyModel) -> Result<Self> {
        Self::with_options(model, 1_000_000, 1e-10, 1.0)
    }

    pub fn with_options(model: &LevyModel, product_terms_cap: usize, tol: f64, contour_a: f64) -> Result<Self> {
        if !(contour_a > model.d_phi()) {
            return Err(Error::Domain(format!(
                "contour abscissa {contour_a} must exceed d_phi = {}",
                model.d_phi()
            )));
        }
        if !(tol > 0.0) || product_terms_cap < 64 {
            return Err(Error::Config("tolerance must be positive and the term cap at least 64".into()));
        }
        let mut ln_phi_k = Vec::with_capacity(WARM_TERMS);
        let mut ln_phi_prefix = Vec::with_capacity(WARM_TERMS);
        let mut acc = KahanSum::new();
        for k in 1..=WARM_TERMS {
            let l = model.ln_phi(C64::new(k as f64, 0.0)).re;
            acc.add(l);
            ln_phi_k.push(l);
            ln_phi_prefix.push(acc.value());
        }
        Ok(SpectralContext {
            model: model.clone(),
            product_terms_cap,
            tol,
            contour_a,
            ln_phi_k,
            ln_phi_prefix,
        })
    }

    pub fn model(&self) -> &LevyModel {
        &self.model
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn contour_a(&self) -> f64 {
        self.contour_a
    }

    fn ln_phi_int(&self, k: usize) -> f64 {
        if (1..=WARM_TERMS).contains(&k) {
            self.ln_phi_k[k - 1]
        } else {
            self.model.ln_phi(C64::new(k as f64, 0.0)).re
        }
    }

    /// `W_phi(n + 1) = phi(1) phi(2) ... phi(n)` by the direct product.
    pub fn invariant_moment(&self, n: usize) -> f64 {
        let mut w = 1.0;
        for k in 1..=n {
            w *= self.model.phi_real(k as f64);
        }
        w
    }

    /// `ln W_phi(n + 1)` from the cached running sums.
    pub fn ln_w_int(&self, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else if n <= WARM_TERMS {
            self.ln_phi_prefix[n - 1]
        } else {
            let mut acc = KahanSum::new();
            acc.add(self.ln_phi_prefix[WARM_TERMS - 1]);
            for k in WARM_TERMS + 1..=n {
                acc.add(self.ln_phi_int(k));
            }
            acc.value()
        }
    }

    /// `gamma_phi = lim sum_{k<=N} phi'(k)/phi(k) - ln phi(N)`.
    pub fn gamma_phi(&self) -> Result<f64> {
        let dlog = |u: f64| -> Result<(f64, f64)> {
            let p = self.model.phi_real(u);
            let d1 = self.model.phi_derivative(u, 1)? / p;
            let d2 = self.model.phi_derivative(u, 2)? / p - d1 * d1;
            Ok((d1, d2))
        };
        let mut acc = KahanSum::new();
        let mut n = 0usize;
        let mut target = 1024usize;
        let mut prev: Option<f64> = None;
        loop {
            while n < target {
                n += 1;
                acc.add(dlog(n as f64)?.0);
            }
            let (d1, d2) = dlog(n as f64)?;
            let est = acc.value() - self.ln_phi_int(n) - 0.5 * d1 - d2 / 12.0;
            if let Some(p) = prev {
                if (est - p).abs() <= self.tol {
                    return Ok(est);
                }
            }
            prev = Some(est);
            target *= 2;
            if target > self.product_terms_cap {
                return Err(Error::Convergence(format!("gamma_phi unsettled at N = {n}")));
            }
        }
    }

    /// Principal-branch-consistent `ln W_phi(z)` for `Re z > d_phi`.
    pub fn log_w(&self, z: C64) -> Result<C64> {
        let d = self.model.d_phi();
        if !(z.re > d) || !z.im.is_finite() {
            return Err(Error::Domain(format!("Re z = {} must exceed d_phi = {d}", z.re)));
        }
        if z == C64::new(1.0, 0.0) {
            return Ok(C64::new(0.0, 0.0));
        }
        // move to Re z >= 1 through W(z) = W(z + 1) / phi(z)
        let mut zz = z;
        let mut shift = KahanSumC::default();
        while zz.re < 1.0 {
            let p = self.model.phi(zz);
            if p.norm() == 0.0 || !p.re.is_finite() {
                return Err(Error::Domain(format!("phi vanishes at {zz} on the shift path")));
            }
            shift.add(self.model.ln_phi(zz));
            zz += 1.0;
        }
        Ok(self.log_w_right(zz)? - shift.value())
    }

    fn log_w_right(&self, z: C64) -> Result<C64> {
        let model = &self.model;
        let g_z = model.ln_phi(z);
        let mut head = KahanSumC::default();
        let mut n = 0usize;
        let mut target = 256usize.max((16.0 * z.norm()).ceil() as usize);
        let mut prev: Option<C64> = None;
        let (tn, tw) = unit_legendre();
        loop {
            if target > self.product_terms_cap {
                return Err(Error::Convergence(format!(
                    "product for W({z}) needs more than {} terms",
                    self.product_terms_cap
                )));
            }
            while n < target {
                n += 1;
                let k = n as f64;
                head.add(C64::new(self.ln_phi_int(n), 0.0) - model.ln_phi(z + k));
            }
            let nf = n as f64;
            let g_n = self.ln_phi_int(n);
            // Euler-Maclaurin remainder of the tail sum
            let mut seg = KahanSumC::default();
            for (t, w) in tn.iter().zip(tw) {
                seg.add((model.ln_phi(z * *t + nf) - g_n) * *w);
            }
            let integral = seg.value() * z;
            let h = C64::new(g_n, 0.0) - model.ln_phi(z + nf);
            let dh = model.dln_phi(C64::new(nf, 0.0)) - model.dln_phi(z + nf);
            let est = -g_z + head.value() + z * g_n + integral - h * 0.5 - dh / 12.0;
            if let Some(p) = prev {
                if (est - p).norm() <= self.tol {
                    return Ok(est);
                }
            }
            prev = Some(est);
            target *= 2;
        }
    }

    pub fn mellin_v(&self, z: C64) -> Result<C64> {
        Ok(self.log_w(z)?.exp())
    }

    /// Mellin transform of the exponential functional, `Gamma(z) / W_phi(z)`.
    pub fn mellin_i(&self, z: C64) -> Result<C64> {
        if !(z.re > 0.0) {
            return Err(Error::Domain(format!("Re z = {} must be positive", z.re)));
        }
        Ok((ln_gamma(z) - self.log_w(z)?).exp())
    }

    /// `G(u) = int_1^u ln phi(r) dr`.
    pub fn asymp_g(&self, u: f64) -> Result<f64> {
        if !(u >= 1.0) {
            return Err(Error::Domain(format!("G needs u >= 1, got {u}")));
        }
        if u == 1.0 {
            return Ok(0.0);
        }
        let est = adaptive_gk(|r| self.model.ln_phi(C64::new(r, 0.0)).re, 1.0, u, 1e-13, 1e-13, 2000)?;
        Ok(est.value)
    }

    /// Smallest height `B` at which the decay envelope of `|W(a + iB)|`
    /// drops below `tol`.
    pub fn contour_truncation(&self, a: f64, tol: f64) -> Result<f64> {
        self.contour_height(a, tol, 0)
    }

    /// As [`Self::contour_truncation`], with the envelope multiplied by the
    /// growth `(|a + iB| + degree)^degree` of a polynomial factor.
    pub fn contour_height(&self, a: f64, tol: f64, degree: usize) -> Result<f64> {
        if !(a > 0.0 && a > self.model.d_phi()) {
            return Err(Error::Domain(format!("contour abscissa {a} must be positive and exceed d_phi")));
        }
        let wa = self.mellin_v(C64::new(a, 0.0))?.re;
        let pa = self.model.phi_real(a);
        let grow = (19.0 / (8.0 * a)).exp();
        let envelope = |b: f64| -> Result<f64> {
            let theta = self.model.theta_phi(a, b, 1e-7)?;
            let poly = (a.hypot(b) + degree as f64).powi(degree as i32);
            Ok((pa / self.model.phi(C64::new(a, b)).norm()).sqrt() * wa * (-b * theta).exp() * grow * poly)
        };
        let mut hi = 1.0;
        while envelope(hi)? > tol {
            hi *= 2.0;
            if hi > 1e6 {
                return Err(Error::UnboundedContour { height: 1e6 });
            }
        }
        let mut lo = 0.5 * hi;
        if hi == 1.0 {
            return Ok(hi);
        }
        for _ in 0..12 {
            let mid = 0.5 * (lo + hi);
            if envelope(mid)? > tol {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_model::{ExpComponent, JumpFamily};
    use crate::special::ln_gamma_real;

    const EULER: f64 = 0.577_215_664_901_532_9;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn grid() -> Vec<C64> {
        let mut g = Vec::new();
        for &a in &[0.5, 1.0, 2.0, 3.5, 5.0] {
            for &b in &[0.0, 1.0, -1.0, 5.0, -5.0] {
                g.push(C64::new(a, b));
            }
        }
        g
    }

    #[test]
    fn gamma_recovery() {
        let ctx = SpectralContext::new(&LevyModel::classical(0.0).unwrap()).unwrap();
        for z in grid() {
            let w = ctx.mellin_v(z).unwrap();
            let g = ln_gamma(z).exp();
            assert!((w - g).norm() / g.norm() < 1e-10, "{z}: {w} vs {g}");
        }
        assert!((ctx.log_w(c(4.0)).unwrap().re - 6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn log_w_examples() {
        let lag = SpectralContext::new(&LevyModel::classical(1.0).unwrap()).unwrap();
        assert!((lag.log_w(c(3.0)).unwrap().re - 6f64.ln()).abs() < 1e-11);
        let sp = SpectralContext::new(&LevyModel::small_perturbation(2.0).unwrap()).unwrap();
        assert!((sp.log_w(c(3.0)).unwrap().re - 10f64.ln()).abs() < 1e-11);
        assert!((sp.invariant_moment(2) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn empty_family_closed_form() {
        // W(z) = s^{z-1} Gamma(z + m/s) / Gamma(1 + m/s) for phi(u) = s u + m
        let (s, m) = (2.5, 0.7);
        let ctx = SpectralContext::new(&LevyModel::new(s, m, JumpFamily::Empty).unwrap()).unwrap();
        let r = m / s;
        for z in grid() {
            let exact = ((z - 1.0) * s.ln() + ln_gamma(z + r) - ln_gamma_real(1.0 + r)).exp();
            let w = ctx.mellin_v(z).unwrap();
            assert!((w - exact).norm() / exact.norm() < 1e-10, "{z}");
        }
    }

    fn rational_roots(model: &LevyModel, poles: &[f64]) -> Vec<f64> {
        // one simple root left of 0 between consecutive poles, plus one left of the last
        let mut edges = vec![0.0];
        edges.extend(poles.iter().map(|b| -b));
        edges.push(-1e3);
        let mut roots = Vec::new();
        for w in edges.windows(2) {
            let (mut hi, mut lo) = (w[0] - 1e-12, w[1] + 1e-12);
            let f = |u: f64| model.phi_real(u);
            if f(hi).signum() == f(lo).signum() {
                continue;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f(mid).signum() == f(hi).signum() {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        roots
    }

    #[test]
    fn rational_family_gamma_products() {
        let model = LevyModel::new(
            1.0,
            0.5,
            JumpFamily::ExpMixture {
                components: vec![ExpComponent { c: 1.0, b: 1.0 }, ExpComponent { c: 2.0, b: 3.0 }],
            },
        )
        .unwrap();
        let roots = rational_roots(&model, &[1.0, 3.0]);
        assert_eq!(roots.len(), 3);
        let ctx = SpectralContext::new(&model).unwrap();
        for z in grid() {
            let mut l = C64::new(0.0, 0.0);
            for &r in &roots {
                l += ln_gamma(z - r) - ln_gamma_real(1.0 - r);
            }
            for &b in &[1.0, 3.0] {
                l += ln_gamma_real(1.0 + b) - ln_gamma(z + b);
            }
            let w = ctx.mellin_v(z).unwrap();
            assert!((w - l.exp()).norm() / l.exp().norm() < 1e-9, "{z}");
        }
    }

    #[test]
    fn gauss_laguerre_closed_form() {
        let (alpha, mf) = (0.5, 1.0);
        let ctx = SpectralContext::new(&LevyModel::gauss_laguerre(alpha, mf).unwrap()).unwrap();
        for z in grid() {
            let exact = (ln_gamma(z * alpha + alpha * mf + 1.0 - alpha) - ln_gamma_real(alpha * mf + 1.0)).exp();
            let w = ctx.mellin_v(z).unwrap();
            assert!((w - exact).norm() / exact.norm() < 1e-10, "{z}: {w} {exact}");
        }
        // left of the origin, down toward d_phi = -2
        let z = C64::new(-1.5, 0.3);
        let exact = (ln_gamma(z * alpha + alpha * mf + 1.0 - alpha) - ln_gamma_real(alpha * mf + 1.0)).exp();
        assert!((ctx.mellin_v(z).unwrap() - exact).norm() / exact.norm() < 1e-10);
    }

    #[test]
    fn functional_equation_presets() {
        let models = [
            LevyModel::classical(1.0).unwrap(),
            LevyModel::small_perturbation(2.0).unwrap(),
            LevyModel::gauss_laguerre(0.5, 1.0).unwrap(),
            LevyModel::sawtooth(0.5, 1.0).unwrap(),
        ];
        for model in &models {
            let ctx = SpectralContext::new(model).unwrap();
            for z in grid() {
                let w1 = ctx.mellin_v(z + 1.0).unwrap();
                let w0 = ctx.mellin_v(z).unwrap();
                let res = (w1 - model.phi(z) * w0).norm() / w1.norm();
                assert!(res < 1e-10, "{z}: {res}");
            }
        }
    }

    #[test]
    fn gamma_phi_values() {
        let bm = SpectralContext::new(&LevyModel::classical(0.0).unwrap()).unwrap();
        assert!((bm.gamma_phi().unwrap() - EULER).abs() < 1e-9);
        // phi(u) = u + 1: partial sums of 1/(k+1) - ln(N+1), tail corrected to second order
        let n = 1_000_000usize;
        let mut acc = KahanSum::new();
        for k in 1..=n {
            acc.add(1.0 / (k as f64 + 1.0));
        }
        let x = n as f64 + 1.0;
        let oracle = acc.value() - x.ln() - 0.5 / x + 1.0 / (12.0 * x * x);
        assert!((oracle - (EULER - 1.0)).abs() < 1e-12);
        let shifted = SpectralContext::new(&LevyModel::classical(1.0).unwrap()).unwrap();
        assert!((shifted.gamma_phi().unwrap() - oracle).abs() < 1e-9);
        let st = LevyModel::sawtooth(0.5, 1.0).unwrap();
        let g = SpectralContext::new(&st).unwrap().gamma_phi().unwrap();
        let p1 = st.phi_real(1.0);
        let lo = -p1.ln();
        let hi = st.phi_derivative(1.0, 1).unwrap() / p1 - p1.ln();
        assert!(g >= lo - 1e-10 && g <= hi + 1e-10, "{lo} {g} {hi}");
    }

    #[test]
    fn mellin_i_examples() {
        let lag = SpectralContext::new(&LevyModel::classical(1.0).unwrap()).unwrap();
        assert!((lag.mellin_i(c(2.0)).unwrap().re - 0.5).abs() < 1e-12);
        assert!((lag.mellin_i(c(1.0)).unwrap() - 1.0).norm() < 1e-14);
        let bm = SpectralContext::new(&LevyModel::classical(0.0).unwrap()).unwrap();
        assert!((bm.mellin_i(C64::new(2.3, 1.7)).unwrap() - 1.0).norm() < 1e-10);
    }

    #[test]
    fn asymptotics_and_truncation() {
        let bm = SpectralContext::new(&LevyModel::classical(0.0).unwrap()).unwrap();
        assert!((bm.asymp_g(std::f64::consts::E).unwrap() - 1.0).abs() < 1e-12);
        let b = bm.contour_truncation(1.0, 1e-10).unwrap();
        assert!(b <= 40.0 && b > 5.0, "{b}");
        let sp_model = LevyModel::small_perturbation(2.0).unwrap();
        let sp = SpectralContext::new(&sp_model).unwrap();
        let ratio = |u: f64| {
            sp.ln_w_int(u as usize) - 0.5 * sp_model.phi_real(u).ln() - sp.asymp_g(u).unwrap()
        };
        let (r20, r60) = (ratio(20.0), ratio(60.0));
        assert!((r60 - r20).exp() - 1.0 < 0.02 && (r20 - r60).exp() - 1.0 < 0.02);
        let st = SpectralContext::new(&LevyModel::sawtooth(0.5, 1.0).unwrap()).unwrap();
        assert!(matches!(st.contour_truncation(1.0, 1e-10), Err(Error::UnboundedContour { .. })));
    }

    #[test]
    fn modulus_bounded_by_real_axis() {
        let gl = SpectralContext::new(&LevyModel::gauss_laguerre(0.5, 1.0).unwrap()).unwrap();
        for &a in &[0.5, 1.0, 3.0] {
            let wa = gl.mellin_v(c(a)).unwrap().re;
            for &b in &[0.5, 3.0, 20.0] {
                let w = gl.mellin_v(C64::new(a, b)).unwrap();
                assert!(w.norm() <= wa * (1.0 + 1e-12));
                let wc = gl.mellin_v(C64::new(a, -b)).unwrap();
                assert!((wc - w.conj()).norm() <= 1e-12 * w.norm().max(1e-300));
            }
        }
    }

    #[test]
    fn domain_errors() {
        let sp = SpectralContext::new(&LevyModel::small_perturbation(2.0).unwrap()).unwrap();
        assert!(sp.log_w(c(-1.0)).is_err());
        assert!(sp.log_w(c(-0.5)).is_ok());
        assert!(SpectralContext::with_options(&LevyModel::classical(0.0).unwrap(), 1000, 1e-10, 0.0).is_err());
    }
}
