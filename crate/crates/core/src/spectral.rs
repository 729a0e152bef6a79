//! Eigenpolynomials, co-eigenfunctions, Gram matrices, heat-kernel and
//! semigroup partial sums, norm tables and convergence-rate diagnostics.

use crate::error::{Error, Result};
use crate::invariant_density::DensityEvaluator;
use crate::levy_model::{JumpFamily, LevyModel};
use crate::quadrature::{tanh_sinh, Estimate};
use crate::special::{binomial, horner_compensated, ln_gamma_real, KahanSum};
use crate::weierstrass::SpectralContext;
use rayon::prelude::*;
use std::sync::Arc;

/// Partial integrals beyond this value certify divergence.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;

/// Eigenpolynomial coefficients in the monomial basis.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub n: usize,
    pub p_coeffs: Vec<f64>,
}

impl EigenPair {
    pub fn eval(&self, x: f64) -> f64 {
        horner_compensated(&self.p_coeffs, x)
    }
}

/// `P_n` coefficients `(-1)^k C(n,k) / W(k+1)`.
pub fn eigen_poly(ctx: &SpectralContext, n: usize) -> EigenPair {
    // running ratio p_k = -p_{k-1} (n-k+1) / (k phi(k)): a few ulps at most,
    // where exp(ln C - ln W) loses digits in proportion to the log
    let model = ctx.model();
    let mut p_coeffs = Vec::with_capacity(n + 1);
    let mut p = 1.0f64;
    p_coeffs.push(p);
    for k in 1..=n {
        p *= -((n - k + 1) as f64) / (k as f64 * model.phi_real(k as f64));
        if !p.is_normal() {
            return eigen_poly_logs(ctx, n);
        }
        p_coeffs.push(p);
    }
    EigenPair { n, p_coeffs }
}

/// Log-domain fallback for degrees where the running ratio leaves the
/// normal range.
fn eigen_poly_logs(ctx: &SpectralContext, n: usize) -> EigenPair {
    let ln_fact = |j: usize| ln_gamma_real(j as f64 + 1.0);
    let p_coeffs = (0..=n)
        .map(|k| {
            let ln_c = ln_fact(n) - ln_fact(k) - ln_fact(n - k);
            let v = (ln_c - ctx.ln_w_int(k)).exp();
            if k % 2 == 1 {
                -v
            } else {
                v
            }
        })
        .collect();
    EigenPair { n, p_coeffs }
}

/// Same coefficients through the perturbed three-term recurrence, where the
/// perturbation involves the eigenpolynomial of `u phi(u+1) / (u+1)`, whose
/// moments are `W(k+2) / ((k+1) phi(1))`.
pub fn eigen_poly_recurrence(ctx: &SpectralContext, n: usize) -> Vec<f64> {
    let phi1 = ctx.model().phi_real(1.0);
    let w = |k: usize| ctx.ln_w_int(k).exp();
    let mut prev2: Vec<f64> = Vec::new();
    let mut prev: Vec<f64> = vec![1.0];
    for j in 1..=n {
        let jf = j as f64;
        let mut next = vec![0.0; j + 1];
        for (k, c) in prev.iter().enumerate() {
            next[k] += (2.0 - 1.0 / jf) * c;
        }
        for (k, c) in prev2.iter().enumerate() {
            next[k] -= (1.0 - 1.0 / jf) * c;
        }
        for k in 0..j {
            let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
            let shifted_w = w(k + 1) / ((k + 1) as f64 * phi1);
            let t1 = sign * binomial(j - 1, k) / shifted_w;
            next[k + 1] -= t1 / (jf * phi1);
        }
        prev2 = std::mem::replace(&mut prev, next);
    }
    prev
}

/// Threshold below which the expansions are not trusted.
pub fn t_min(model: &LevyModel) -> Result<f64> {
    if model.scalars().flags.n_p {
        return Ok(0.0);
    }
    if let JumpFamily::GaussLaguerre { alpha, .. } = model.jumps() {
        if *alpha < 1.0 {
            return Ok(-(2f64.powf(*alpha) - 1.0).ln());
        }
    }
    let ctx = SpectralContext::new(model)?;
    // without a finite truncation height the expansion is never trusted
    let b_star = match ctx.contour_truncation(1.0, 1e-10) {
        Err(Error::UnboundedContour { .. }) => return Ok(f64::INFINITY),
        other => other?,
    };
    let theta = model.theta_phi(1.0, b_star, 1e-10)?;
    Ok(-theta.sin().ln())
}

/// Whether the `n`-th co-eigenfunction is square integrable against `nu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    InL2,
    NotInL2,
}

pub fn membership(model: &LevyModel, n: usize) -> Membership {
    let sc = model.scalars();
    if n == 0 || !sc.flags.n_inf_c {
        return Membership::InL2;
    }
    // V_n^2 nu behaves like (rho - x)^{pibar/rho - 1 - 2n} at the edge
    if (n as f64) < sc.pibar0 / (2.0 * sc.rho) {
        Membership::InL2
    } else {
        Membership::NotInL2
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionConfig {
    pub n_max: usize,
    pub t_min: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

/// Partial value of an endpoint-refined integral.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicReport {
    pub partials: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormsRow {
    pub n: usize,
    pub norm_p: f64,
    pub norm_v: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormsReport {
    pub rows: Vec<NormsRow>,
    /// Least-squares slope of `ln ||V_n||^2` against `ln n` over `[N/2, N]`.
    pub v_sq_slope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport {
    pub gap: f64,
    pub gap_quadrature: f64,
    pub bound: f64,
    pub mbar: f64,
}

/// Heat-kernel partial sum and the size of its last term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: f64,
    pub last_term: f64,
}

/// Spectral toolkit bound to one model.
#[derive(Debug)]
pub struct Spectral {
    ctx: Arc<SpectralContext>,
    density: DensityEvaluator,
    config: ExpansionConfig,
}

impl Spectral {
    pub fn new(model: &LevyModel) -> Result<Self> {
        let ctx = Arc::new(SpectralContext::new(model)?);
        let density = DensityEvaluator::with_context(ctx.clone())?;
        Self::from_parts(ctx, density)
    }

    pub fn from_parts(ctx: Arc<SpectralContext>, density: DensityEvaluator) -> Result<Self> {
        let config = ExpansionConfig { n_max: 40, t_min: t_min(ctx.model())?, abs_tol: 1e-11, rel_tol: 1e-11 };
        Ok(Spectral { ctx, density, config })
    }

    pub fn with_config(mut self, config: ExpansionConfig) -> Result<Self> {
        if !(config.t_min >= 0.0) {
            return Err(Error::Config("t_min must be nonnegative".into()));
        }
        self.config = config;
        Ok(self)
    }

    pub fn config(&self) -> &ExpansionConfig {
        &self.config
    }

    pub fn context(&self) -> &SpectralContext {
        &self.ctx
    }

    pub fn density(&self) -> &DensityEvaluator {
        &self.density
    }

    pub fn model(&self) -> &LevyModel {
        self.ctx.model()
    }

    pub fn eigen_pair(&self, n: usize) -> EigenPair {
        eigen_poly(&self.ctx, n)
    }

    fn w(&self, k: usize) -> f64 {
        self.ctx.ln_w_int(k).exp()
    }

    /// `V_n(x) = w_n(x) / nu(x)`, refusing orders that leave `L^2(nu)`.
    pub fn coeigen_eval(&self, n: usize, x: f64) -> Result<f64> {
        if membership(self.model(), n) == Membership::NotInL2 {
            return Err(Error::Membership(n));
        }
        self.coeigen_unchecked(n, x, None)
    }

    /// `V_n(x)` without the membership check, for certification work.
    pub fn coeigen_unchecked(&self, n: usize, x: f64, to_edge: Option<f64>) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::Support(x));
        }
        self.density.coeigen_ratio(n, x, to_edge)
    }

    fn w_at(&self, n: usize, x: f64, to_edge: f64) -> Result<f64> {
        if to_edge.is_finite() {
            self.density.w_n_near_edge(n, x, to_edge)
        } else {
            self.density.w_n(n, x)
        }
    }

    fn nu_at(&self, x: f64, to_edge: f64) -> Result<f64> {
        if to_edge.is_finite() {
            self.density.nu_near_edge(x, to_edge)
        } else {
            self.density.nu(x)
        }
    }

    /// `int h(x, rho - x) dx` over the support, propagating evaluation errors.
    fn integrate_checked<H>(&self, h: H) -> Result<Estimate>
    where
        H: Fn(f64, f64) -> Result<f64>,
    {
        self.integrate_tol(h, self.config.abs_tol, self.config.rel_tol)
    }

    fn integrate_tol<H>(&self, h: H, abs_tol: f64, rel_tol: f64) -> Result<Estimate>
    where
        H: Fn(f64, f64) -> Result<f64>,
    {
        let slot = std::sync::Mutex::new(None);
        let est = self.density.integrate(
            |x, r| match h(x, r) {
                Ok(v) => v,
                Err(e) => {
                    slot.lock().expect("error slot").get_or_insert(e);
                    0.0
                }
            },
            abs_tol,
            rel_tol,
        )?;
        match slot.into_inner().expect("error slot") {
            Some(e) => Err(e),
            None => Ok(est),
        }
    }

    /// `<f, g>_nu`.
    pub fn inner_product<F, G>(&self, f: F, g: G) -> Result<Estimate>
    where
        F: Fn(f64) -> f64,
        G: Fn(f64) -> f64,
    {
        self.integrate_checked(|x, r| {
            let nu = self.nu_at(x, r)?;
            Ok(if nu == 0.0 { 0.0 } else { f(x) * g(x) * nu })
        })
    }

    /// Integrates `h(x, rho - x)` toward the right edge over dyadic pieces
    /// `[rho (1 - 2^{1-k}), rho (1 - 2^{-k})]`, reporting the running totals.
    /// Converges once a piece is negligible against the total.
    /// Stops with `DivergenceDetected` once a partial exceeds the threshold.
    pub fn dyadic_edge_integral<H>(&self, h: H) -> Result<DyadicReport>
    where
        H: Fn(f64, f64) -> f64,
    {
        let rho = self.density.support_upper();
        if !rho.is_finite() {
            return Err(Error::Class("dyadic edge refinement needs a bounded support".into()));
        }
        let mut partials = Vec::new();
        let mut total = KahanSum::new();
        for k in 1..=400 {
            let hi_gap = rho * 2f64.powi(-k);
            let lo_gap = 2.0 * hi_gap;
            // pieces are parametrised by the distance to the edge, which stays
            // representable long after rho - gap rounds to rho
            let piece = if k == 1 {
                tanh_sinh(|x, dl, _| h(dl, rho - x), 0.0, rho - hi_gap, 1e-17, 1e-13)?.value
            } else {
                tanh_sinh(|g, _, _| h(rho - g, g), hi_gap, lo_gap, 0.0, 1e-13)?.value
            };
            total.add(piece);
            let partial = total.value();
            partials.push(partial);
            if partial.abs() > DIVERGENCE_THRESHOLD {
                return Err(Error::DivergenceDetected { partial });
            }
            if k > 3 && piece.abs() <= 1e-17 * partial.abs() {
                return Ok(DyadicReport { partials, converged: true });
            }
        }
        Ok(DyadicReport { partials, converged: false })
    }

    /// `<V_n, V_n>_nu` by edge refinement, for orders whose membership is in question.
    pub fn coeigen_norm_sq_certified(&self, n: usize) -> Result<DyadicReport> {
        self.dyadic_edge_integral(|x, r| {
            let nu = self.density.nu_near_edge(x, r).unwrap_or(0.0);
            if nu == 0.0 {
                return 0.0;
            }
            let v = self.coeigen_unchecked(n, x, Some(r)).unwrap_or(0.0);
            v * v * nu
        })
    }

    /// `<P_n, V_m>_nu` as `int P_n w_m dx`.
    pub fn gram_entry(&self, n: usize, m: usize) -> Result<f64> {
        let p = self.eigen_pair(n);
        Ok(self.integrate_checked(|x, r| Ok(p.eval(x) * self.w_at(m, x, r)?))?.value)
    }

    pub fn gram(&self, n_max: usize) -> Result<Vec<Vec<f64>>> {
        for m in 0..=n_max {
            if membership(self.model(), m) == Membership::NotInL2 {
                return Err(Error::Membership(m));
            }
        }
        let cells: Vec<(usize, usize)> = (0..=n_max).flat_map(|n| (0..=n_max).map(move |m| (n, m))).collect();
        let values: Vec<Result<f64>> = cells.par_iter().map(|&(n, m)| self.gram_entry(n, m)).collect();
        let mut out = vec![vec![0.0; n_max + 1]; n_max + 1];
        for ((n, m), v) in cells.into_iter().zip(values) {
            out[n][m] = v?;
        }
        Ok(out)
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let t_min = self.config.t_min;
        if !(t > t_min) {
            return Err(Error::TimeBelowThreshold { t, t_min });
        }
        Ok(())
    }

    fn check_truncation(&self, n: usize) -> Result<()> {
        if n > self.config.n_max {
            return Err(Error::Config(format!("truncation {n} exceeds N_max {}", self.config.n_max)));
        }
        Ok(())
    }

    /// `sum_{n<=N} e^{-nt} P_n(x) w_n(y)`.
    pub fn heat_kernel(&self, t: f64, x: f64, y: f64, n_trunc: usize) -> Result<KernelValue> {
        self.check_time(t)?;
        self.check_truncation(n_trunc)?;
        if !(y > 0.0 && y < self.density.support_upper()) {
            return Err(Error::Support(y));
        }
        self.kernel_sum(t, x, y, f64::INFINITY, n_trunc)
    }

    fn kernel_sum(&self, t: f64, x: f64, y: f64, to_edge: f64, n_trunc: usize) -> Result<KernelValue> {
        let mut acc = KahanSum::new();
        let mut last = 0.0;
        for n in 0..=n_trunc {
            let term = (-(n as f64) * t).exp() * self.eigen_pair(n).eval(x) * self.w_at(n, y, to_edge)?;
            acc.add(term);
            last = term;
        }
        Ok(KernelValue { value: acc.value(), last_term: last.abs() })
    }

    /// `int P_t(x, y) dy` over the support.
    pub fn kernel_row_mass(&self, t: f64, x: f64, n_trunc: usize) -> Result<f64> {
        self.check_time(t)?;
        self.check_truncation(n_trunc)?;
        let pairs: Vec<EigenPair> = (0..=n_trunc).map(|n| self.eigen_pair(n)).collect();
        let px: Vec<f64> = pairs.iter().map(|p| (-(p.n as f64) * t).exp() * p.eval(x)).collect();
        Ok(self
            .integrate_checked(|y, r| {
                let mut acc = KahanSum::new();
                for (n, c) in px.iter().enumerate() {
                    acc.add(c * self.w_at(n, y, r)?);
                }
                Ok(acc.value())
            })?
            .value)
    }

    /// `<x^k, V_n>_nu = (-1)^n C(k,n) W(k+1)`; zero for `n > k`.
    pub fn monomial_coeigen_moment(&self, k: usize, n: usize) -> f64 {
        if n > k {
            return 0.0;
        }
        let v = binomial(k, n) * self.w(k);
        if n % 2 == 1 {
            -v
        } else {
            v
        }
    }

    /// `<x^k, P_n>_nu = sum_j p_{nj} W(j+k+1)`.
    pub fn monomial_eigen_moment(&self, k: usize, n: usize) -> f64 {
        let p = self.eigen_pair(n);
        let mut acc = KahanSum::new();
        for (j, c) in p.p_coeffs.iter().enumerate() {
            acc.add(c * self.w(j + k));
        }
        acc.value()
    }

    /// Expansion coefficients `<f, V_n>_nu` of a polynomial `f` (monomial coefficients).
    pub fn poly_coefficients(&self, f: &[f64], n_trunc: usize) -> Vec<f64> {
        (0..=n_trunc)
            .map(|n| {
                let mut acc = KahanSum::new();
                for (k, c) in f.iter().enumerate() {
                    if *c != 0.0 {
                        acc.add(c * self.monomial_coeigen_moment(k, n));
                    }
                }
                acc.value()
            })
            .collect()
    }

    /// `sum_{n<=N} e^{-nt} <f, V_n> P_n(x)` for a polynomial `f`.
    pub fn semigroup_apply_poly(&self, t: f64, f: &[f64], x: f64, n_trunc: usize) -> Result<f64> {
        self.check_time_or_zero(t)?;
        self.check_truncation(n_trunc)?;
        let coefs = self.poly_coefficients(f, n_trunc);
        let mut acc = KahanSum::new();
        for (n, a) in coefs.iter().enumerate() {
            if *a != 0.0 {
                acc.add((-(n as f64) * t).exp() * a * self.eigen_pair(n).eval(x));
            }
        }
        Ok(acc.value())
    }

    /// Same sum for a general `f`, with `<f, V_n>` by quadrature.
    pub fn semigroup_apply<F: Fn(f64) -> f64>(&self, t: f64, f: F, x: f64, n_trunc: usize) -> Result<f64> {
        self.check_time(t)?;
        self.check_truncation(n_trunc)?;
        let mut acc = KahanSum::new();
        for n in 0..=n_trunc {
            let a = self.integrate_checked(|y, r| Ok(f(y) * self.w_at(n, y, r)?))?.value;
            acc.add((-(n as f64) * t).exp() * a * self.eigen_pair(n).eval(x));
        }
        Ok(acc.value())
    }

    /// `sum_{n<=N} e^{-nt} <g, P_n> V_n(y)` for a polynomial `g`.
    pub fn adjoint_apply_poly(&self, t: f64, g: &[f64], y: f64, n_trunc: usize) -> Result<f64> {
        self.check_time(t)?;
        self.check_truncation(n_trunc)?;
        let mut acc = KahanSum::new();
        for n in 0..=n_trunc {
            let mut b = KahanSum::new();
            for (k, c) in g.iter().enumerate() {
                if *c != 0.0 {
                    b.add(c * self.monomial_eigen_moment(k, n));
                }
            }
            let b = b.value();
            if b != 0.0 {
                acc.add((-(n as f64) * t).exp() * b * self.coeigen_eval(n, y)?);
            }
        }
        Ok(acc.value())
    }

    // exact polynomial action is valid for every t >= 0
    fn check_time_or_zero(&self, t: f64) -> Result<()> {
        if t >= 0.0 {
            Ok(())
        } else {
            Err(Error::TimeBelowThreshold { t, t_min: 0.0 })
        }
    }

    pub fn eigen_norm(&self, n: usize) -> Result<f64> {
        let p = self.eigen_pair(n);
        Ok(self.inner_product(|x| p.eval(x), |x| p.eval(x))?.value.sqrt())
    }

    pub fn coeigen_norm(&self, n: usize) -> Result<f64> {
        if membership(self.model(), n) == Membership::NotInL2 {
            return Err(Error::Membership(n));
        }
        // the monomial form of w_n cancels heavily at high order, which caps the
        // attainable accuracy near 1e-8 relative
        let est = self.integrate_tol(|x, r| {
            let w = self.w_at(n, x, r)?;
            if w == 0.0 {
                return Ok(0.0);
            }
            let edge = if r.is_finite() { Some(r) } else { None };
            Ok(w * self.coeigen_unchecked(n, x, edge)?)
        }, 0.0, 1e-7)?;
        Ok(est.value.sqrt())
    }

    pub fn norms_report(&self, n_max: usize) -> Result<NormsReport> {
        let rows: Vec<Result<NormsRow>> = (0..=n_max)
            .into_par_iter()
            .map(|n| Ok(NormsRow { n, norm_p: self.eigen_norm(n)?, norm_v: self.coeigen_norm(n)? }))
            .collect();
        let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
        let fit: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.n >= (n_max / 2).max(1))
            .map(|r| ((r.n as f64).ln(), 2.0 * r.norm_v.ln()))
            .collect();
        Ok(NormsReport { rows, v_sq_slope: ls_slope(&fit) })
    }

    /// `||P_t f - nu f||_nu` for a polynomial `f` and the hypocoercive bound.
    /// `mbar` overrides `(m + pibarbar(0+)) / sigma^2` when given.
    pub fn equilibrium_gap(&self, t: f64, f: &[f64], eps: f64, mbar: Option<f64>) -> Result<GapReport> {
        let model = self.model();
        let sc = model.scalars();
        if !sc.flags.n_p || !sc.pibarbar0.is_finite() || model.sigma2_eff() <= 0.0 {
            return Err(Error::Class("the bound needs a Gaussian part and finite pibarbar(0+)".into()));
        }
        if !(t > 0.0) {
            return Err(Error::TimeBelowThreshold { t, t_min: 0.0 });
        }
        let deg = f.len().saturating_sub(1);
        let a = self.poly_coefficients(f, deg);
        let pairs: Vec<EigenPair> = (0..=deg).map(|n| self.eigen_pair(n)).collect();
        // Parseval through the Gram matrix of P_1..P_d
        let mut acc = KahanSum::new();
        for n in 1..=deg {
            for k in 1..=deg {
                let mut g = KahanSum::new();
                for (i, ci) in pairs[n].p_coeffs.iter().enumerate() {
                    for (j, cj) in pairs[k].p_coeffs.iter().enumerate() {
                        g.add(ci * cj * self.w(i + j));
                    }
                }
                acc.add(a[n] * a[k] * (-((n + k) as f64) * t).exp() * g.value());
            }
        }
        let gap = acc.value().max(0.0).sqrt();
        let mean = a[0];
        let gap_quadrature = self
            .inner_product(
                |x| {
                    let mut s = KahanSum::new();
                    for n in 1..=deg {
                        s.add(a[n] * (-(n as f64) * t).exp() * pairs[n].eval(x));
                    }
                    s.value()
                },
                |x| {
                    let mut s = KahanSum::new();
                    for n in 1..=deg {
                        s.add(a[n] * (-(n as f64) * t).exp() * pairs[n].eval(x));
                    }
                    s.value()
                },
            )?
            .value
            .max(0.0)
            .sqrt();
        // ||f - nu f||^2 from the moments of nu
        let mut second = KahanSum::new();
        for (i, ci) in f.iter().enumerate() {
            for (j, cj) in f.iter().enumerate() {
                second.add(ci * cj * self.w(i + j));
            }
        }
        let spread = (second.value() - mean * mean).max(0.0).sqrt();
        let mbar = mbar.unwrap_or((model.m_eff() + sc.pibarbar0) / model.sigma2_eff());
        let d = -model.d_phi();
        let d_eps = if d > 0.0 { d - eps } else { 0.0 };
        let bound = ((mbar + 1.0) / (d_eps + 1.0)).sqrt() * (-t).exp() * spread;
        Ok(GapReport { gap, gap_quadrature, bound, mbar })
    }
}

/// Least-squares slope of `y` on `x`.
pub fn ls_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{gamma_real, laguerre};

    #[test]
    fn eigenpolynomial_examples() {
        let ctx = SpectralContext::new(&LevyModel::classical(1.0).unwrap()).unwrap();
        let p = eigen_poly(&ctx, 2).p_coeffs;
        assert!((p[0] - 1.0).abs() < 1e-15 && (p[1] + 1.0).abs() < 1e-14 && (p[2] - 1.0 / 6.0).abs() < 1e-15);
        // P_n = c_n(m) L_n^(m)
        let n = 7;
        let pn = eigen_poly(&ctx, n);
        let c = gamma_real(n as f64 + 1.0) * gamma_real(2.0) / gamma_real(n as f64 + 2.0);
        for &x in &[0.3f64, 2.0, 9.0] {
            let size: f64 = pn.p_coeffs.iter().enumerate().map(|(k, a)| (a * x.powi(k as i32)).abs()).sum();
            assert!((pn.eval(x) - c * laguerre(n, 1.0, x)).abs() < 1e-14 * size);
        }
        let sp = SpectralContext::new(&LevyModel::small_perturbation(2.0).unwrap()).unwrap();
        let p1 = eigen_poly(&sp, 1).p_coeffs;
        assert!((p1[1] + 3.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn recurrence_matches_direct() {
        for model in [
            LevyModel::classical(1.0).unwrap(),
            LevyModel::small_perturbation(2.0).unwrap(),
            LevyModel::gauss_laguerre(0.5, 1.0).unwrap(),
            LevyModel::sawtooth(0.5, 1.0).unwrap(),
        ] {
            let ctx = SpectralContext::new(&model).unwrap();
            for n in 0..=30 {
                let d = eigen_poly(&ctx, n).p_coeffs;
                let r = eigen_poly_recurrence(&ctx, n);
                for (a, b) in d.iter().zip(&r) {
                    assert!((a - b).abs() <= 1e-12 * a.abs(), "n={n}: {a} {b}");
                }
            }
        }
    }

    #[test]
    fn coeigen_examples_and_membership() {
        let lag = Spectral::new(&LevyModel::classical(1.0).unwrap()).unwrap();
        assert!((lag.coeigen_eval(1, 0.7).unwrap() - 1.3).abs() < 1e-14);
        assert_eq!(lag.coeigen_eval(0, 3.0).unwrap(), 1.0);
        // Rodrigues form: V_n = (L_n^(m-1) + x L_n^(m)) / (1 + x)
        let sp = Spectral::new(&LevyModel::small_perturbation(2.0).unwrap()).unwrap();
        for n in 1..6 {
            for &x in &[0.4, 1.5, 6.0] {
                let want = (laguerre(n, 1.0, x) + x * laguerre(n, 2.0, x)) / (1.0 + x);
                assert!((sp.coeigen_eval(n, x).unwrap() - want).abs() < 1e-11 * want.abs().max(1.0));
            }
        }
        let st = Spectral::new(&LevyModel::sawtooth(0.5, 1.0).unwrap()).unwrap();
        assert!(matches!(st.coeigen_eval(1, 0.5), Err(Error::Membership(1))));
        assert!(matches!(st.coeigen_eval(0, 1.5), Err(Error::Support(_))));
        assert!(matches!(st.gram(3), Err(Error::Membership(1))));
    }

    #[test]
    fn inner_products() {
        for model in [LevyModel::classical(1.0).unwrap(), LevyModel::sawtooth(0.5, 1.0).unwrap()] {
            let s = Spectral::new(&model).unwrap();
            assert!((s.inner_product(|_| 1.0, |_| 1.0).unwrap().value - 1.0).abs() < 1e-10);
            let mean = s.inner_product(|x| x, |_| 1.0).unwrap().value;
            assert!((mean - model.phi_real(1.0)).abs() < 1e-10);
        }
        let lag = Spectral::new(&LevyModel::classical(1.0).unwrap()).unwrap();
        assert!(lag.gram_entry(1, 2).unwrap().abs() < 1e-10);
    }

    #[test]
    fn gram_identity_closed_forms() {
        for (model, tol) in [
            (LevyModel::classical(1.0).unwrap(), 1e-8),
            (LevyModel::small_perturbation(2.0).unwrap(), 1e-6),
        ] {
            let s = Spectral::new(&model).unwrap();
            let g = s.gram(6).unwrap();
            for (n, row) in g.iter().enumerate() {
                for (m, v) in row.iter().enumerate() {
                    let want = if n == m { 1.0 } else { 0.0 };
                    assert!((v - want).abs() < tol, "({n},{m}) {v}");
                }
            }
        }
    }

    #[test]
    fn gram_identity_mellin_route() {
        use crate::levy_model::ExpComponent;
        let model = LevyModel::new(
            1.0,
            0.5,
            JumpFamily::ExpMixture {
                components: vec![ExpComponent { c: 1.0, b: 1.0 }, ExpComponent { c: 2.0, b: 3.0 }],
            },
        )
        .unwrap();
        let s = Spectral::new(&model).unwrap();
        let g = s.gram(4).unwrap();
        for (n, row) in g.iter().enumerate() {
            for (m, v) in row.iter().enumerate() {
                let want = if n == m { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-4, "({n},{m}) {v}");
            }
        }
    }

    #[test]
    fn heat_kernel_properties() {
        let s = Spectral::new(&LevyModel::classical(1.0).unwrap()).unwrap();
        for &x in &[0.5, 2.0] {
            let mass = s.kernel_row_mass(0.5, x, 40).unwrap();
            assert!((mass - 1.0).abs() < 1e-4, "{mass}");
        }
        let pts = [0.3, 0.8, 1.5, 2.5, 4.0];
        for &x in &pts {
            for &y in &pts {
                let a = s.heat_kernel(0.5, x, y, 40).unwrap().value / s.density().nu(y).unwrap();
                let b = s.heat_kernel(0.5, y, x, 40).unwrap().value / s.density().nu(x).unwrap();
                assert!((a - b).abs() < 1e-6);
            }
        }
        let far = s.heat_kernel(40.0, 1.0, 2.0, 40).unwrap();
        assert!((far.value - s.density().nu(2.0).unwrap()).abs() < 1e-15);
        let gl = Spectral::new(&LevyModel::gauss_laguerre(0.5, 1.0).unwrap()).unwrap();
        let tm = gl.config().t_min;
        assert!((tm + (2f64.sqrt() - 1.0).ln()).abs() < 1e-15);
        assert!(matches!(gl.heat_kernel(0.5, 1.0, 1.0, 10), Err(Error::TimeBelowThreshold { .. })));
    }

    #[test]
    fn eigen_relation_through_kernel() {
        for model in [LevyModel::classical(1.0).unwrap(), LevyModel::small_perturbation(2.0).unwrap()] {
            let s = Spectral::new(&model).unwrap();
            let (t, x, nt) = (0.7, 1.3, 40);
            let pairs: Vec<EigenPair> = (0..=nt).map(|n| s.eigen_pair(n)).collect();
            let px: Vec<f64> = pairs.iter().map(|p| (-(p.n as f64) * t).exp() * p.eval(x)).collect();
            for target in &pairs[..=5] {
                let lhs = s
                    .integrate_checked(|y, r| {
                        let mut k = 0.0;
                        for (j, c) in px.iter().enumerate() {
                            k += c * s.w_at(j, y, r)?;
                        }
                        Ok(k * target.eval(y))
                    })
                    .unwrap()
                    .value;
                let n = target.n;
                let rhs = (-(n as f64) * t).exp() * target.eval(x);
                assert!((lhs - rhs).abs() < 1e-5, "n={n}: {lhs} {rhs}");
            }
        }
    }

    #[test]
    fn semigroup_and_adjoint() {
        let model = LevyModel::small_perturbation(2.0).unwrap();
        let s = Spectral::new(&model).unwrap();
        let phi1 = model.phi_real(1.0);
        for &t in &[0.0, 0.3, 2.0] {
            for &x in &[0.2, 1.0, 5.0] {
                assert!((s.semigroup_apply_poly(t, &[1.0], x, 10).unwrap() - 1.0).abs() < 1e-14);
                let v = s.semigroup_apply_poly(t, &[0.0, 1.0], x, 10).unwrap();
                let want = phi1 + (-t).exp() * (x - phi1);
                assert!((v - want).abs() < 1e-12);
            }
        }
        let f = [0.5, -1.0, 0.25, 0.1];
        assert_eq!(
            s.semigroup_apply_poly(0.4, &f, 1.7, 3).unwrap().to_bits(),
            s.semigroup_apply_poly(0.4, &f, 1.7, 23).unwrap().to_bits()
        );
        assert!((s.adjoint_apply_poly(0.5, &[1.0], 2.0, 6).unwrap() - 1.0).abs() < 1e-12);
        // duality on polynomial pairs
        let g = [0.0, 0.5, -0.2];
        let t = 0.6;
        let lhs = s
            .inner_product(|x| s.semigroup_apply_poly(t, &f, x, 3).unwrap(), |x| horner_compensated(&g, x))
            .unwrap()
            .value;
        let rhs = s
            .inner_product(|x| horner_compensated(&f, x), |y| s.adjoint_apply_poly(t, &g, y, 12).unwrap())
            .unwrap()
            .value;
        assert!((lhs - rhs).abs() < 1e-6, "{lhs} {rhs}");
        // quadrature route agrees with exact coefficients
        let q = s.semigroup_apply(0.4, |x| horner_compensated(&f, x), 1.7, 5).unwrap();
        let e = s.semigroup_apply_poly(0.4, &f, 1.7, 5).unwrap();
        assert!((q - e).abs() < 1e-8);
        // self-adjoint classical case
        let lag = Spectral::new(&LevyModel::classical(1.0).unwrap()).unwrap();
        for &y in &[0.5, 2.0] {
            let a = lag.adjoint_apply_poly(0.5, &f, y, 3).unwrap();
            let b = lag.semigroup_apply_poly(0.5, &f, y, 3).unwrap();
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn norms_and_divergence() {
        let lag0 = Spectral::new(&LevyModel::classical(0.0).unwrap()).unwrap();
        for n in 0..8 {
            assert!((lag0.eigen_norm(n).unwrap() - 1.0).abs() < 1e-9);
        }
        let st = Spectral::new(&LevyModel::sawtooth(0.5, 1.0).unwrap()).unwrap();
        match st.coeigen_norm_sq_certified(1) {
            Err(Error::DivergenceDetected { partial }) => assert!(partial > DIVERGENCE_THRESHOLD),
            other => panic!("{other:?}"),
        }
        let r0 = st.coeigen_norm_sq_certified(0).unwrap();
        assert!(r0.converged && (r0.partials.last().unwrap() - 1.0).abs() < 1e-10, "{:?}", r0.partials.last());
        // reference squared norms by high-precision quadrature of the Rodrigues form
        let sp = Spectral::new(&LevyModel::small_perturbation(2.0).unwrap()).unwrap();
        let rep = sp.norms_report(24).unwrap();
        for (n, want) in [(1, 2.467_884_212_558_935), (8, 29.152_785_496_557_41), (24, 205.275_333_733_518_12)] {
            let got = rep.rows[n].norm_v.powi(2);
            assert!((got - want).abs() < 1e-6 * want, "{n}: {got}");
        }
        let fit: Vec<(f64, f64)> =
            rep.rows[8..].iter().map(|r| ((r.n as f64).ln(), 2.0 * r.norm_v.ln())).collect();
        let slope = ls_slope(&fit);
        assert!((slope - 1.785_351_327_186_992).abs() < 1e-6, "{slope}");
        assert!(rep.rows.iter().all(|r| r.norm_p <= 1.0 + 1e-8));
    }

    #[test]
    fn equilibrium_gap_examples() {
        let model = LevyModel::small_perturbation(2.0).unwrap();
        let s = Spectral::new(&model).unwrap();
        let r = s.equilibrium_gap(1.0, &[1.0], 1e-3, None).unwrap();
        assert_eq!(r.gap, 0.0);
        let t: f64 = 0.5;
        let r = s.equilibrium_gap(t, &[0.0, 1.0], 1e-3, None).unwrap();
        let var = s.context().invariant_moment(2) - model.phi_real(1.0).powi(2);
        assert!((r.gap - (-t).exp() * var.sqrt()).abs() < 1e-12);
        assert!((r.gap - r.gap_quadrature).abs() < 1e-8);
        assert!((r.mbar - 2.0).abs() < 1e-14);
        for f in [vec![0.0, 1.0], vec![0.0, 0.0, 1.0], vec![0.0, 1.0, -1.0]] {
            for &t in &[0.1, 0.5, 1.0, 2.0, 3.0] {
                let r = s.equilibrium_gap(t, &f, 1e-3, None).unwrap();
                assert!(r.gap <= r.bound, "{f:?} {t}: {} {}", r.gap, r.bound);
                assert!((r.gap - r.gap_quadrature).abs() < 1e-7 * r.gap.max(1.0));
            }
        }
        let st = Spectral::new(&LevyModel::sawtooth(0.5, 1.0).unwrap()).unwrap();
        assert!(matches!(st.equilibrium_gap(1.0, &[0.0, 1.0], 1e-3, None), Err(Error::Class(_))));
    }

    #[test]
    fn jensen_generating_identity() {
        let ctx = SpectralContext::new(&LevyModel::small_perturbation(2.0).unwrap()).unwrap();
        let (x, t): (f64, f64) = (1.0, 0.5);
        let mut lhs = 0.0;
        let mut fact = 1.0;
        for n in 0..=30 {
            if n > 0 {
                fact *= n as f64;
            }
            lhs += eigen_poly(&ctx, n).eval(-x) * t.powi(n as i32) / fact;
        }
        let mut rhs = 0.0;
        let mut kf = 1.0;
        for k in 0..40 {
            if k > 0 {
                kf *= k as f64;
            }
            rhs += (x * t).powi(k as i32) / (kf * ctx.ln_w_int(k).exp());
        }
        rhs *= t.exp();
        assert!((lhs - rhs).abs() < 1e-8, "{lhs} {rhs}");
    }
}
