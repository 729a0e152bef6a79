//! Invariant density `nu`, its derivatives and the co-eigenfunction
//! numerators `w_n = (x^n nu)^(n) / n!`, by closed form where the model
//! belongs to a recognised family and by Mellin inversion otherwise.

use crate::error::{Error, Result};
use crate::levy_model::{JumpFamily, LevyModel};
use crate::quadrature::{gauss_legendre, half_line_panels, tanh_sinh, Estimate};
use crate::special::{binomial, laguerre, ln_gamma_real, KahanSum};
use crate::weierstrass::SpectralContext;
use num_complex::Complex64 as C64;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

const FORM_CAP: usize = 128;
const PANEL_WIDTH: f64 = 0.25;
const PANEL_NODES: usize = 16;
const CONTOUR_TOL: f64 = 1e-13;
const WINDOW_MASS: f64 = 1e-15;
const DERIV_CAP: usize = 20;

/// Density families with an exact expression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedFamily {
    /// `nu(x) = y^shape e^{-y} / (Gamma(shape + 1) scale)` with `y = x / scale`.
    Gamma { shape: f64, scale: f64 },
    /// `nu(x)` proportional to `y^q e^{-y} (y + b - q)`.
    ShiftedGamma { q: f64, b: f64, scale: f64 },
    /// `rho` times a Beta(p, q) variable.
    Beta { p: f64, q: f64, rho: f64 },
    /// `nu(x) = x^{mfrak + 1/alpha - 1} e^{-x^{1/alpha}} / (alpha Gamma(alpha mfrak + 1))`.
    GaussLaguerre { alpha: f64, mfrak: f64 },
}

impl ClosedFamily {
    pub fn detect(model: &LevyModel) -> Option<Self> {
        let s2 = model.sigma2_eff();
        let m = model.m_eff();
        match model.jumps() {
            JumpFamily::Empty => Some(ClosedFamily::Gamma { shape: m / s2, scale: s2 }),
            JumpFamily::GaussLaguerre { alpha, .. } if *alpha == 1.0 => {
                Some(ClosedFamily::Gamma { shape: m / s2, scale: s2 })
            }
            JumpFamily::GaussLaguerre { alpha, mfrak } => {
                if model.sigma2() == 0.0 && model.m() == 0.0 {
                    Some(ClosedFamily::GaussLaguerre { alpha: *alpha, mfrak: *mfrak })
                } else {
                    None
                }
            }
            JumpFamily::ExpMixture { components } if components.len() == 1 => {
                let (c, b) = (components[0].c, components[0].b);
                let k = c / (b * b);
                if s2 == 0.0 {
                    let rho = m + k;
                    let r = m * b / rho;
                    Some(ClosedFamily::Beta { p: r + 1.0, q: b - r, rho })
                } else {
                    // numerator s2 u^2 + (m + s2 b + k) u + m b vanishing at u = -(b + 1)
                    let lin = m + s2 * b + k;
                    let at = s2 * (b + 1.0) * (b + 1.0) - lin * (b + 1.0) + m * b;
                    let size = s2 * (b + 1.0) * (b + 1.0) + lin * (b + 1.0) + m * b;
                    if at.abs() <= 1e-13 * size {
                        let q = m * b / (s2 * (b + 1.0));
                        Some(ClosedFamily::ShiftedGamma { q, b, scale: s2 })
                    } else {
                        None
                    }
                }
            }
            JumpFamily::ExpMixture { .. } => None,
        }
    }

    fn scale(&self) -> f64 {
        match *self {
            ClosedFamily::Gamma { scale, .. } | ClosedFamily::ShiftedGamma { scale, .. } => scale,
            ClosedFamily::Beta { rho, .. } => rho,
            ClosedFamily::GaussLaguerre { .. } => 1.0,
        }
    }

    fn base_form(&self) -> GenForm {
        match *self {
            ClosedFamily::Gamma { shape, .. } => {
                let mut f = GenForm::new(shape, 0.0, Some(1.0));
                f.push(0, 0, 0, (-ln_gamma_real(shape + 1.0)).exp());
                f
            }
            ClosedFamily::ShiftedGamma { q, b, .. } => {
                let norm = 1.0 / ((1.0 + b) * ln_gamma_real(1.0 + q).exp());
                let mut f = GenForm::new(q, 0.0, Some(1.0));
                f.push(1, 0, 0, norm);
                f.push(0, 0, 0, (b - q) * norm);
                f
            }
            ClosedFamily::Beta { p, q, .. } => {
                let ln_beta = ln_gamma_real(p) + ln_gamma_real(q) - ln_gamma_real(p + q);
                let mut f = GenForm::new(p - 1.0, q - 1.0, None);
                f.push(0, 0, 0, (-ln_beta).exp());
                f
            }
            ClosedFamily::GaussLaguerre { alpha, mfrak } => {
                let mut f = GenForm::new(mfrak + 1.0 / alpha - 1.0, 0.0, Some(1.0 / alpha));
                f.push(0, 0, 0, 1.0 / (alpha * ln_gamma_real(alpha * mfrak + 1.0).exp()));
                f
            }
        }
    }
}

/// Finite sum of `coef * y^{e0 + p + i s} (1 - y)^{f0 - l} e^{-y^s}` keyed
/// by the integer triple `(p, i, l)`, closed under differentiation.
#[derive(Debug, Clone)]
struct GenForm {
    e0: f64,
    f0: f64,
    s: Option<f64>,
    terms: BTreeMap<(i32, u32, u32), f64>,
}

impl GenForm {
    fn new(e0: f64, f0: f64, s: Option<f64>) -> Self {
        GenForm { e0, f0, s, terms: BTreeMap::new() }
    }

    fn push(&mut self, p: i32, i: u32, l: u32, coef: f64) {
        if coef == 0.0 {
            return;
        }
        let key = if self.s == Some(1.0) { (p + i as i32, 0, l) } else { (p, i, l) };
        *self.terms.entry(key).or_insert(0.0) += coef;
    }

    fn exps(&self, key: &(i32, u32, u32)) -> (f64, f64) {
        let (p, i, l) = *key;
        (self.e0 + p as f64 + i as f64 * self.s.unwrap_or(0.0), self.f0 - l as f64)
    }

    fn derivative(&self) -> GenForm {
        let mut out = GenForm::new(self.e0, self.f0, self.s);
        for (key, &coef) in &self.terms {
            let (e, f) = self.exps(key);
            let (p, i, l) = *key;
            out.push(p - 1, i, l, coef * e);
            out.push(p, i, l + 1, -coef * f);
            if let Some(s) = self.s {
                out.push(p - 1, i + 1, l, -coef * s);
            }
        }
        out
    }

    fn add_scaled_shifted(&mut self, other: &GenForm, scale: f64, shift: i32) {
        for (&(p, i, l), &coef) in &other.terms {
            self.push(p + shift, i, l, coef * scale);
        }
    }

    /// `(ln of the power prefactor, reduced sum)`; the value is
    /// `exp(ln_pow - y^s) * sum`.
    fn split(&self, y: f64, yc: f64) -> (f64, f64) {
        if self.terms.is_empty() {
            return (0.0, 0.0);
        }
        let (ly, lyc) = (y.ln(), yc.ln());
        let pick_e = |a: f64, b: f64| if y <= 1.0 { a.min(b) } else { a.max(b) };
        let mut e_ref = f64::NAN;
        let mut f_ref = f64::INFINITY;
        for key in self.terms.keys() {
            let (e, f) = self.exps(key);
            e_ref = if e_ref.is_nan() { e } else { pick_e(e_ref, e) };
            f_ref = f_ref.min(f);
        }
        let mut acc = KahanSum::new();
        for (key, &coef) in &self.terms {
            let (e, f) = self.exps(key);
            let mut t = coef * ((e - e_ref) * ly).exp();
            if f != f_ref {
                t *= ((f - f_ref) * lyc).exp();
            }
            acc.add(t);
        }
        let mut ln_pow = e_ref * ly;
        if f_ref != 0.0 {
            ln_pow += f_ref * lyc;
        }
        (ln_pow, acc.value())
    }

    fn exp_part(&self, y: f64) -> f64 {
        match self.s {
            Some(s) => y.powf(s),
            None => 0.0,
        }
    }

    fn eval(&self, y: f64, yc: f64) -> f64 {
        let (lp, sum) = self.split(y, yc);
        if sum == 0.0 {
            return 0.0;
        }
        (lp - self.exp_part(y)).exp() * sum
    }
}

#[derive(Debug)]
struct Panel {
    b: Vec<f64>,
    w: Vec<f64>,
    wz: Vec<C64>,
}

#[derive(Debug)]
struct MellinState {
    a: f64,
    x_lo: f64,
    x_hi: f64,
    panels: RwLock<Vec<Arc<Panel>>>,
    heights: Vec<OnceLock<std::result::Result<f64, Error>>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensitySource {
    ClosedForm(ClosedFamily),
    MellinInversion { contour_a: f64 },
}

/// Evaluator of `nu`, its derivatives and `w_n` for one model.
#[derive(Debug)]
pub struct DensityEvaluator {
    model: LevyModel,
    ctx: Arc<SpectralContext>,
    source: DensitySource,
    rho: f64,
    nu_forms: Vec<OnceLock<GenForm>>,
    w_forms: Vec<OnceLock<GenForm>>,
    mellin: Option<MellinState>,
}

impl DensityEvaluator {
    /// Closed form when available, Mellin inversion otherwise.
    pub fn new(model: &LevyModel) -> Result<Self> {
        Self::with_context(Arc::new(SpectralContext::new(model)?))
    }

    pub fn with_context(ctx: Arc<SpectralContext>) -> Result<Self> {
        match ClosedFamily::detect(ctx.model()) {
            Some(fam) => Ok(Self::build(ctx, DensitySource::ClosedForm(fam), None)),
            None => Self::mellin_with_context(ctx),
        }
    }

    /// Forces the Mellin-inversion route even when a closed form exists.
    pub fn mellin(model: &LevyModel) -> Result<Self> {
        Self::mellin_with_context(Arc::new(SpectralContext::new(model)?))
    }

    pub fn mellin_with_context(ctx: Arc<SpectralContext>) -> Result<Self> {
        let model = ctx.model();
        if model.scalars().rho.is_finite() {
            return Err(Error::UnsupportedModel(
                "bounded support without a closed form: the Mellin transform lacks exponential decay".into(),
            ));
        }
        let a = ctx.contour_a();
        if !(a > 0.0) {
            return Err(Error::Domain("Mellin contour needs a positive abscissa".into()));
        }
        // fail early when the envelope does not decay
        let h0 = ctx.contour_height(a, CONTOUR_TOL, 0).map_err(|e| match e {
            Error::UnboundedContour { .. } => {
                Error::UnsupportedModel(format!("contour envelope does not decay: {e}"))
            }
            other => other,
        })?;
        let (x_lo, x_hi) = support_window(&ctx)?;
        let heights: Vec<OnceLock<std::result::Result<f64, Error>>> =
            (0..=2 * FORM_CAP).map(|_| OnceLock::new()).collect();
        let _ = heights[0].set(Ok(h0));
        let state = MellinState { a, x_lo, x_hi, panels: RwLock::new(Vec::new()), heights };
        Ok(Self::build(ctx, DensitySource::MellinInversion { contour_a: a }, Some(state)))
    }

    fn build(ctx: Arc<SpectralContext>, source: DensitySource, mellin: Option<MellinState>) -> Self {
        DensityEvaluator {
            model: ctx.model().clone(),
            rho: ctx.model().scalars().rho,
            ctx,
            source,
            nu_forms: (0..FORM_CAP).map(|_| OnceLock::new()).collect(),
            w_forms: (0..FORM_CAP).map(|_| OnceLock::new()).collect(),
            mellin,
        }
    }

    pub fn model(&self) -> &LevyModel {
        &self.model
    }

    pub fn context(&self) -> &Arc<SpectralContext> {
        &self.ctx
    }

    pub fn source(&self) -> DensitySource {
        self.source
    }

    /// Right end of the support.
    pub fn support_upper(&self) -> f64 {
        self.rho
    }

    /// Interval outside which the Mellin route reports zero; the whole
    /// support for closed forms.
    pub fn window(&self) -> (f64, f64) {
        match &self.mellin {
            Some(st) => (st.x_lo, st.x_hi),
            None => (0.0, self.rho),
        }
    }

    /// Typical size of the law, used to scale half-line quadrature maps.
    pub fn typical_scale(&self) -> f64 {
        if self.rho.is_finite() {
            self.rho
        } else {
            self.model.phi_real(1.0).max(1e-3)
        }
    }

    pub fn invariant_moment(&self, n: usize) -> f64 {
        self.ctx.invariant_moment(n)
    }

    fn nu_form(&self, fam: &ClosedFamily, n: usize) -> &GenForm {
        self.nu_forms[n].get_or_init(|| {
            if n == 0 {
                fam.base_form()
            } else {
                self.nu_form(fam, n - 1).derivative()
            }
        })
    }

    fn w_form(&self, fam: &ClosedFamily, n: usize) -> &GenForm {
        self.w_forms[n].get_or_init(|| {
            // Leibniz: (x^n nu)^(n) / n! = sum_k C(n,k)/k! x^k nu^(k)
            let base = self.nu_form(fam, 0);
            let mut out = GenForm::new(base.e0, base.f0, base.s);
            let mut kfact = 1.0;
            for k in 0..=n {
                if k > 0 {
                    kfact *= k as f64;
                }
                out.add_scaled_shifted(self.nu_form(fam, k), binomial(n, k) / kfact, k as i32);
            }
            out
        })
    }

    fn check_x(&self, x: f64) -> Result<()> {
        if x > 0.0 && x.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!("density argument must be positive, got {x}")))
        }
    }

    // the distance to the edge, when supplied, decides points that round onto rho
    fn outside(&self, x: f64, to_edge: Option<f64>) -> bool {
        match to_edge {
            Some(c) if self.rho.is_finite() => c <= 0.0,
            _ => x >= self.rho,
        }
    }

    fn check_order(&self, n: usize) -> Result<()> {
        if n >= FORM_CAP {
            return Err(Error::Config(format!("order {n} beyond the supported cap {FORM_CAP}")));
        }
        Ok(())
    }

    fn unit(&self, fam: &ClosedFamily, x: f64, xc: Option<f64>) -> (f64, f64) {
        let s = fam.scale();
        let y = x / s;
        let yc = match (fam, xc) {
            (ClosedFamily::Beta { rho, .. }, Some(c)) => c / rho,
            _ => 1.0 - y,
        };
        (y, yc)
    }

    /// `nu(x)`.
    pub fn nu(&self, x: f64) -> Result<f64> {
        self.nu_deriv_impl(x, None, 0)
    }

    /// `nu(x)` given also the distance `rho - x`, for accuracy next to `rho`.
    pub fn nu_near_edge(&self, x: f64, to_edge: f64) -> Result<f64> {
        self.nu_deriv_impl(x, Some(to_edge), 0)
    }

    /// `n`-th derivative of `nu`.
    pub fn nu_deriv(&self, x: f64, n: usize) -> Result<f64> {
        if n >= 1 {
            let sc = self.model.scalars();
            if let Some(limit) = sc.n_rho {
                if sc.flags.n_inf_c && (n as i64) > limit as i64 - 1 {
                    return Err(Error::Smoothness { order: n, limit: limit as i64 - 1 });
                }
            }
        }
        self.nu_deriv_impl(x, None, n)
    }

    fn nu_deriv_impl(&self, x: f64, xc: Option<f64>, n: usize) -> Result<f64> {
        self.check_x(x)?;
        self.check_order(n)?;
        if self.outside(x, xc) {
            return Ok(0.0);
        }
        match self.source {
            DensitySource::ClosedForm(fam) => {
                let (y, yc) = self.unit(&fam, x, xc);
                Ok(self.nu_form(&fam, n).eval(y, yc) / fam.scale().powi(n as i32 + 1))
            }
            DensitySource::MellinInversion { .. } => {
                if n > DERIV_CAP {
                    return Err(Error::Config(format!("Mellin derivatives capped at order {DERIV_CAP}")));
                }
                self.mellin_eval(x, n, |z| {
                    let mut f = C64::new(1.0, 0.0);
                    for j in 0..n {
                        f *= z + j as f64;
                    }
                    if n % 2 == 1 {
                        -f
                    } else {
                        f
                    }
                })
                .map(|v| v / x.powi(n as i32))
            }
        }
    }

    /// `w_n(x) = (x^n nu(x))^(n) / n!`.
    pub fn w_n(&self, n: usize, x: f64) -> Result<f64> {
        self.w_n_impl(n, x, None)
    }

    pub fn w_n_near_edge(&self, n: usize, x: f64, to_edge: f64) -> Result<f64> {
        self.w_n_impl(n, x, Some(to_edge))
    }

    fn w_n_impl(&self, n: usize, x: f64, xc: Option<f64>) -> Result<f64> {
        self.check_x(x)?;
        self.check_order(n)?;
        if self.outside(x, xc) {
            return Ok(0.0);
        }
        match self.source {
            DensitySource::ClosedForm(fam) => {
                let (y, yc) = self.unit(&fam, x, xc);
                if let Some(v) = laguerre_ratio(&fam, n, y) {
                    return Ok(self.nu_form(&fam, 0).eval(y, yc) / fam.scale() * v);
                }
                Ok(self.w_form(&fam, n).eval(y, yc) / fam.scale())
            }
            DensitySource::MellinInversion { .. } => {
                let mut nfact = 1.0;
                for j in 1..=n {
                    nfact *= j as f64;
                }
                let sign = if n % 2 == 1 { -1.0 } else { 1.0 };
                self.mellin_eval(x, n, |z| {
                    let mut f = C64::new(sign / nfact, 0.0);
                    for j in 1..=n {
                        f *= z - j as f64;
                    }
                    f
                })
            }
        }
    }

    /// `V_n(x) = w_n(x) / nu(x)` without membership checks.
    pub fn coeigen_ratio(&self, n: usize, x: f64, to_edge: Option<f64>) -> Result<f64> {
        self.check_x(x)?;
        self.check_order(n)?;
        if self.outside(x, to_edge) {
            return Err(Error::Support(x));
        }
        if n == 0 {
            return Ok(1.0);
        }
        match self.source {
            DensitySource::ClosedForm(fam) => {
                let (y, yc) = self.unit(&fam, x, to_edge);
                if let Some(v) = laguerre_ratio(&fam, n, y) {
                    return Ok(v);
                }
                let (lw, sw) = self.w_form(&fam, n).split(y, yc);
                let (ln, sn) = self.nu_form(&fam, 0).split(y, yc);
                if sn <= 0.0 {
                    return Err(Error::Support(x));
                }
                Ok((lw - ln).exp() * sw / sn)
            }
            DensitySource::MellinInversion { .. } => {
                let nu = self.nu(x)?;
                if !(nu > 1e-300) {
                    return Err(Error::Support(x));
                }
                Ok(self.w_n(n, x)? / nu)
            }
        }
    }

    fn height(&self, st: &MellinState, degree: usize) -> Result<f64> {
        let idx = degree.min(st.heights.len() - 1);
        st.heights[idx].get_or_init(|| self.ctx.contour_height(st.a, CONTOUR_TOL, degree)).clone()
    }

    fn panels_upto(&self, st: &MellinState, count: usize) -> Result<Vec<Arc<Panel>>> {
        {
            let guard = st.panels.read().expect("panel cache lock");
            if guard.len() >= count {
                return Ok(guard[..count].to_vec());
            }
        }
        let mut guard = st.panels.write().expect("panel cache lock");
        let (gx, gw) = gauss_legendre(PANEL_NODES);
        while guard.len() < count {
            let j = guard.len();
            let lo = j as f64 * PANEL_WIDTH;
            let mut panel = Panel { b: Vec::new(), w: Vec::new(), wz: Vec::new() };
            for (x, w) in gx.iter().zip(&gw) {
                let b = lo + 0.5 * PANEL_WIDTH * (x + 1.0);
                panel.b.push(b);
                panel.w.push(0.5 * PANEL_WIDTH * w);
                panel.wz.push(self.ctx.mellin_v(C64::new(st.a, b))?);
            }
            guard.push(Arc::new(panel));
        }
        Ok(guard[..count].to_vec())
    }

    /// `(1/pi) int_0^B Re[x^{-a-ib} F(a+ib) W(a+ib)] db`, with `F` a polynomial
    /// factor of the given degree.
    fn mellin_eval<F: Fn(C64) -> C64>(&self, x: f64, degree: usize, factor: F) -> Result<f64> {
        let st = self.mellin.as_ref().expect("Mellin state present on this route");
        if x <= st.x_lo || x >= st.x_hi {
            return Ok(0.0);
        }
        let height = self.height(st, degree)?;
        let count = (height / PANEL_WIDTH).ceil() as usize;
        let panels = self.panels_upto(st, count)?;
        let lx = x.ln();
        let mut acc = KahanSum::new();
        for panel in &panels {
            for j in 0..panel.b.len() {
                let b = panel.b[j];
                let z = C64::new(st.a, b);
                let phase = C64::from_polar(1.0, -b * lx);
                acc.add(panel.w[j] * (phase * factor(z) * panel.wz[j]).re);
            }
        }
        Ok((-st.a * lx).exp() * acc.value() / PI)
    }

    /// `int_0^rho h(x, rho - x) dx` over the support (or the Mellin window).
    pub fn integrate<H: Fn(f64, f64) -> f64>(&self, h: H, abs_tol: f64, rel_tol: f64) -> Result<Estimate> {
        if self.rho.is_finite() {
            if let DensitySource::ClosedForm(ClosedFamily::Beta { q, rho, .. }) = self.source {
                if q < 1.0 {
                    return beta_edge_split(&h, q, rho, abs_tol, rel_tol);
                }
            }
            return tanh_sinh(|x, _, r| h(x, r), 0.0, self.rho, abs_tol, rel_tol);
        }
        match &self.mellin {
            Some(st) => {
                // split at the mean so both halves see a smooth map
                let mid = self.model.phi_real(1.0).clamp(st.x_lo * 2.0, st.x_hi * 0.5);
                let left = tanh_sinh(|x, _, _| h(x, f64::INFINITY), st.x_lo, mid, abs_tol, rel_tol)?;
                let right = tanh_sinh(|x, _, _| h(x, f64::INFINITY), mid, st.x_hi, abs_tol, rel_tol)?;
                Ok(Estimate { value: left.value + right.value, error: left.error + right.error })
            }
            None => half_line_panels(|x| h(x, f64::INFINITY), self.typical_scale(), abs_tol, rel_tol),
        }
    }

    /// `int g(x) nu(x) dx`.
    pub fn expectation<G: Fn(f64) -> f64>(&self, g: G, abs_tol: f64, rel_tol: f64) -> Result<Estimate> {
        let err = std::sync::Mutex::new(None);
        let est = self.integrate(
            |x, r| {
                let nu = if r.is_finite() { self.nu_near_edge(x, r) } else { self.nu(x) };
                match nu {
                    Ok(v) if v != 0.0 => g(x) * v,
                    Ok(_) => 0.0,
                    Err(e) => {
                        *err.lock().expect("error slot") = Some(e);
                        0.0
                    }
                }
            },
            abs_tol,
            rel_tol,
        )?;
        if let Some(e) = err.into_inner().expect("error slot") {
            return Err(e);
        }
        Ok(est)
    }
}

/// Edge distances below this are treated as the limit of the transformed
/// integrand, which is flat there.
const EDGE_FLOOR: f64 = 1e-280;

/// Beta-type density with `q < 1`: the edge half goes through
/// `u = (rho - x)^q`, which absorbs the `(rho - x)^(q-1)` singularity.
fn beta_edge_split<H: Fn(f64, f64) -> f64>(h: &H, q: f64, rho: f64, abs_tol: f64, rel_tol: f64) -> Result<Estimate> {
    let half = 0.5 * rho;
    let inner = tanh_sinh(|x, _, r| h(x, r + half), 0.0, half, 0.5 * abs_tol, rel_tol)?;
    let edge = tanh_sinh(
        |u, _, _| {
            let t = u.powf(1.0 / q).max(EDGE_FLOOR);
            h(rho - t, t) * t.powf(1.0 - q) / q
        },
        0.0,
        half.powf(q),
        0.5 * abs_tol,
        rel_tol,
    )?;
    Ok(Estimate { value: inner.value + edge.value, error: inner.error + edge.error })
}

/// `V_n` for the gamma-type families through the Rodrigues identity
/// `(y^{n+a} e^{-y})^(n) / n! = y^a e^{-y} L_n^(a)(y)`; the three-term
/// recurrence avoids the cancellation of the monomial expansion.
fn laguerre_ratio(fam: &ClosedFamily, n: usize, y: f64) -> Option<f64> {
    match *fam {
        ClosedFamily::Gamma { shape, .. } => Some(laguerre(n, shape, y)),
        ClosedFamily::ShiftedGamma { q, b, .. } => {
            Some((y * laguerre(n, q + 1.0, y) + (b - q) * laguerre(n, q, y)) / (y + b - q))
        }
        _ => None,
    }
}

/// `[x_lo, x_hi]` carrying all but `WINDOW_MASS` of the law, from the moment
/// bounds `P(V > x) <= W(k+1)/x^k` and `P(V < x) <= x^s W(1-s)`.
fn support_window(ctx: &SpectralContext) -> Result<(f64, f64)> {
    let lm = WINDOW_MASS.ln();
    let mut x_hi = f64::INFINITY;
    for k in 1..=60 {
        x_hi = x_hi.min(((ctx.ln_w_int(k) - lm) / k as f64).exp());
    }
    let d = ctx.model().d_phi();
    let s = (0.9 * (1.0 - d)).min(1.0);
    let lw = ctx.log_w(C64::new(1.0 - s, 0.0))?.re;
    let x_lo = ((lm - lw) / s).exp();
    Ok((x_lo, x_hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_model::ExpComponent;
    use crate::special::gamma_real;

    fn two_component() -> LevyModel {
        LevyModel::new(
            1.0,
            0.5,
            JumpFamily::ExpMixture {
                components: vec![ExpComponent { c: 1.0, b: 1.0 }, ExpComponent { c: 2.0, b: 3.0 }],
            },
        )
        .unwrap()
    }

    #[test]
    fn detects_families() {
        let sp = LevyModel::small_perturbation(2.0).unwrap();
        assert_eq!(
            ClosedFamily::detect(&sp),
            Some(ClosedFamily::ShiftedGamma { q: 1.0, b: 2.0, scale: 1.0 })
        );
        assert!(ClosedFamily::detect(&two_component()).is_none());
        match ClosedFamily::detect(&LevyModel::sawtooth(0.5, 1.0).unwrap()) {
            Some(ClosedFamily::Beta { p, q, rho }) => {
                assert!((p - 1.5).abs() < 1e-15 && (q - 0.5).abs() < 1e-15 && (rho - 1.0).abs() < 1e-15)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn closed_form_values() {
        let lag = DensityEvaluator::new(&LevyModel::classical(1.0).unwrap()).unwrap();
        assert!((lag.nu(1.0).unwrap() - (-1f64).exp()).abs() < 1e-15);
        let st = DensityEvaluator::new(&LevyModel::sawtooth(0.5, 1.0).unwrap()).unwrap();
        let c = gamma_real(2.0) / (gamma_real(1.5) * gamma_real(0.5));
        assert!((st.nu(0.5).unwrap() - c).abs() < 1e-14);
        assert_eq!(st.nu(1.001).unwrap(), 0.0);
        let sp = DensityEvaluator::new(&LevyModel::small_perturbation(2.0).unwrap()).unwrap();
        let x: f64 = 1.7;
        assert!((sp.nu(x).unwrap() - (1.0 + x) * x * (-x).exp() / 3.0).abs() < 1e-15);
    }

    #[test]
    fn gauss_laguerre_derivative() {
        let gl = DensityEvaluator::new(&LevyModel::gauss_laguerre(0.5, 1.0).unwrap()).unwrap();
        assert!(gl.nu_deriv(1.0, 1).unwrap().abs() < 1e-15);
        let x: f64 = 0.8;
        // normalised: x^2 e^{-x^2} / (alpha Gamma(3/2))
        let norm = 1.0 / (0.5 * gamma_real(1.5));
        assert!((gl.nu(x).unwrap() - norm * x * x * (-x * x).exp()).abs() < 1e-15);
        let d = norm * (2.0 * x - 2.0 * x.powi(3)) * (-x * x).exp();
        assert!((gl.nu_deriv(x, 1).unwrap() - d).abs() < 1e-14);
    }

    #[test]
    fn finite_differences_match_derivatives() {
        for model in [
            LevyModel::classical(1.0).unwrap(),
            LevyModel::small_perturbation(2.0).unwrap(),
            LevyModel::gauss_laguerre(0.5, 1.0).unwrap(),
        ] {
            let ev = DensityEvaluator::new(&model).unwrap();
            for &x in &[0.3, 1.0, 2.5, 5.0] {
                for n in 0..3 {
                    let h = 1e-4;
                    let fd = (ev.nu_deriv(x + h, n).unwrap() - ev.nu_deriv(x - h, n).unwrap()) / (2.0 * h);
                    let d = ev.nu_deriv(x, n + 1).unwrap();
                    assert!((fd - d).abs() <= 1e-5 * d.abs().max(1e-2), "{x} {n}: {fd} {d}");
                }
            }
        }
    }

    #[test]
    fn smoothness_limit_enforced() {
        let st = DensityEvaluator::new(&LevyModel::sawtooth(0.5, 1.0).unwrap()).unwrap();
        assert!(matches!(st.nu_deriv(0.5, 1), Err(Error::Smoothness { .. })));
        assert!(st.nu_deriv(0.5, 0).is_ok());
        let smooth = DensityEvaluator::new(&LevyModel::sawtooth(0.5, 3.0).unwrap()).unwrap();
        // N_rho = ceil(2.5) - 1 = 2: first derivative admitted, second refused
        assert!(smooth.nu_deriv(0.5, 1).is_ok());
        assert!(smooth.nu_deriv(0.5, 2).is_err());
    }

    #[test]
    fn laguerre_route_matches_symbolic_forms() {
        let sp = DensityEvaluator::new(&LevyModel::small_perturbation(2.0).unwrap()).unwrap();
        let fam = match sp.source() {
            DensitySource::ClosedForm(f) => f,
            _ => unreachable!(),
        };
        for n in 0..8 {
            for &y in &[0.2, 1.0, 4.0] {
                let symbolic = sp.w_form(&fam, n).eval(y, 1.0 - y);
                let direct = sp.w_n(n, y).unwrap();
                assert!((symbolic - direct).abs() < 1e-12 * sp.nu(y).unwrap().max(direct.abs()));
            }
        }
    }

    #[test]
    fn coeigen_classical() {
        let lag = DensityEvaluator::new(&LevyModel::classical(1.0).unwrap()).unwrap();
        for &x in &[0.2, 1.0, 3.0, 40.0, 900.0] {
            assert!((lag.coeigen_ratio(1, x, None).unwrap() - (2.0 - x)).abs() < 1e-12 * x.max(1.0));
            assert!((lag.w_n(0, x).unwrap() - lag.nu(x).unwrap()).abs() == 0.0);
        }
        let sp = DensityEvaluator::new(&LevyModel::small_perturbation(2.0).unwrap()).unwrap();
        for &x in &[0.2, 1.0, 3.0] {
            let v = sp.coeigen_ratio(1, x, None).unwrap();
            assert!((v - (x / (x + 1.0) + 2.0 - x)).abs() < 1e-13);
        }
    }

    #[test]
    fn mellin_matches_closed_form() {
        let model = LevyModel::classical(1.0).unwrap();
        let closed = DensityEvaluator::new(&model).unwrap();
        let mellin = DensityEvaluator::mellin(&model).unwrap();
        for k in 0..21 {
            let x = 0.1 + (8.0 - 0.1) * k as f64 / 20.0;
            let d = (closed.nu(x).unwrap() - mellin.nu(x).unwrap()).abs();
            assert!(d < 1e-6, "{x}: {d}");
        }
        for n in 1..=4 {
            for k in 0..12 {
                let x = 0.2 + (6.0 - 0.2) * k as f64 / 11.0;
                let a = closed.w_n(n, x).unwrap();
                let b = mellin.w_n(n, x).unwrap();
                let scale = closed.nu(x).unwrap();
                assert!((a - b).abs() <= 1e-5 * a.abs().max(scale), "n={n} x={x}: {a} {b}");
            }
        }
        let h = 1e-4;
        let x = 1.3;
        let fd = (mellin.nu(x + h).unwrap() - mellin.nu(x - h).unwrap()) / (2.0 * h);
        assert!((fd - mellin.nu_deriv(x, 1).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn unsupported_bounded_support() {
        let model = LevyModel::new(
            0.0,
            0.2,
            JumpFamily::ExpMixture {
                components: vec![ExpComponent { c: 1.0, b: 1.0 }, ExpComponent { c: 2.0, b: 3.0 }],
            },
        )
        .unwrap();
        assert!(matches!(DensityEvaluator::new(&model), Err(Error::UnsupportedModel(_))));
    }

    #[test]
    fn normalization_and_moments() {
        for model in [
            LevyModel::classical(1.0).unwrap(),
            LevyModel::small_perturbation(2.0).unwrap(),
            LevyModel::gauss_laguerre(0.5, 1.0).unwrap(),
            LevyModel::sawtooth(0.5, 1.0).unwrap(),
        ] {
            let ev = DensityEvaluator::new(&model).unwrap();
            let mass = ev.expectation(|_| 1.0, 1e-12, 1e-12).unwrap_or_else(|e| panic!("{model:?} {e}")).value;
            assert!((mass - 1.0).abs() < 1e-10, "{mass}");
            let mut prev = 1.0;
            for n in 1..=8 {
                let mom = ev.expectation(|x| x.powi(n), 1e-12, 1e-12).unwrap_or_else(|e| panic!("{model:?} {n} {e}")).value;
                let w = ev.invariant_moment(n as usize);
                assert!((mom - w).abs() <= 1e-8 * w, "n={n}: {mom} vs {w}");
                let chain = model.phi_real(n as f64) * prev;
                assert!((mom - chain).abs() <= 1e-8 * chain);
                prev = mom;
            }
            for n in 1..=4 {
                let total = ev.integrate(|x, r| {
                    if r.is_finite() { ev.w_n_near_edge(n, x, r).unwrap() } else { ev.w_n(n, x).unwrap() }
                }, 1e-12, 1e-12);
                if model.scalars().flags.n_inf_c {
                    // w_n is not integrable near rho once n exceeds the smoothness index
                    continue;
                }
                assert!(total.unwrap().value.abs() < 1e-8, "n={n}");
            }
        }
    }

    #[test]
    fn sawtooth_edge_exponent() {
        let model = LevyModel::sawtooth(0.5, 1.0).unwrap();
        let ev = DensityEvaluator::new(&model).unwrap();
        let sc = model.scalars();
        let expected = sc.pibar0 / sc.rho - 1.0;
        let mut pts = Vec::new();
        for k in 4..16 {
            let d = 2f64.powi(-k);
            pts.push((d.ln(), ev.nu_near_edge(sc.rho - d, d).unwrap().ln()));
        }
        let (n, sx, sy) = (pts.len() as f64, pts.iter().map(|p| p.0).sum::<f64>(), pts.iter().map(|p| p.1).sum::<f64>());
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!((slope - expected).abs() < 0.15, "{slope}");
        assert_eq!(ev.nu(sc.rho * (1.0 + 1e-3)).unwrap(), 0.0);
    }

    #[test]
    fn mellin_route_family_is_a_density() {
        let ev = DensityEvaluator::new(&two_component()).unwrap();
        assert!(matches!(ev.source(), DensitySource::MellinInversion { .. }));
        let mass = ev.expectation(|_| 1.0, 1e-10, 1e-10).unwrap().value;
        assert!((mass - 1.0).abs() < 1e-7, "{mass}");
        for n in 1..=4 {
            let mom = ev.expectation(|x| x.powi(n), 1e-10, 1e-10).unwrap().value;
            let w = ev.invariant_moment(n as usize);
            assert!((mom - w).abs() < 1e-6 * w, "{n}: {mom} {w}");
        }
        for k in 1..60 {
            let x = 0.05 * k as f64 * k as f64 / 10.0;
            assert!(ev.nu(x).unwrap() >= -1e-8);
        }
    }
}
