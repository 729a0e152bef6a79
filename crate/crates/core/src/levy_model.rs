//! Characteristic triplets of spectrally negative Levy processes, the
//! Bernstein function of their Wiener-Hopf factor and derived scalars.

use crate::error::{Error, Result};
use crate::quadrature::adaptive_gk;
use crate::special::{
    digamma, digamma_real, expm1_c, ln1p_c, ln_gamma_ratio, trigamma_real,
};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpComponent {
    pub c: f64,
    pub b: f64,
}

/// Catalog of jump measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpFamily {
    Empty,
    /// `Pi(dy) = sum c_i exp(-b_i y) dy`
    ExpMixture { components: Vec<ExpComponent> },
    /// Jump measure whose Bernstein function is
    /// `Gamma(alpha u + alpha mfrak + 1) / Gamma(alpha u + alpha mfrak + 1 - alpha)`.
    GaussLaguerre { alpha: f64, mfrak: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassFlags {
    /// Brownian component present.
    pub n_p: bool,
    pub n_inf: bool,
    pub n_inf_c: bool,
    /// `(alpha, C_alpha)` with `phi(u) ~ C_alpha u^alpha`.
    pub n_alpha: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelScalars {
    /// `phi(inf)`, infinite when unbounded.
    pub rho: f64,
    /// Smoothness index; `None` stands for infinity.
    pub n_rho: Option<u64>,
    pub d_phi: f64,
    pub pibar0: f64,
    pub pibarbar0: f64,
    pub flags: ClassFlags,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelRepr {
    sigma2: f64,
    m: f64,
    jumps: JumpFamily,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevyModel {
    sigma2: f64,
    m: f64,
    jumps: JumpFamily,
    scalars: ModelScalars,
}

impl Serialize for LevyModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ModelRepr { sigma2: self.sigma2, m: self.m, jumps: self.jumps.clone() }.serialize(s)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct MixtureFields {
    components: Vec<ExpComponent>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct KernelFields {
    alpha: f64,
    mfrak: f64,
}

// the tagged enum buffers its content and so loses the inner path; re-read
// the jump object with the variant's own fields to recover it
fn locate_jump_error(text: &str) -> Option<Error> {
    let doc: serde_json::Value = serde_json::from_str(text).ok()?;
    let mut jumps = doc.get("jumps")?.clone();
    let kind = jumps.get("kind")?.as_str()?.to_string();
    jumps.as_object_mut()?.remove("kind");
    let err = match kind.as_str() {
        "exp_mixture" => serde_path_to_error::deserialize::<_, MixtureFields>(jumps).err()?,
        "gauss_laguerre" => serde_path_to_error::deserialize::<_, KernelFields>(jumps).err()?,
        _ => return None,
    };
    let path = err.path().to_string();
    let path = if path == "." { "jumps".to_string() } else { format!("jumps.{path}") };
    Some(parse_err(&path, err.into_inner().to_string()))
}

fn parse_err(path: &str, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_string(), message: message.into() }
}

impl LevyModel {
    pub fn new(sigma2: f64, m: f64, jumps: JumpFamily) -> Result<Self> {
        Self::validate(sigma2, m, &jumps).map_err(|e| match e {
            Error::Parse { path, message } => Error::InvalidModel(format!("{path}: {message}")),
            other => other,
        })?;
        let mut model = LevyModel { sigma2, m, jumps, scalars: placeholder_scalars() };
        model.scalars = model.compute_scalars();
        Ok(model)
    }

    fn validate(sigma2: f64, m: f64, jumps: &JumpFamily) -> Result<()> {
        if !(sigma2.is_finite() && sigma2 >= 0.0) {
            return Err(parse_err("sigma2", "must be finite and nonnegative"));
        }
        if !(m.is_finite() && m >= 0.0) {
            return Err(parse_err("m", "must be finite and nonnegative"));
        }
        match jumps {
            JumpFamily::Empty => {
                if sigma2 == 0.0 {
                    return Err(parse_err(
                        "jumps",
                        "degenerate triplet: sigma2 = 0 and no jumps",
                    ));
                }
            }
            JumpFamily::ExpMixture { components } => {
                if components.is_empty() {
                    return Err(parse_err("jumps.components", "must not be empty"));
                }
                for (i, comp) in components.iter().enumerate() {
                    if !(comp.c.is_finite() && comp.c > 0.0) {
                        return Err(parse_err(&format!("jumps.components[{i}].c"), "must be positive"));
                    }
                    if !(comp.b.is_finite() && comp.b > 0.0) {
                        return Err(parse_err(&format!("jumps.components[{i}].b"), "must be positive"));
                    }
                }
            }
            JumpFamily::GaussLaguerre { alpha, mfrak } => {
                if !(alpha.is_finite() && *alpha > 0.0 && *alpha <= 1.0) {
                    return Err(parse_err("jumps.alpha", "must lie in (0, 1]"));
                }
                if !(mfrak.is_finite() && *mfrak >= 1.0 - 1.0 / alpha - 1e-12) {
                    return Err(parse_err("jumps.mfrak", "must be at least 1 - 1/alpha"));
                }
            }
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let repr: ModelRepr = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            if path == "jumps" {
                if let Some(inner) = locate_jump_error(text) {
                    return inner;
                }
            }
            parse_err(&path, e.into_inner().to_string())
        })?;
        Self::validate(repr.sigma2, repr.m, &repr.jumps)?;
        Self::new(repr.sigma2, repr.m, repr.jumps)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    /// `phi(u) = u + m`.
    pub fn classical(m: f64) -> Result<Self> {
        Self::new(1.0, m, JumpFamily::Empty)
    }

    /// `phi(u) = (u + mf + 1)(u + mf - 1)/(u + mf)`, requires `mf >= 1`.
    pub fn small_perturbation(mf: f64) -> Result<Self> {
        Self::new(
            1.0,
            (mf * mf - 1.0) / mf,
            JumpFamily::ExpMixture { components: vec![ExpComponent { c: mf, b: mf }] },
        )
    }

    /// `phi(u) = (u + 1 - a)/(u + b)` with `0 < a < 1 < a + b`.
    pub fn sawtooth(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0 && a + b > 1.0) {
            return Err(Error::InvalidModel("saw-tooth needs 0 < a < 1 < a + b".into()));
        }
        Self::new(
            0.0,
            (1.0 - a) / b,
            JumpFamily::ExpMixture { components: vec![ExpComponent { c: (a + b - 1.0) * b, b }] },
        )
    }

    pub fn gauss_laguerre(alpha: f64, mfrak: f64) -> Result<Self> {
        Self::new(0.0, 0.0, JumpFamily::GaussLaguerre { alpha, mfrak })
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn jumps(&self) -> &JumpFamily {
        &self.jumps
    }

    pub fn scalars(&self) -> &ModelScalars {
        &self.scalars
    }

    /// Pure recomputation of the derived scalars.
    pub fn derive_scalars(&self) -> ModelScalars {
        self.compute_scalars()
    }

    pub fn d_phi(&self) -> f64 {
        self.scalars.d_phi
    }

    /// Brownian coefficient once the linear Gauss-Laguerre limit is folded in.
    pub fn sigma2_eff(&self) -> f64 {
        match self.jumps {
            JumpFamily::GaussLaguerre { alpha: 1.0, .. } => self.sigma2 + 1.0,
            _ => self.sigma2,
        }
    }

    pub fn m_eff(&self) -> f64 {
        match self.jumps {
            JumpFamily::GaussLaguerre { alpha: 1.0, mfrak } => self.m + mfrak,
            _ => self.m,
        }
    }

    /// Linear coefficients `(sigma2, m)` and the mixture weights `c/b^2` by rate.
    pub(crate) fn mixture(&self) -> &[ExpComponent] {
        match &self.jumps {
            JumpFamily::ExpMixture { components } => components,
            _ => &[],
        }
    }

    fn gl_params(&self) -> Option<(f64, f64)> {
        match self.jumps {
            JumpFamily::GaussLaguerre { alpha, mfrak } if alpha < 1.0 => Some((alpha, mfrak)),
            _ => None,
        }
    }

    /// `ln phi^R` of the Gauss-Laguerre kernel (alpha < 1 only).
    fn ln_phi_r(alpha: f64, mfrak: f64, z: C64) -> C64 {
        let a = z * alpha + (alpha * mfrak + 1.0);
        ln_gamma_ratio(a, alpha)
    }

    /// Unchecked evaluation of `phi` anywhere it is analytic.
    pub fn phi(&self, z: C64) -> C64 {
        let mut v = z * self.sigma2_eff() + self.m_eff();
        for comp in self.mixture() {
            v += z * (comp.c / (comp.b * comp.b)) / (z + comp.b);
        }
        if let Some((alpha, mfrak)) = self.gl_params() {
            v += Self::ln_phi_r(alpha, mfrak, z).exp();
        }
        v
    }

    pub fn phi_real(&self, u: f64) -> f64 {
        self.phi(C64::new(u, 0.0)).re
    }

    /// Principal logarithm of `phi`.
    pub fn ln_phi(&self, z: C64) -> C64 {
        if let Some((alpha, mfrak)) = self.gl_params() {
            if self.sigma2 == 0.0 && self.m == 0.0 {
                let mut l = Self::ln_phi_r(alpha, mfrak, z);
                if l.im > PI || l.im <= -PI {
                    l.im -= 2.0 * PI * ((l.im + PI) / (2.0 * PI)).floor();
                }
                return l;
            }
        }
        self.phi(z).ln()
    }

    /// `phi'(z)/phi(z)` on the complex half-plane.
    pub fn dln_phi(&self, z: C64) -> C64 {
        let mut d = C64::new(self.sigma2_eff(), 0.0);
        for comp in self.mixture() {
            let w = z + comp.b;
            d += (comp.c / comp.b) / (w * w);
        }
        if let Some((alpha, mfrak)) = self.gl_params() {
            let a = z * alpha + (alpha * mfrak + 1.0);
            let dr = (digamma(a) - digamma(a - alpha)) * alpha;
            if self.sigma2 == 0.0 && self.m == 0.0 {
                return dr;
            }
            d += Self::ln_phi_r(alpha, mfrak, z).exp() * dr;
        }
        d / self.phi(z)
    }

    fn check_half_plane(&self, z: C64) -> Result<()> {
        let d = self.scalars.d_phi;
        let ok = z.re > d || (d == 0.0 && z.re == 0.0 && self.phi_real(0.0) > 0.0);
        if ok && z.re.is_finite() && z.im.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!("Re z = {} must exceed d_phi = {d}", z.re)))
        }
    }

    pub fn phi_eval(&self, z: C64) -> Result<C64> {
        self.check_half_plane(z)?;
        let v = self.phi(z);
        Ok(if z.im == 0.0 { C64::new(v.re, 0.0) } else { v })
    }

    pub fn psi_eval(&self, z: C64) -> Result<C64> {
        Ok(z * self.phi_eval(z)?)
    }

    /// First or second derivative of `phi` on the positive half-line.
    pub fn phi_derivative(&self, u: f64, order: u8) -> Result<f64> {
        if !(u > 0.0) {
            return Err(Error::Domain(format!("derivative needs u > 0, got {u}")));
        }
        let mut d = match order {
            1 => self.sigma2_eff(),
            2 => 0.0,
            _ => return Err(Error::Domain(format!("derivative order {order} not in {{1, 2}}"))),
        };
        for comp in self.mixture() {
            let w = u + comp.b;
            let k = comp.c / comp.b;
            d += if order == 1 { k / (w * w) } else { -2.0 * k / (w * w * w) };
        }
        if let Some((alpha, mfrak)) = self.gl_params() {
            let a = alpha * u + alpha * mfrak + 1.0;
            let r = Self::ln_phi_r(alpha, mfrak, C64::new(u, 0.0)).re.exp();
            let d1 = digamma_real(a) - digamma_real(a - alpha);
            d += if order == 1 {
                r * alpha * d1
            } else {
                r * alpha * alpha * (d1 * d1 + trigamma_real(a) - trigamma_real(a - alpha))
            };
        }
        Ok(d)
    }

    /// `Re ln(phi(x + i b) / phi(x))`, accurate when the ratio is close to 1.
    pub fn ln_abs_shift_ratio(&self, x: f64, b: f64) -> f64 {
        let px = self.phi_real(x);
        let mut delta = C64::new(0.0, b * self.sigma2_eff());
        for comp in self.mixture() {
            let k = comp.c / (comp.b * comp.b);
            let num = C64::new(0.0, b * comp.b * k);
            delta += num / (C64::new(x + comp.b, b) * (x + comp.b));
        }
        if let Some((alpha, mfrak)) = self.gl_params() {
            let l0 = Self::ln_phi_r(alpha, mfrak, C64::new(x, 0.0));
            let l1 = Self::ln_phi_r(alpha, mfrak, C64::new(x, b));
            delta += expm1_c(l1 - l0) * l0.re.exp();
        }
        let w = delta / px;
        ln1p_c(w).re
    }

    /// `Theta_phi(a, b) = int_{a/b}^inf ln(|phi(bu + ib)| / phi(bu)) du`.
    pub fn theta_phi(&self, a: f64, b: f64, quad_tol: f64) -> Result<f64> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::Domain(format!("theta needs a, b > 0, got ({a}, {b})")));
        }
        // the integrand is dominated by ln sqrt(1 + 1/u^2), whose tail past U is below 1/(2U)
        let u_cut = 1.0 / quad_tol;
        let s_max = u_cut / (1.0 + u_cut);
        let u0 = a / b;
        let est = adaptive_gk(
            |s| {
                let sc = 1.0 - s;
                let u = u0 + s / sc;
                self.ln_abs_shift_ratio(b * u, b) / (sc * sc)
            },
            0.0,
            s_max,
            0.5 * quad_tol,
            0.0,
            4000,
        )?;
        Ok(est.value.clamp(0.0, PI / 2.0 + quad_tol))
    }

    fn compute_scalars(&self) -> ModelScalars {
        let (pibar0, pibarbar0) = match &self.jumps {
            JumpFamily::Empty => (0.0, 0.0),
            JumpFamily::ExpMixture { components } => (
                components.iter().map(|c| c.c / c.b).sum(),
                components.iter().map(|c| c.c / (c.b * c.b)).sum(),
            ),
            JumpFamily::GaussLaguerre { alpha, .. } => {
                if *alpha < 1.0 {
                    (f64::INFINITY, f64::INFINITY)
                } else {
                    (0.0, 0.0)
                }
            }
        };
        let rho = if self.sigma2_eff() > 0.0 || pibarbar0.is_infinite() {
            f64::INFINITY
        } else {
            self.m + pibarbar0
        };
        let n_rho = if rho.is_infinite() || pibar0.is_infinite() {
            None
        } else {
            Some(((pibar0 / rho) - 1e-12).ceil().max(1.0) as u64 - 1)
        };
        let n_alpha = match self.jumps {
            JumpFamily::GaussLaguerre { alpha, .. } if alpha < 1.0 && self.sigma2 == 0.0 => {
                Some((alpha, alpha.powf(alpha)))
            }
            _ => None,
        };
        let flags = ClassFlags {
            n_p: self.sigma2_eff() > 0.0,
            n_inf: rho.is_infinite(),
            n_inf_c: rho.is_finite(),
            n_alpha,
        };
        ModelScalars { rho, n_rho, d_phi: self.compute_d_phi(), pibar0, pibarbar0, flags }
    }

    fn compute_d_phi(&self) -> f64 {
        if self.phi_real(0.0) <= 0.0 {
            return 0.0;
        }
        let s2 = self.sigma2_eff();
        let m = self.m_eff();
        match &self.jumps {
            JumpFamily::Empty => -m / s2,
            JumpFamily::GaussLaguerre { alpha, .. } if *alpha == 1.0 => -m / s2,
            JumpFamily::GaussLaguerre { alpha, mfrak } if self.sigma2 == 0.0 && self.m == 0.0 => {
                (1.0 - 1.0 / alpha - mfrak).min(0.0)
            }
            JumpFamily::ExpMixture { components } if components.len() == 1 => {
                let (c, b) = (components[0].c, components[0].b);
                let k = c / (b * b);
                if s2 == 0.0 {
                    -m * b / (m + k)
                } else {
                    // largest root of s2 u^2 + (m + s2 b + k) u + m b
                    let p = m + s2 * b + k;
                    let disc = (p * p - 4.0 * s2 * m * b).sqrt();
                    // stable form of (-p + disc) / (2 s2)
                    -2.0 * m * b / (p + disc)
                }
            }
            JumpFamily::ExpMixture { components } => {
                let left = -components.iter().map(|c| c.b).fold(f64::INFINITY, f64::min);
                self.largest_root(left)
            }
            JumpFamily::GaussLaguerre { alpha, mfrak } => self.largest_root(-mfrak - 1.0 / alpha),
        }
    }

    /// Largest zero of `phi` on `(left, 0]`, by a right-to-left scan then bisection.
    fn largest_root(&self, left: f64) -> f64 {
        let steps = 4000;
        let step = -left / steps as f64;
        let mut hi = 0.0;
        for j in 1..steps {
            let u = -(j as f64) * step;
            let v = self.phi_real(u);
            if !(v > 0.0) {
                let mut lo = u;
                while hi - lo > 1e-13 {
                    let mid = 0.5 * (lo + hi);
                    if self.phi_real(mid) > 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return 0.5 * (lo + hi);
            }
            hi = u;
        }
        left
    }
}

fn placeholder_scalars() -> ModelScalars {
    ModelScalars {
        rho: f64::INFINITY,
        n_rho: None,
        d_phi: 0.0,
        pibar0: 0.0,
        pibarbar0: 0.0,
        flags: ClassFlags { n_p: false, n_inf: true, n_inf_c: false, n_alpha: None },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn phi_examples() {
        let m = LevyModel::classical(1.0).unwrap();
        assert_eq!(m.phi_eval(c(1.0)).unwrap().re, 2.0);
        let st = LevyModel::sawtooth(0.5, 1.0).unwrap();
        assert!((st.phi_eval(c(1.0)).unwrap().re - 0.75).abs() < 1e-15);
        let gl = LevyModel::new(0.0, 0.0, JumpFamily::GaussLaguerre { alpha: 1.0, mfrak: 2.0 }).unwrap();
        assert_eq!(gl.phi_eval(c(3.0)).unwrap().re, 5.0);
    }

    #[test]
    fn psi_examples() {
        let bm = LevyModel::classical(0.0).unwrap();
        assert_eq!(bm.psi_eval(c(2.0)).unwrap().re, 4.0);
        let m1 = LevyModel::classical(1.0).unwrap();
        assert_eq!(m1.psi_eval(c(3.0)).unwrap().re, 12.0);
        let st = LevyModel::sawtooth(0.5, 1.0).unwrap();
        assert!((st.psi_eval(c(2.0)).unwrap().re - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn derivative_examples() {
        let m1 = LevyModel::classical(1.0).unwrap();
        assert_eq!(m1.phi_derivative(2.0, 1).unwrap(), 1.0);
        let st = LevyModel::sawtooth(0.5, 1.0).unwrap();
        assert!((st.phi_derivative(1.0, 1).unwrap() - 0.125).abs() < 1e-15);
        assert!(st.phi_derivative(0.0, 1).is_err());
    }

    #[test]
    fn gauss_laguerre_derivatives_match_differences() {
        let gl = LevyModel::gauss_laguerre(0.5, 1.0).unwrap();
        for &u in &[0.3f64, 2.0, 40.0] {
            let h = 1e-4 * u.max(1.0);
            let fd1 = (gl.phi_real(u + h) - gl.phi_real(u - h)) / (2.0 * h);
            let fd2 = (gl.phi_real(u + h) - 2.0 * gl.phi_real(u) + gl.phi_real(u - h)) / (h * h);
            assert!((gl.phi_derivative(u, 1).unwrap() - fd1).abs() < 1e-7 * fd1.abs().max(1.0));
            assert!((gl.phi_derivative(u, 2).unwrap() - fd2).abs() < 1e-4 * fd2.abs().max(1e-3));
        }
    }

    #[test]
    fn scalars_examples() {
        let st = LevyModel::sawtooth(0.5, 1.0).unwrap().derive_scalars();
        assert!((st.rho - 1.0).abs() < 1e-15);
        assert_eq!(st.n_rho, Some(0));
        assert!((st.pibar0 - 0.5).abs() < 1e-15);
        assert!(st.flags.n_inf_c);
        let bm = LevyModel::classical(0.0).unwrap().derive_scalars();
        assert!(bm.rho.is_infinite() && bm.n_rho.is_none() && bm.d_phi == 0.0 && bm.flags.n_p);
        let sp = LevyModel::small_perturbation(2.0).unwrap().derive_scalars();
        assert!((sp.d_phi + 1.0).abs() < 1e-12 && sp.flags.n_p);
        let gl = LevyModel::gauss_laguerre(0.5, 1.0).unwrap().derive_scalars();
        assert!((gl.d_phi + 2.0).abs() < 1e-12);
        assert_eq!(gl.flags.n_alpha, Some((0.5, 0.5f64.sqrt())));
    }

    #[test]
    fn bisection_agrees_with_closed_root() {
        let two = LevyModel::new(
            1.0,
            0.5,
            JumpFamily::ExpMixture {
                components: vec![ExpComponent { c: 1.0, b: 1.0 }, ExpComponent { c: 2.0, b: 3.0 }],
            },
        )
        .unwrap();
        let d = two.d_phi();
        assert!(d < 0.0 && d > -1.0);
        assert!(two.phi_real(d).abs() < 1e-11);
        let gl = LevyModel::new(0.5, 0.2, JumpFamily::GaussLaguerre { alpha: 0.5, mfrak: 1.0 }).unwrap();
        assert!(gl.phi_real(gl.d_phi()).abs() < 1e-10);
        assert!(gl.phi_real(gl.d_phi() + 1e-6) > 0.0);
    }

    #[test]
    fn half_plane_enforced() {
        let sp = LevyModel::small_perturbation(2.0).unwrap();
        assert!(sp.phi_eval(C64::new(-1.5, 0.0)).is_err());
        assert!(sp.phi_eval(C64::new(-0.5, 3.0)).is_ok());
    }

    #[test]
    fn theta_limits() {
        let bm = LevyModel::classical(0.0).unwrap();
        let t = bm.theta_phi(1.0, 1e6, 1e-8).unwrap();
        assert!((t - PI / 2.0).abs() < 1e-3, "{t}");
        // closed form for phi(u) = u
        let u0: f64 = 0.1;
        let exact = PI / 2.0 - u0.atan() - 0.5 * u0 * (1.0 + 1.0 / (u0 * u0)).ln();
        assert!((bm.theta_phi(1.0, 10.0, 1e-9).unwrap() - exact).abs() < 1e-8);
        // high-precision reference values (alpha/(2U) tail added past U = 1e6);
        // the approach to pi/4 is slow in b
        let gl = LevyModel::gauss_laguerre(0.5, 1.0).unwrap();
        let t50 = gl.theta_phi(1.0, 50.0, 1e-9).unwrap();
        assert!((t50 - 0.685_010_026_395_354_8).abs() < 1e-7, "{t50}");
        let t200 = gl.theta_phi(1.0, 200.0, 1e-9).unwrap();
        assert!((t200 - 0.751_638_936_583_266_8).abs() < 1e-7, "{t200}");
        assert!(PI / 4.0 - t200 < 0.04 && t200 > t50);
    }

    #[test]
    fn json_roundtrip_and_paths() {
        let m = LevyModel::small_perturbation(2.0).unwrap();
        let back = LevyModel::from_json_str(&m.to_json_string()).unwrap();
        assert_eq!(m, back);
        let bad = r#"{"sigma2": 1, "m": 0, "jumps": {"kind": "exp_mixture", "components": [{"c": 1, "b": -2}]}}"#;
        match LevyModel::from_json_str(bad) {
            Err(Error::Parse { path, .. }) => assert_eq!(path, "jumps.components[0].b"),
            other => panic!("{other:?}"),
        }
        let bad = r#"{"sigma2": 1, "m": 0, "jumps": {"kind": "exp_mixture", "components": [{"c": 1, "b": "x"}]}}"#;
        match LevyModel::from_json_str(bad) {
            Err(Error::Parse { path, .. }) => assert_eq!(path, "jumps.components[0].b"),
            other => panic!("{other:?}"),
        }
        let bad = r#"{"sigma2": "x", "m": 0, "jumps": {"kind": "empty"}}"#;
        match LevyModel::from_json_str(bad) {
            Err(Error::Parse { path, .. }) => assert_eq!(path, "sigma2"),
            other => panic!("{other:?}"),
        }
        assert!(LevyModel::new(0.0, 1.0, JumpFamily::Empty).is_err());
    }
}
