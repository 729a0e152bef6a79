//! The acceptance suite behind `verify`.

use gl_spectra::invariant_density::DensityEvaluator;
use gl_spectra::montecarlo::{eigen_check_from_samples, sample_gl_multi, McEstimate, PathConfig};
use gl_spectra::special::ln_gamma;
use gl_spectra::spectral::{ls_slope, Spectral};
use gl_spectra::weierstrass::SpectralContext;
use gl_spectra::{Complex64, Error, ExpComponent, JumpFamily, LevyModel};
use serde::Serialize;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub id: String,
    pub description: String,
    pub status: Status,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
    /// Wall time; kept out of the JSON so reports stay byte-stable.
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub n_paths: usize,
    pub dt: f64,
    pub results: Vec<CheckResult>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        crate::json::to_string(self)
    }

    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.status != Status::Fail)
    }
}

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    pub seed: u64,
    pub n_paths: usize,
    pub dt: f64,
    /// Restricts the suite to checks involving this model.
    pub model: Option<LevyModel>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { seed: 20_240_601, n_paths: 100_000, dt: 1e-3, model: None }
    }
}

/// Models the suite is written against.
pub mod presets {
    use super::*;

    pub fn gamma() -> LevyModel {
        LevyModel::classical(0.0).expect("valid preset")
    }
    pub fn classical_m1() -> LevyModel {
        LevyModel::classical(1.0).expect("valid preset")
    }
    pub fn small_perturbation_m2() -> LevyModel {
        LevyModel::small_perturbation(2.0).expect("valid preset")
    }
    pub fn gauss_laguerre() -> LevyModel {
        LevyModel::gauss_laguerre(0.5, 1.0).expect("valid preset")
    }
    pub fn sawtooth() -> LevyModel {
        LevyModel::sawtooth(0.5, 1.0).expect("valid preset")
    }
    /// A family without closed-form density, handled by Mellin inversion.
    pub fn two_component() -> LevyModel {
        LevyModel::new(
            1.0,
            0.5,
            JumpFamily::ExpMixture {
                components: vec![ExpComponent { c: 1.0, b: 1.0 }, ExpComponent { c: 2.0, b: 3.0 }],
            },
        )
        .expect("valid preset")
    }
    pub fn families() -> Vec<LevyModel> {
        vec![classical_m1(), small_perturbation_m2(), gauss_laguerre(), sawtooth()]
    }
    pub fn all() -> Vec<LevyModel> {
        vec![gamma(), classical_m1(), small_perturbation_m2(), gauss_laguerre(), sawtooth()]
    }
}

struct Outcome {
    pass: bool,
    measured: f64,
    tolerance: f64,
    detail: String,
}

type CheckFn = fn(&SuiteOptions, &[LevyModel]) -> Result<Outcome, Error>;

struct CheckDef {
    id: &'static str,
    description: &'static str,
    /// Models the check is pinned to; empty means it runs on any model.
    pinned: fn() -> Vec<LevyModel>,
    run: CheckFn,
}

fn defs() -> Vec<CheckDef> {
    vec![
        CheckDef { id: "C01", description: "gamma recovery of the Weierstrass product", pinned: || vec![presets::gamma()], run: c01 },
        CheckDef { id: "C02", description: "functional equation residual", pinned: Vec::new, run: c02 },
        CheckDef { id: "C03", description: "density moments against W(n+1)", pinned: Vec::new, run: c03 },
        CheckDef { id: "C04", description: "closed form against Mellin inversion", pinned: || vec![presets::classical_m1()], run: c04 },
        CheckDef {
            id: "C05",
            description: "Gram matrix close to the identity",
            pinned: || vec![presets::classical_m1(), presets::small_perturbation_m2(), presets::two_component()],
            run: c05,
        },
        CheckDef { id: "C06", description: "eigenpolynomial norms at most one", pinned: Vec::new, run: c06 },
        CheckDef { id: "C07", description: "co-eigenfunction norm growth", pinned: || vec![presets::small_perturbation_m2()], run: c07 },
        CheckDef { id: "C08", description: "saw-tooth membership cutoff", pinned: || vec![presets::sawtooth()], run: c08 },
        CheckDef { id: "C09", description: "heat-kernel row mass and symmetry", pinned: || vec![presets::classical_m1()], run: c09 },
        CheckDef {
            id: "C10",
            description: "Monte-Carlo eigenfunction check",
            pinned: || vec![presets::classical_m1(), presets::small_perturbation_m2()],
            run: c10,
        },
        CheckDef {
            id: "C11",
            description: "Monte-Carlo invariant moments",
            pinned: || vec![presets::classical_m1(), presets::small_perturbation_m2()],
            run: c11,
        },
        CheckDef { id: "C12", description: "hypocoercive decay bound", pinned: || vec![presets::small_perturbation_m2()], run: c12 },
    ]
}

/// Runs checks C01 to C12.
pub fn run_checks(opts: &SuiteOptions) -> Vec<CheckResult> {
    defs()
        .into_iter()
        .map(|def| {
            let start = Instant::now();
            let pinned = (def.pinned)();
            let models = match (&opts.model, pinned.is_empty()) {
                (None, true) => presets::families(),
                (None, false) => pinned,
                (Some(m), true) => vec![m.clone()],
                (Some(m), false) => {
                    if pinned.contains(m) {
                        pinned
                    } else {
                        Vec::new()
                    }
                }
            };
            let (status, measured, tolerance, detail) = if models.is_empty() {
                (Status::Skip, f64::NAN, f64::NAN, "not applicable to the selected model".to_string())
            } else {
                match (def.run)(opts, &models) {
                    Ok(o) => (if o.pass { Status::Pass } else { Status::Fail }, o.measured, o.tolerance, o.detail),
                    Err(e) => (Status::Fail, f64::NAN, f64::NAN, format!("error: {e}")),
                }
            };
            CheckResult {
                id: def.id.into(),
                description: def.description.into(),
                status,
                measured,
                tolerance,
                detail,
                elapsed: start.elapsed(),
            }
        })
        .collect()
}

/// Full suite; C13 reruns C01 to C12 and compares the serialized reports.
pub fn run_suite(opts: &SuiteOptions) -> RunReport {
    let first = report(opts, run_checks(opts));
    let start = Instant::now();
    let second = report(opts, run_checks(opts));
    let same = first.to_json() == second.to_json();
    let mut out = first;
    out.results.push(CheckResult {
        id: "C13".into(),
        description: "byte-identical report on rerun".into(),
        status: if same { Status::Pass } else { Status::Fail },
        measured: if same { 0.0 } else { 1.0 },
        tolerance: 0.0,
        detail: "second run of C01-C12 with the same seed".into(),
        elapsed: start.elapsed(),
    });
    out
}

fn report(opts: &SuiteOptions, results: Vec<CheckResult>) -> RunReport {
    RunReport {
        tool: "gl-spectra".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: opts.seed,
        n_paths: opts.n_paths,
        dt: opts.dt,
        results,
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn grid() -> Vec<Complex64> {
    let mut g = Vec::new();
    for &re in &[0.5, 1.0, 2.0, 3.5, 5.0] {
        for &im in &[0.0, 1.0, -1.0, 5.0, -5.0] {
            g.push(c(re, im));
        }
    }
    g
}

fn c01(_: &SuiteOptions, models: &[LevyModel]) -> Result<Outcome, Error> {
    let ctx = SpectralContext::new(&models[0])?;
    let mut worst: f64 = 0.0;
    for z in grid() {
        let d = ctx.log_w(z)? - ln_gamma(z);
        worst = worst.max((d.exp() - 1.0).norm());
    }
    Ok(Outcome { pass: worst <= 1e-8, measured: worst, tolerance: 1e-8, detail: "max relative error".into() })
}

fn c02(_: &SuiteOptions, models: &[LevyModel]) -> Result<Outcome, Error> {
    let mut worst: f64 = 0.0;
    for model in models {
        let ctx = SpectralContext::new(model)?;
        for z in grid() {
            let w1 = ctx.mellin_v(z + 1.0)?;
            let w0 = ctx.mellin_v(z)?;
            worst = worst.max((w1 - model.phi_eval(z)? * w0).norm() / w1.norm());
        }
    }
    Ok(Outcome {
        pass: worst <= 1e-9,
        measured: worst,
        tolerance: 1e-9,
        detail: format!("max relative residual over {} models", models.len()),
    })
}

fn moment_error(ev: &DensityEvaluator) -> Result<f64, Error> {
    let mut worst: f64 = 0.0;
    for n in 0..=8 {
        let q = ev.expectation(|x| x.powi(n), 1e-13, 1e-12)?.value;
        let w = ev.invariant_moment(n as usize);
        worst = worst.max((q - w).abs() / w);
    }
    Ok(worst)
}

fn c03(_: &SuiteOptions, models: &[LevyModel]) -> Result<Outcome, Error> {
    let mut closed: f64 = 0.0;
    let mut mellin: f64 = 0.0;
    let mut names = Vec::new();
    for model in models {
        let ev = DensityEvaluator::new(model)?;
        match ev.source() {
            gl_spectra::invariant_density::DensitySource::ClosedForm(_) => {
                closed = closed.max(moment_error(&ev)?);
                names.push("closed");
            }
            _ => {
                mellin = mellin.max(moment_error(&ev)?);
                names.push("mellin");
            }
        }
    }
    if models.iter().any(|m| *m == presets::classical_m1()) {
        mellin = mellin.max(moment_error(&DensityEvaluator::mellin(&presets::classical_m1())?)?);
    }
    Ok(Outcome {
        pass: closed <= 1e-6 && mellin <= 1e-5,
        measured: closed,
        tolerance: 1e-6,
        detail: format!("Mellin route max relative error {mellin:.3e} (tolerance 1e-5)"),
    })
}

fn c04(_: &SuiteOptions, models: &[LevyModel]) -> Result<Outcome, Error> {
    let closed = DensityEvaluator::new(&models[0])?;
    let mellin = DensityEvaluator::mellin(&models[0])?;
    let mut worst: f64 = 0.0;
    for k in 0..21 {
        let x = 0.1 + (8.0 - 0.1) * k as f64 / 20.0;
        worst = worst.max((closed.nu(x)? - mellin.nu(x)?).abs());
    }
    Ok(Outcome { pass: worst <= 1e-6, measured: worst, tolerance: 1e-6, detail: "max absolute error on 21 points".into() })
}

fn gram_defect(model: &LevyModel, n: usize) -> Result<f64, Error> {
    let g = Spectral::new(model)?.gram(n)?;
    let mut worst: f64 = 0.0;
    for (i, row) in g.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            worst = worst.max((v - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    Ok(worst)
}

fn c05(_: &SuiteOptions, models: &[LevyModel]) -> Result<Outcome, Error> {
    let mut closed: f64 = 0.0;
    let mut mellin: f64 = 0.0;
    for model in models {
        if *model == presets::two_component() {
            mellin = mellin.max(gram_defect(model, 4)?);
        } else {
            closed = closed.max(gram_defect(model, 6)?);
        }
    }
    Ok(Outcome {
        pass: closed <= 1e-6 && mellin <= 1e-4,
        measured: closed,
        tolerance: 1e-6,
        detail: format!("Mellin-route family at N=4: {mellin:.3e} (tolerance 1e-4)"),
    })
}

fn c06(_: &SuiteOptions, models: &[LevyModel]) -> Result<Outcome, Error> {
    let models: Vec<LevyModel> = if models == presets::families().as_slice() { presets::all() } else { models.to_vec() };
    let mut worst: f64 = 0.0;
    for model in &models {
        let s = Spectral::new(model)?;
        for n in 0..=12 {
            worst = worst.max(s.eigen_norm(n)?);
        }
    }
    Ok(Outcome {
        pass: worst <= 1.0 + 1e-8,
        measured: worst,
        tolerance: 1.0 + 1e-8,
        detail: format!("largest norm over n <= 12 and {} models", models.len()),
    })
}

fn c07(_: &SuiteOptions, models: &[LevyModel]) -> Result<Outcome, Error> {
    let s = Spectral::new(&models[0])?;
    let mut pts = Vec::new();
    for n in 8..=24 {
        pts.push(((n as f64).ln(), 2.0 * s.coeigen_norm(n)?.ln()));
    }
    let slope = ls_slope(&pts);
    let mfrak = 2.0;
    let (lo, hi) = (mfrak + 0.7, mfrak + 1.3);
    Ok(Outcome {
        pass: slope >= lo && slope <= hi,
        measured: slope,
        tolerance: 0.3,
        detail: format!("slope of ln ||V_n||^2 on ln n, n = 8..24; accepted window [{lo}, {hi}]"),
    })
}

fn c08(_: &SuiteOptions, models: &[LevyModel]) -> Result<Outcome, Error> {
    let s = Spectral::new(&models[0])?;
    let diverged = match s.coeigen_norm_sq_certified(1) {
        Err(Error::DivergenceDetected { partial }) => Some(partial),
        Ok(_) => None,
        Err(e) => return Err(e),
    };
    let zero = s.coeigen_norm_sq_certified(0)?;
    let v0 = *zero.partials.last().unwrap_or(&f64::NAN);
    let miss = (v0 - 1.0).abs();
    Ok(Outcome {
        pass: diverged.is_some() && zero.converged && miss <= 1e-8,
        measured: miss,
        tolerance: 1e-8,
        detail: match diverged {
            Some(p) => format!("<V1,V1> partial integral reached {p:.3e}"),
            None => "<V1,V1> partial integrals stayed bounded".into(),
        },
    })
}

fn c09(_: &SuiteOptions, models: &[LevyModel]) -> Result<Outcome, Error> {
    let s = Spectral::new(&models[0])?;
    let mut mass: f64 = 0.0;
    for &x in &[0.5, 2.0] {
        mass = mass.max((s.kernel_row_mass(0.5, x, 40)? - 1.0).abs());
    }
    let pts = [0.3, 0.8, 1.5, 2.5, 4.0];
    let mut sym: f64 = 0.0;
    for &x in &pts {
        for &y in &pts {
            let a = s.heat_kernel(0.5, x, y, 40)?.value / s.density().nu(y)?;
            let b = s.heat_kernel(0.5, y, x, 40)?.value / s.density().nu(x)?;
            sym = sym.max((a - b).abs());
        }
    }
    Ok(Outcome {
        pass: mass <= 1e-4 && sym <= 1e-6,
        measured: mass,
        tolerance: 1e-4,
        detail: format!("symmetry defect {sym:.3e} (tolerance 1e-6)"),
    })
}

fn path_config(opts: &SuiteOptions, horizon: f64) -> PathConfig {
    PathConfig { dt: opts.dt, horizon, n_paths: opts.n_paths, seed: opts.seed }
}

fn c10(opts: &SuiteOptions, models: &[LevyModel]) -> Result<Outcome, Error> {
    let points = [(0.5, 0.5), (0.5, 1.0), (2.0, 0.5), (2.0, 1.0)];
    let mut worst_family = 12;
    let mut worst_z: f64 = 0.0;
    let mut counts = Vec::new();
    for model in models {
        let samples = sample_gl_multi(model, &path_config(opts, 50.0), &points)?;
        let mut good = 0;
        for (k, &(x0, t)) in points.iter().enumerate() {
            for n in 1..=3 {
                let r = eigen_check_from_samples(model, &samples[k], x0, t, n)?;
                worst_z = worst_z.max(r.z.abs());
                if r.z.abs() <= 3.0 {
                    good += 1;
                }
            }
        }
        counts.push(good);
        worst_family = worst_family.min(good);
    }
    Ok(Outcome {
        pass: worst_family >= 11,
        measured: worst_z,
        tolerance: 3.0,
        detail: format!("cells with |z| <= 3 per family: {counts:?} of 12"),
    })
}

fn c11(opts: &SuiteOptions, models: &[LevyModel]) -> Result<Outcome, Error> {
    let mut worst_z: f64 = 0.0;
    for model in models {
        let ctx = SpectralContext::new(model)?;
        let samples = sample_gl_multi(model, &path_config(opts, 100.0), &[(1.0, 8.0)])?.remove(0);
        for n in 1..=3 {
            let est = McEstimate::from_samples(&samples.iter().map(|x| x.powi(n)).collect::<Vec<_>>());
            worst_z = worst_z.max(est.z_score(ctx.invariant_moment(n as usize)).abs());
        }
    }
    Ok(Outcome {
        pass: worst_z <= 3.0,
        measured: worst_z,
        tolerance: 3.0,
        detail: "largest |estimate - W(n+1)| / SE at T = 8, x0 = 1, n <= 3".into(),
    })
}

fn c12(_: &SuiteOptions, models: &[LevyModel]) -> Result<Outcome, Error> {
    let s = Spectral::new(&models[0])?;
    let fs: [&[f64]; 3] = [&[0.0, 1.0], &[0.0, 0.0, 1.0], &[0.0, 1.0, -1.0]];
    let mut worst: f64 = 0.0;
    let mut worst_triplet: f64 = 0.0;
    let mut cross: f64 = 0.0;
    for f in fs {
        for &t in &[0.1, 0.5, 1.0, 2.0, 3.0] {
            let pinned = s.equilibrium_gap(t, f, 1e-3, Some(3.0))?;
            let own = s.equilibrium_gap(t, f, 1e-3, None)?;
            worst = worst.max(pinned.gap / pinned.bound);
            worst_triplet = worst_triplet.max(own.gap / own.bound);
            cross = cross.max((pinned.gap - pinned.gap_quadrature).abs());
        }
    }
    Ok(Outcome {
        pass: worst <= 1.0,
        measured: worst,
        tolerance: 1.0,
        detail: format!(
            "largest gap/bound with mbar = 3; with mbar from the triplet ({:.1}): {worst_triplet:.6}; quadrature cross-check {cross:.1e}",
            s.equilibrium_gap(1.0, &[0.0, 1.0], 1e-3, None)?.mbar
        ),
    })
}
