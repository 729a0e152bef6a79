//! Command-line front end for the gl-spectra toolkit.

mod json;
pub mod verify;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gl_spectra::invariant_density::DensityEvaluator;
use gl_spectra::montecarlo::{eigen_check_from_samples, sample_gl, McEstimate, PathConfig};
use gl_spectra::spectral::{membership, Membership, Spectral};
use gl_spectra::weierstrass::SpectralContext;
use gl_spectra::{Complex64, Error, LevyModel};
use serde::Serialize;
use std::io::Write;
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(name = "gl-spectra", version, about = "Spectral toolkit for generalized Laguerre semigroups")]
struct Cli {
    /// Worker threads for parallel sections.
    #[arg(long, global = true, env = "GL_SPECTRA_THREADS")]
    threads: Option<usize>,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct ModelArg {
    /// Model description (JSON).
    #[arg(long)]
    model: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Derived scalars and class flags of a model.
    Model(ModelArg),
    /// Weierstrass product at complex points such as `4+0i`.
    Wphi {
        #[command(flatten)]
        model: ModelArg,
        /// Complex points.
        #[arg(long, required = true, num_args = 1.., allow_hyphen_values = true)]
        z: Vec<String>,
    },
    /// Invariant density or its derivatives on a set of points.
    Density {
        #[command(flatten)]
        model: ModelArg,
        /// Evaluation points.
        #[arg(long, required = true, num_args = 1..)]
        x: Vec<f64>,
        /// Derivative order.
        #[arg(long, default_value_t = 0)]
        deriv: usize,
        /// Force Mellin inversion even when a closed form exists.
        #[arg(long, value_enum, default_value_t = Route::Auto)]
        route: Route,
    },
    /// Eigenpolynomial coefficients, Gram matrix or norm table.
    Spectrum {
        #[command(flatten)]
        model: ModelArg,
        /// Coefficients of P_0..P_n.
        #[arg(long)]
        coeffs: Option<usize>,
        /// Gram matrix of V_0..V_n.
        #[arg(long)]
        gram: Option<usize>,
        /// Norms of P_n and V_n up to n.
        #[arg(long)]
        norms: Option<usize>,
    },
    /// Heat-kernel partial sums on a grid.
    Heatkernel {
        #[command(flatten)]
        model: ModelArg,
        /// Times.
        #[arg(long, required = true, num_args = 1..)]
        t: Vec<f64>,
        /// Starting points.
        #[arg(long, required = true, num_args = 1..)]
        x: Vec<f64>,
        /// End points.
        #[arg(long, required = true, num_args = 1..)]
        y: Vec<f64>,
        /// Truncation order.
        #[arg(long, default_value_t = 40)]
        n: usize,
    },
    /// Monte-Carlo estimate against its analytic target.
    Simulate {
        #[command(flatten)]
        model: ModelArg,
        /// Starting point, positive.
        #[arg(long)]
        x0: f64,
        /// Time.
        #[arg(long)]
        t: f64,
        /// Number of paths.
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        /// Clock step.
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Base seed; path i uses stream i.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Path horizon in Lévy time.
        #[arg(long, default_value_t = 100.0)]
        horizon: f64,
        /// `eigen:n` or `moments:n`.
        #[arg(long, default_value = "eigen:1")]
        check: String,
    },
    /// Acceptance suite.
    Verify {
        /// Restrict to checks involving this model.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Base seed; path i uses stream i.
        #[arg(long, default_value_t = verify::SuiteOptions::default().seed)]
        seed: u64,
        /// Number of paths.
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        /// Also write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Route {
    Auto,
    Mellin,
}

/// Parses `argv` (program name first) and runs; returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run_with(argv, &mut std::io::stdout(), &mut std::io::stderr())
}

/// As [`run`], writing to the given streams.
pub fn run_with<I, T>(argv: I, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            let _ = writeln!(err, "error: --threads must be positive");
            return 2;
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: cannot start workers: {e}");
            return 1;
        }
    };
    let format = cli.format;
    pool.install(|| match dispatch(cli.command, format, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    })
}

/// Scientific notation with 17 significant digits, which round-trips exactly.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_row(out: &mut dyn Write, cells: &[String]) -> std::io::Result<()> {
    writeln!(out, "{}", cells.join(","))
}

fn load(path: &PathBuf) -> Result<LevyModel, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    LevyModel::from_json_str(&text)
}

/// Parses `a+bi`, `a-bi`, `a` or `bi`.
pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || format!("cannot read complex number '{s}'");
    if let Some(body) = t.strip_suffix('i') {
        let bytes = body.as_bytes();
        let split = (1..bytes.len())
            .rev()
            .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
        match split {
            Some(k) => {
                let re: f64 = body[..k].parse().map_err(|_| bad())?;
                let im_txt = &body[k..];
                let im: f64 = match im_txt {
                    "+" => 1.0,
                    "-" => -1.0,
                    _ => im_txt.parse().map_err(|_| bad())?,
                };
                Ok(Complex64::new(re, im))
            }
            None => {
                let im: f64 = match body {
                    "" | "+" => 1.0,
                    "-" => -1.0,
                    _ => body.parse().map_err(|_| bad())?,
                };
                Ok(Complex64::new(0.0, im))
            }
        }
    } else {
        Ok(Complex64::new(t.parse().map_err(|_| bad())?, 0.0))
    }
}

#[derive(Serialize)]
struct ModelReport {
    sigma2: f64,
    m: f64,
    rho: Option<f64>,
    n_rho: Option<u64>,
    d_phi: f64,
    pibar0: Option<f64>,
    pibarbar0: Option<f64>,
    n_p: bool,
    n_inf: bool,
    n_inf_c: bool,
    n_alpha: Option<(f64, f64)>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_else(|| "inf".into())
}

fn dispatch(cmd: Command, format: Format, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<i32, Error> {
    let io = |e: std::io::Error| Error::Config(format!("write failed: {e}"));
    match cmd {
        Command::Model(arg) => {
            let model = load(&arg.model)?;
            let sc = model.scalars();
            let rep = ModelReport {
                sigma2: model.sigma2(),
                m: model.m(),
                rho: finite(sc.rho),
                n_rho: sc.n_rho,
                d_phi: sc.d_phi,
                pibar0: finite(sc.pibar0),
                pibarbar0: finite(sc.pibarbar0),
                n_p: sc.flags.n_p,
                n_inf: sc.flags.n_inf,
                n_inf_c: sc.flags.n_inf_c,
                n_alpha: sc.flags.n_alpha,
            };
            match format {
                Format::Json => writeln!(out, "{}", json::to_string(&rep)).map_err(io)?,
                Format::Csv => {
                    csv_row(out, &["quantity".into(), "value".into()]).map_err(io)?;
                    let rows = [
                        ("sigma2", num(rep.sigma2)),
                        ("m", num(rep.m)),
                        ("rho", opt_num(rep.rho)),
                        ("n_rho", rep.n_rho.map(|v| v.to_string()).unwrap_or_else(|| "inf".into())),
                        ("d_phi", num(rep.d_phi)),
                        ("pibar0", opt_num(rep.pibar0)),
                        ("pibarbar0", opt_num(rep.pibarbar0)),
                        ("n_p", rep.n_p.to_string()),
                        ("n_inf", rep.n_inf.to_string()),
                        ("n_inf_c", rep.n_inf_c.to_string()),
                        ("n_alpha", rep.n_alpha.map(|a| num(a.0)).unwrap_or_else(|| "none".into())),
                    ];
                    for (k, v) in rows {
                        csv_row(out, &[k.into(), v]).map_err(io)?;
                    }
                }
            }
            Ok(0)
        }
        Command::Wphi { model, z } => {
            let model = load(&model.model)?;
            let ctx = SpectralContext::new(&model)?;
            let mut rows = Vec::new();
            for s in &z {
                let zc = parse_complex(s).map_err(Error::Config)?;
                rows.push((zc, ctx.mellin_v(zc)?));
            }
            match format {
                Format::Csv => {
                    csv_row(out, &["re_z".into(), "im_z".into(), "re_w".into(), "im_w".into()]).map_err(io)?;
                    for (zc, w) in rows {
                        csv_row(out, &[num(zc.re), num(zc.im), num(w.re), num(w.im)]).map_err(io)?;
                    }
                }
                Format::Json => {
                    let v: Vec<[f64; 4]> = rows.iter().map(|(zc, w)| [zc.re, zc.im, w.re, w.im]).collect();
                    writeln!(out, "{}", json::to_string(&v)).map_err(io)?;
                }
            }
            Ok(0)
        }
        Command::Density { model, x, deriv, route } => {
            let model = load(&model.model)?;
            let ev = match route {
                Route::Auto => DensityEvaluator::new(&model)?,
                Route::Mellin => DensityEvaluator::mellin(&model)?,
            };
            let mut rows = Vec::new();
            for &xv in &x {
                rows.push((xv, ev.nu_deriv(xv, deriv)?));
            }
            match format {
                Format::Csv => {
                    let col = if deriv == 0 { "nu".to_string() } else { format!("nu_d{deriv}") };
                    csv_row(out, &["x".into(), col]).map_err(io)?;
                    for (xv, v) in rows {
                        csv_row(out, &[num(xv), num(v)]).map_err(io)?;
                    }
                }
                Format::Json => writeln!(out, "{}", json::to_string(&rows)).map_err(io)?,
            }
            Ok(0)
        }
        Command::Spectrum { model, coeffs, gram, norms } => {
            let model = load(&model.model)?;
            let s = Spectral::new(&model)?;
            if coeffs.is_none() && gram.is_none() && norms.is_none() {
                return Err(Error::Config("spectrum needs --coeffs, --gram or --norms".into()));
            }
            if let Some(n) = coeffs {
                let table: Vec<Vec<f64>> = (0..=n).map(|k| s.eigen_pair(k).p_coeffs).collect();
                match format {
                    Format::Json => writeln!(out, "{}", json::to_string(&table)).map_err(io)?,
                    Format::Csv => {
                        csv_row(out, &["n".into(), "k".into(), "coeff".into()]).map_err(io)?;
                        for (n, row) in table.iter().enumerate() {
                            for (k, c) in row.iter().enumerate() {
                                csv_row(out, &[n.to_string(), k.to_string(), num(*c)]).map_err(io)?;
                            }
                        }
                    }
                }
            }
            for (n, what) in gram.iter().map(|n| (*n, "gram")).chain(norms.iter().map(|n| (*n, "norms"))) {
                if let Some(bad) = (0..=n).find(|&k| membership(&model, k) == Membership::NotInL2) {
                    writeln!(
                        err,
                        "warning: V_{bad} is not square integrable against the invariant law; {what} up to {n} refused"
                    )
                    .map_err(io)?;
                    return Ok(1);
                }
                if what == "gram" {
                    let g = s.gram(n)?;
                    let header: Vec<String> = std::iter::once("n".to_string()).chain((0..=n).map(|m| format!("v{m}"))).collect();
                    csv_row(out, &header).map_err(io)?;
                    for (i, row) in g.iter().enumerate() {
                        let cells: Vec<String> = std::iter::once(i.to_string()).chain(row.iter().map(|v| num(*v))).collect();
                        csv_row(out, &cells).map_err(io)?;
                    }
                } else {
                    let rep = s.norms_report(n)?;
                    csv_row(out, &["n".into(), "norm_P".into(), "norm_V".into()]).map_err(io)?;
                    for r in &rep.rows {
                        csv_row(out, &[r.n.to_string(), num(r.norm_p), num(r.norm_v)]).map_err(io)?;
                    }
                    writeln!(err, "fitted slope of ln ||V_n||^2 on ln n: {}", num(rep.v_sq_slope)).map_err(io)?;
                }
            }
            Ok(0)
        }
        Command::Heatkernel { model, t, x, y, n } => {
            let model = load(&model.model)?;
            let s = Spectral::new(&model)?;
            csv_row(out, &["t".into(), "x".into(), "y".into(), "value".into(), "last_term".into()]).map_err(io)?;
            for &tv in &t {
                for &xv in &x {
                    for &yv in &y {
                        let k = s.heat_kernel(tv, xv, yv, n)?;
                        csv_row(out, &[num(tv), num(xv), num(yv), num(k.value), num(k.last_term)]).map_err(io)?;
                    }
                }
            }
            Ok(0)
        }
        Command::Simulate { model, x0, t, paths, dt, seed, horizon, check } => {
            let model = load(&model.model)?;
            let cfg = PathConfig { dt, horizon, n_paths: paths, seed };
            let (kind, order) = check
                .split_once(':')
                .and_then(|(k, n)| n.parse::<usize>().ok().map(|n| (k.to_string(), n)))
                .ok_or_else(|| Error::Config(format!("--check expects eigen:n or moments:n, got {check}")))?;
            let samples = sample_gl(&model, &cfg, x0, t)?;
            let (estimate, target) = match kind.as_str() {
                "eigen" => {
                    if order > 5 {
                        return Err(Error::Config("eigen check limited to n <= 5".into()));
                    }
                    let r = eigen_check_from_samples(&model, &samples, x0, t, order)?;
                    (r.estimate, r.target)
                }
                "moments" => {
                    let est = McEstimate::from_samples(&samples.iter().map(|x| x.powi(order as i32)).collect::<Vec<_>>());
                    let mut mono = vec![0.0; order + 1];
                    mono[order] = 1.0;
                    let s = Spectral::new(&model)?;
                    (est, s.semigroup_apply_poly(t, &mono, x0, order)?)
                }
                other => return Err(Error::Config(format!("unknown check kind {other}"))),
            };
            let z = estimate.z_score(target);
            match format {
                Format::Csv => {
                    csv_row(out, &["estimate".into(), "std_error".into(), "target".into(), "z".into()]).map_err(io)?;
                    csv_row(out, &[num(estimate.mean), num(estimate.std_error), num(target), num(z)]).map_err(io)?;
                }
                Format::Json => writeln!(
                    out,
                    "{}",
                    json::to_string(&serde_json::json!({"estimate": estimate.mean, "std_error": estimate.std_error, "target": target, "z": z}))
                )
                .map_err(io)?,
            }
            Ok(0)
        }
        Command::Verify { model, seed, paths, report } => {
            let model = model.as_ref().map(load).transpose()?;
            let opts = verify::SuiteOptions { seed, n_paths: paths, model, ..Default::default() };
            let rep = verify::run_suite(&opts);
            let json = rep.to_json();
            if let Some(path) = report {
                std::fs::write(&path, format!("{json}\n"))
                    .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
            }
            match format {
                Format::Json => writeln!(out, "{json}").map_err(io)?,
                Format::Csv => {
                    for r in &rep.results {
                        writeln!(
                            out,
                            "{} {:<4} measured={} tolerance={} ({:.2} s) {}: {}",
                            r.id,
                            format!("{:?}", r.status).to_uppercase(),
                            num(r.measured),
                            num(r.tolerance),
                            r.elapsed.as_secs_f64(),
                            r.description,
                            r.detail
                        )
                        .map_err(io)?;
                    }
                }
            }
            Ok(if rep.all_passed() { 0 } else { 1 })
        }
    }
}
