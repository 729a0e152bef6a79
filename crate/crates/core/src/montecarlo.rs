//! Monte-Carlo oracle: paths of the spectrally negative Lévy process and
//! of the generalized Laguerre process through the Lamperti time change.

use crate::error::{Error, Result};
use crate::levy_model::{JumpFamily, LevyModel};
use crate::spectral::eigen_poly;
use crate::weierstrass::SpectralContext;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathConfig {
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig { dt: 1e-3, horizon: 100.0, n_paths: 100_000, seed: 0 }
    }
}

impl PathConfig {
    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.n_paths == 0 {
            return Err(Error::Config("at least one path is needed".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

impl McEstimate {
    /// Mean and standard error with pairwise summation over the samples in order.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = pairwise_sum(samples) / n as f64;
        let dev: Vec<f64> = samples.iter().map(|v| (v - mean) * (v - mean)).collect();
        let var = if n > 1 { pairwise_sum(&dev) / (n - 1) as f64 } else { 0.0 };
        McEstimate { mean, std_error: (var / n as f64).sqrt(), n_paths: n }
    }

    /// `(mean - target) / std_error`, zero when both the error and the miss vanish.
    pub fn z_score(&self, target: f64) -> f64 {
        let miss = self.mean - target;
        if self.std_error == 0.0 {
            if miss.abs() <= 1e-12 * target.abs().max(1.0) {
                0.0
            } else {
                f64::INFINITY.copysign(miss)
            }
        } else {
            miss / self.std_error
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenCheck {
    pub estimate: McEstimate,
    pub target: f64,
    pub z: f64,
}

fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Exact synthesis of the finite-activity jump part.
#[derive(Debug, Clone)]
struct Dynamics {
    drift: f64,
    vol: f64,
    rate: f64,
    // cumulative component weights c/b normalised, with the size rates b
    cumulative: Vec<f64>,
    size_rates: Vec<f64>,
}

impl Dynamics {
    fn new(model: &LevyModel) -> Result<Self> {
        let components = match model.jumps() {
            JumpFamily::Empty => Vec::new(),
            JumpFamily::ExpMixture { components } => components.clone(),
            JumpFamily::GaussLaguerre { .. } => {
                return Err(Error::UnsupportedJumps(
                    "infinite-activity jumps have no exact compound Poisson synthesis".into(),
                ))
            }
        };
        let sc = model.scalars();
        let rate = sc.pibar0;
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for c in &components {
            acc += c.c / c.b;
            cumulative.push(acc / rate);
        }
        Ok(Dynamics {
            drift: model.m() + sc.pibarbar0,
            vol: (2.0 * model.sigma2()).sqrt(),
            rate,
            cumulative,
            size_rates: components.iter().map(|c| c.b).collect(),
        })
    }

    fn jump_size(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.gen();
        let k = self.cumulative.iter().position(|&c| u < c).unwrap_or(self.size_rates.len() - 1);
        let e: f64 = rng.sample(Exp1);
        e / self.size_rates[k]
    }
}

/// One path: advances xi on the grid, with jump times drawn exactly.
struct PathState {
    rng: ChaCha8Rng,
    t: f64,
    xi: f64,
    next_jump: f64,
}

impl PathState {
    fn new(seed: u64, index: u64, dyn_: &Dynamics) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let next_jump = if dyn_.rate > 0.0 {
            let e: f64 = rng.sample(Exp1);
            e / dyn_.rate
        } else {
            f64::INFINITY
        };
        PathState { rng, t: 0.0, xi: 0.0, next_jump }
    }

    fn step(&mut self, dyn_: &Dynamics, dt: f64) {
        let z: f64 = self.rng.sample(StandardNormal);
        let t_new = self.t + dt;
        let mut xi = self.xi + dyn_.drift * dt + dyn_.vol * dt.sqrt() * z;
        while self.next_jump <= t_new {
            xi -= dyn_.jump_size(&mut self.rng);
            let e: f64 = self.rng.sample(Exp1);
            self.next_jump += e / dyn_.rate;
        }
        self.t = t_new;
        self.xi = xi;
    }
}

/// Path of xi on the dt-grid up to the horizon, for path number `index`.
pub fn simulate_xi(model: &LevyModel, cfg: &PathConfig, index: u64) -> Result<Vec<f64>> {
    cfg.validate()?;
    let dyn_ = Dynamics::new(model)?;
    let steps = (cfg.horizon / cfg.dt).round() as usize;
    let mut st = PathState::new(cfg.seed, index, &dyn_);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(0.0);
    for _ in 0..steps {
        st.step(&dyn_, cfg.dt);
        out.push(st.xi);
    }
    Ok(out)
}

/// Samples of `xi_t` at the grid time nearest to `t`, one per path.
pub fn sample_xi(model: &LevyModel, cfg: &PathConfig, t: f64) -> Result<Vec<f64>> {
    cfg.validate()?;
    let dyn_ = Dynamics::new(model)?;
    let steps = (t / cfg.dt).round() as usize;
    Ok((0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut st = PathState::new(cfg.seed, i, &dyn_);
            for _ in 0..steps {
                st.step(&dyn_, cfg.dt);
            }
            st.xi
        })
        .collect())
}

/// Samples of `X_t` started at `x0`, for each `(x0, t)` pair, sharing one xi
/// path per sample index. Returns one vector of samples per pair.
pub fn sample_gl_multi(model: &LevyModel, cfg: &PathConfig, points: &[(f64, f64)]) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let dyn_ = Dynamics::new(model)?;
    for &(x0, t) in points {
        if !(x0 > 0.0 && x0.is_finite()) {
            return Err(Error::Config(format!("x0 must be positive, got {x0}")));
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Config(format!("t must be positive, got {t}")));
        }
    }
    // clock targets (e^t - 1) / x0 in increasing order
    let mut order: Vec<usize> = (0..points.len()).collect();
    let targets: Vec<f64> = points.iter().map(|&(x0, t)| t.exp_m1() / x0).collect();
    order.sort_by(|&a, &b| targets[a].total_cmp(&targets[b]));
    let per_path: Vec<Result<Vec<f64>>> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| lamperti_path(&dyn_, cfg, i, points, &targets, &order))
        .collect();
    let mut out = vec![Vec::with_capacity(cfg.n_paths); points.len()];
    for row in per_path {
        for (k, v) in row?.into_iter().enumerate() {
            out[k].push(v);
        }
    }
    Ok(out)
}

fn lamperti_path(
    dyn_: &Dynamics,
    cfg: &PathConfig,
    index: u64,
    points: &[(f64, f64)],
    targets: &[f64],
    order: &[usize],
) -> Result<Vec<f64>> {
    let mut st = PathState::new(cfg.seed, index, dyn_);
    let mut out = vec![0.0; points.len()];
    let mut clock = 0.0;
    let mut e_prev = 1.0;
    let mut next = 0;
    // horizon extended once before giving up
    let limit = 2.0 * cfg.horizon;
    while next < order.len() {
        if st.t >= limit - 0.5 * cfg.dt {
            return Err(Error::Horizon { horizon: limit });
        }
        let xi_prev = st.xi;
        st.step(dyn_, cfg.dt);
        let e_new = st.xi.exp();
        let add = 0.5 * cfg.dt * (e_prev + e_new);
        while next < order.len() && clock + add >= targets[order[next]] {
            let k = order[next];
            let theta = (targets[k] - clock) / add;
            let xi_tau = xi_prev + theta * (st.xi - xi_prev);
            let (x0, t) = points[k];
            out[k] = (-t).exp() * x0 * xi_tau.exp();
            next += 1;
        }
        clock += add;
        e_prev = e_new;
    }
    Ok(out)
}

/// Samples of `X_t` from `X_0 = x0`.
pub fn sample_gl(model: &LevyModel, cfg: &PathConfig, x0: f64, t: f64) -> Result<Vec<f64>> {
    Ok(sample_gl_multi(model, cfg, &[(x0, t)])?.remove(0))
}

/// Estimate of `E[P_n(X_t)]` against `e^{-nt} P_n(x0)`.
pub fn eigen_check(model: &LevyModel, cfg: &PathConfig, x0: f64, t: f64, n: usize) -> Result<EigenCheck> {
    if n > 5 {
        return Err(Error::Config(format!("eigen check limited to n <= 5, got {n}")));
    }
    let samples = sample_gl(model, cfg, x0, t)?;
    eigen_check_from_samples(model, &samples, x0, t, n)
}

/// Same check on precomputed samples of `X_t`.
pub fn eigen_check_from_samples(model: &LevyModel, samples: &[f64], x0: f64, t: f64, n: usize) -> Result<EigenCheck> {
    let ctx = SpectralContext::new(model)?;
    let p = eigen_poly(&ctx, n);
    let values: Vec<f64> = samples.iter().map(|&x| p.eval(x)).collect();
    let estimate = McEstimate::from_samples(&values);
    let target = (-(n as f64) * t).exp() * p.eval(x0);
    Ok(EigenCheck { estimate, target, z: estimate.z_score(target) })
}
