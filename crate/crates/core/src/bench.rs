//! Experiment harnesses: the empirical phase transition over corruption rate
//! and sampling constant, and runtime against dimension.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cur::FiberCur;
use crate::error::{Error, Result};
use crate::io::plain_f64;
use crate::linalg::Matrix;
use crate::reference::{ap_hosvd_trpca, ApConfig};
use crate::solver::{rtcur, SolverConfig, Variant};
use crate::synth::{Instance, InstanceSpec, LowRankFactors};
use crate::tensor::DenseTensor;

/// A solve counts as a success when `‖L⋆ − L̂‖_F / ‖L⋆‖_F` is at most this.
pub const SUCCESS_TOLERANCE: f64 = 1e-3;

/// Mixes a base seed with coordinates (SplitMix64 finalizer).
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut z = base;
    for &p in parts {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(p);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

/// `⟨A, B⟩` for two Tucker-form tensors of the same shape.
fn tucker_inner(core_a: &DenseTensor, fa: &[Matrix], core_b: &DenseTensor, fb: &[Matrix]) -> Result<f64> {
    // ⟨Ga ×ᵢ Aᵢ, Gb ×ᵢ Bᵢ⟩ = ⟨Ga, Gb ×ᵢ (Aᵢᵀ Bᵢ)⟩
    let cross = fa
        .iter()
        .zip(fb)
        .map(|(a, b)| a.t_matmul(b))
        .collect::<Result<Vec<_>>>()?;
    let projected = core_b.multi_mode_product(&cross)?;
    Ok(core_a
        .data()
        .iter()
        .zip(projected.data())
        .map(|(x, y)| x * y)
        .sum())
}

/// `‖L⋆ − L̂‖_F / ‖L⋆‖_F` computed from the factored forms, without forming
/// either tensor.
pub fn relative_recovery_error(truth: &LowRankFactors, estimate: &FiberCur) -> Result<f64> {
    let (core_e, fe) = estimate.compact();
    let tt = tucker_inner(&truth.core, &truth.factors, &truth.core, &truth.factors)?;
    let ee = tucker_inner(core_e, fe, core_e, fe)?;
    let te = tucker_inner(&truth.core, &truth.factors, core_e, fe)?;
    let diff2 = (tt + ee - 2.0 * te).max(0.0);
    Ok(if tt == 0.0 {
        if diff2 == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (diff2 / tt).sqrt()
    })
}

#[derive(Debug, Clone)]
pub struct PhaseConfig {
    pub order: usize,
    pub dim: usize,
    pub rank: usize,
    pub alphas: Vec<f64>,
    pub upsilons: Vec<f64>,
    pub trials: usize,
    pub variant: Variant,
    pub gamma: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl PhaseConfig {
    /// `n = 3`, `d = 60`, α ∈ {0.05, …, 0.6}, υ ∈ {1, …, 6}, ten trials.
    pub fn new(rank: usize) -> Self {
        Self {
            order: 3,
            dim: 60,
            rank,
            alphas: (1..=12).map(|i| f64::from(i) * 0.05).collect(),
            upsilons: (1..=6).map(f64::from).collect(),
            trials: 10,
            variant: Variant::Fixed,
            gamma: 0.7,
            epsilon: 1e-5,
            max_iters: 500,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.upsilons.is_empty() || self.trials == 0 {
            return Err(Error::Config("phase grid needs alphas, upsilons and trials".into()));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(0.0..1.0).contains(*a)) {
            return Err(Error::Config(format!("alpha {a} outside [0, 1)")));
        }
        if let Some(u) = self.upsilons.iter().find(|u| !(**u > 0.0)) {
            return Err(Error::Config(format!("upsilon {u} must be positive")));
        }
        InstanceSpec::new(self.order, self.dim, self.rank, 0.0, 0).validate()
    }
}

/// Success counts indexed `[alpha][upsilon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    pub alphas: Vec<f64>,
    pub upsilons: Vec<f64>,
    pub trials: usize,
    pub successes: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    #[serde(serialize_with = "plain_f64")]
    pub alpha: f64,
    #[serde(serialize_with = "plain_f64")]
    pub upsilon: f64,
    pub successes: usize,
    pub trials: usize,
}

impl PhaseGrid {
    pub fn rows(&self) -> Vec<PhaseRow> {
        let mut out = Vec::new();
        for (ai, &alpha) in self.alphas.iter().enumerate() {
            for (ui, &upsilon) in self.upsilons.iter().enumerate() {
                out.push(PhaseRow {
                    alpha,
                    upsilon,
                    successes: self.successes[ai][ui],
                    trials: self.trials,
                });
            }
        }
        out
    }

    /// Count of adjacent cells where success goes up with α, per υ column.
    pub fn alpha_inversions(&self) -> Vec<usize> {
        (0..self.upsilons.len())
            .map(|u| {
                self.successes
                    .windows(2)
                    .filter(|w| w[1][u] > w[0][u])
                    .count()
            })
            .collect()
    }

    /// Count of adjacent cells where success goes down with υ, per α row.
    pub fn upsilon_inversions(&self) -> Vec<usize> {
        self.successes
            .iter()
            .map(|row| row.windows(2).filter(|w| w[1] < w[0]).count())
            .collect()
    }
}

impl fmt::Display for PhaseGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "alpha\\ups")?;
        for u in &self.upsilons {
            write!(f, "{u:>5}")?;
        }
        writeln!(f)?;
        for (a, row) in self.alphas.iter().zip(&self.successes) {
            write!(f, "{a:>9.2}")?;
            for s in row {
                write!(f, "{s:>5}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Outcome of one synthetic solve.
#[derive(Debug, Clone, Copy)]
pub struct TrialOutcome {
    pub recovery_error: f64,
    pub iterations: usize,
    pub converged: bool,
    pub success: bool,
}

/// Generates the instance for `spec` and solves it with ζ⁰ = ‖L⋆‖∞.
pub fn run_trial(spec: &InstanceSpec, cfg: &SolverConfig) -> Result<TrialOutcome> {
    let inst = Instance::generate(spec)?;
    let zeta0 = inst.low_rank.inf_norm()?;
    let cfg = SolverConfig {
        zeta0: Some(zeta0),
        ..cfg.clone()
    };
    let res = rtcur(&inst, &cfg)?;
    let recovery_error = relative_recovery_error(&inst.low_rank, &res.cur)?;
    Ok(TrialOutcome {
        recovery_error,
        iterations: res.iterations,
        converged: res.converged,
        success: recovery_error.is_finite() && recovery_error <= SUCCESS_TOLERANCE,
    })
}

/// Runs every `(α, υ)` cell for `trials` seeded instances in parallel. The
/// instance for trial `t` at corruption `α` is shared by all υ of that row.
pub fn run_phase_transition(cfg: &PhaseConfig) -> Result<PhaseGrid> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize, usize)> = (0..cfg.alphas.len())
        .flat_map(|a| {
            (0..cfg.upsilons.len()).flat_map(move |u| (0..cfg.trials).map(move |t| (a, u, t)))
        })
        .collect();
    let outcomes: Vec<(usize, usize, bool)> = jobs
        .par_iter()
        .map(|&(a, u, t)| {
            let spec = InstanceSpec::new(
                cfg.order,
                cfg.dim,
                cfg.rank,
                cfg.alphas[a],
                derive_seed(cfg.seed, &[a as u64, t as u64]),
            );
            let solver = SolverConfig::new(spec.ranks())
                .upsilon(cfg.upsilons[u])
                .gamma(cfg.gamma)
                .epsilon(cfg.epsilon)
                .max_iters(cfg.max_iters)
                .variant(cfg.variant)
                .seed(derive_seed(cfg.seed, &[a as u64, u as u64, t as u64, 1]));
            // A failed solve is a failed trial, never an aborted sweep.
            let ok = run_trial(&spec, &solver).map(|o| o.success).unwrap_or(false);
            (a, u, ok)
        })
        .collect();
    let mut successes = vec![vec![0usize; cfg.upsilons.len()]; cfg.alphas.len()];
    for (a, u, ok) in outcomes {
        if ok {
            successes[a][u] += 1;
        }
    }
    Ok(PhaseGrid {
        alphas: cfg.alphas.clone(),
        upsilons: cfg.upsilons.clone(),
        trials: cfg.trials,
        successes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "rtcur-f")]
    RtcurF,
    #[serde(rename = "rtcur-r")]
    RtcurR,
    #[serde(rename = "hosvd-ap")]
    HosvdAp,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::RtcurF, Method::RtcurR, Method::HosvdAp];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::RtcurF => "rtcur-f",
            Method::RtcurR => "rtcur-r",
            Method::HosvdAp => "hosvd-ap",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone)]
pub struct TimingConfig {
    pub dims: Vec<usize>,
    pub methods: Vec<Method>,
    pub order: usize,
    pub rank: usize,
    pub alpha: f64,
    pub upsilon: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    pub repeats: usize,
    /// Per-solve budget; exceeding it marks the cell censored.
    pub timeout: Option<Duration>,
    pub seed: u64,
}

impl TimingConfig {
    pub fn new(dims: Vec<usize>, methods: Vec<Method>) -> Self {
        Self {
            dims,
            methods,
            order: 3,
            rank: 3,
            alpha: 0.1,
            upsilon: 3.0,
            gamma: 0.7,
            epsilon: 1e-5,
            max_iters: 500,
            repeats: 10,
            timeout: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub d: usize,
    pub method: Method,
    #[serde(serialize_with = "plain_f64")]
    pub mean_s: f64,
    #[serde(serialize_with = "plain_f64")]
    pub std_s: f64,
    #[serde(serialize_with = "plain_f64")]
    pub iters: f64,
    pub censored: bool,
}

/// One timed solve: wall seconds, iteration count, whether the budget ran out.
pub fn time_method(inst: &Instance, method: Method, cfg: &TimingConfig, seed: u64) -> Result<(f64, usize, bool)> {
    let zeta0 = inst.low_rank.inf_norm()?;
    let ranks = inst.spec.ranks();
    match method {
        Method::RtcurF | Method::RtcurR => {
            let variant = if method == Method::RtcurF {
                Variant::Fixed
            } else {
                Variant::Resample
            };
            let mut solver = SolverConfig::new(ranks)
                .upsilon(cfg.upsilon)
                .gamma(cfg.gamma)
                .epsilon(cfg.epsilon)
                .zeta0(zeta0)
                .max_iters(cfg.max_iters)
                .variant(variant)
                .seed(seed);
            solver.time_limit = cfg.timeout;
            let start = Instant::now();
            let res = rtcur(inst, &solver)?;
            Ok((
                start.elapsed().as_secs_f64(),
                res.iterations,
                res.stop == crate::solver::StopReason::TimeLimit,
            ))
        }
        Method::HosvdAp => {
            let x = inst.observed_dense()?;
            let ap = ApConfig {
                ranks,
                zeta0,
                gamma: cfg.gamma,
                epsilon: cfg.epsilon,
                max_iters: cfg.max_iters,
                time_limit: cfg.timeout,
            };
            let start = Instant::now();
            let res = ap_hosvd_trpca(&x, &ap)?;
            Ok((
                start.elapsed().as_secs_f64(),
                res.iterations,
                res.stop == crate::solver::StopReason::TimeLimit,
            ))
        }
    }
}

/// Times every `(d, method)` pair over `repeats` instances, sequentially.
pub fn run_timing(cfg: &TimingConfig) -> Result<Vec<TimingRow>> {
    if cfg.dims.is_empty() || cfg.methods.is_empty() || cfg.repeats == 0 {
        return Err(Error::Config("timing needs dims, methods and repeats".into()));
    }
    let mut rows = Vec::new();
    for (di, &d) in cfg.dims.iter().enumerate() {
        let mut per_method = vec![(Vec::new(), Vec::new(), false); cfg.methods.len()];
        for rep in 0..cfg.repeats {
            let spec = InstanceSpec::new(
                cfg.order,
                d,
                cfg.rank,
                cfg.alpha,
                derive_seed(cfg.seed, &[di as u64, rep as u64]),
            );
            let inst = Instance::generate(&spec)?;
            for (mi, &method) in cfg.methods.iter().enumerate() {
                let (secs, iters, censored) =
                    time_method(&inst, method, cfg, derive_seed(cfg.seed, &[di as u64, rep as u64, 7]))?;
                let slot = &mut per_method[mi];
                slot.0.push(secs);
                slot.1.push(iters as f64);
                slot.2 |= censored;
            }
        }
        for (&method, (secs, iters, censored)) in cfg.methods.iter().zip(per_method) {
            let (mean_s, std_s) = mean_std(&secs);
            let (iters, _) = mean_std(&iters);
            rows.push(TimingRow {
                d,
                method,
                mean_s,
                std_s,
                iters,
                censored,
            });
        }
    }
    Ok(rows)
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
