//! Robust tensor CUR: alternating projections between sparse tensors (hard
//! thresholding) and low-multilinear-rank tensors (Fiber CUR), evaluated on
//! the sampled subtensor and fibers only.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cur::{sample_sizes, FiberCur, SampleIndices, SampledBlocks};
use crate::error::{Error, Result};
use crate::source::EntrySource;
use crate::tensor::DenseTensor;

pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_GAMMA: f64 = 0.7;
pub const DEFAULT_MAX_ITERS: usize = 500;
pub const DEFAULT_UPSILON: f64 = 3.0;

/// Whether the sample indices are drawn once or redrawn every iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Fixed indices (RTCUR-F).
    #[serde(rename = "f")]
    Fixed,
    /// Resampled indices (RTCUR-R).
    #[serde(rename = "r")]
    Resample,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Fixed => "f",
            Variant::Resample => "r",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "f" | "fixed" | "rtcur-f" => Ok(Variant::Fixed),
            "r" | "resample" | "rtcur-r" => Ok(Variant::Resample),
            other => Err(Error::Config(format!("unknown variant {other:?}"))),
        }
    }
}

/// How many row indices and fibers to draw per mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Sizes from the sampling constant υ via [`sample_sizes`].
    Constant(f64),
    /// `|Iᵢ|` and `|Jᵢ|` given directly.
    Explicit { rows: Vec<usize>, cols: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub ranks: Vec<usize>,
    /// Stop once the sampled relative error is at most this.
    pub epsilon: f64,
    /// Initial threshold; the observed `‖X‖∞` when absent.
    pub zeta0: Option<f64>,
    /// Threshold decay factor in `(0, 1)`.
    pub gamma: f64,
    pub sampling: Sampling,
    pub variant: Variant,
    pub max_iters: usize,
    pub seed: u64,
    /// Wall-clock budget; an exhausted budget ends the solve unconverged.
    pub time_limit: Option<Duration>,
}

impl SolverConfig {
    pub fn new(ranks: impl Into<Vec<usize>>) -> Self {
        Self {
            ranks: ranks.into(),
            epsilon: DEFAULT_EPSILON,
            zeta0: None,
            gamma: DEFAULT_GAMMA,
            sampling: Sampling::Constant(DEFAULT_UPSILON),
            variant: Variant::Fixed,
            max_iters: DEFAULT_MAX_ITERS,
            seed: 0,
            time_limit: None,
        }
    }

    pub fn upsilon(mut self, upsilon: f64) -> Self {
        self.sampling = Sampling::Constant(upsilon);
        self
    }

    pub fn epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn zeta0(mut self, zeta0: f64) -> Self {
        self.zeta0 = Some(zeta0);
        self
    }

    pub fn gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn time_limit(mut self, limit: Duration) -> Self {
        self.time_limit = Some(limit);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!(
                "gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if let Some(z) = self.zeta0 {
            if !(z >= 0.0 && z.is_finite()) {
                return Err(Error::Config(format!(
                    "zeta0 must be finite and nonnegative, got {z}"
                )));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if let Sampling::Constant(u) = self.sampling {
            if !(u > 0.0 && u.is_finite()) {
                return Err(Error::Config(format!(
                    "sampling constant must be positive, got {u}"
                )));
            }
        }
        Ok(())
    }

    fn draw_samples(
        &self,
        shape: &crate::tensor::Shape,
        rng: &mut ChaCha8Rng,
    ) -> Result<SampleIndices> {
        match &self.sampling {
            Sampling::Constant(u) => SampleIndices::sample(shape, &self.ranks, *u, rng),
            Sampling::Explicit { rows, cols } => {
                // Validate ranks the same way the formula path does.
                sample_sizes(shape, &self.ranks, 1.0)?;
                for (m, (&r, (&i, &j))) in self
                    .ranks
                    .iter()
                    .zip(rows.iter().zip(cols))
                    .enumerate()
                {
                    if i < r || j < r {
                        return Err(Error::Config(format!(
                            "mode {m}: sample sizes ({i}, {j}) are below rank {r}"
                        )));
                    }
                }
                SampleIndices::sample_with_sizes(shape, rows, cols, rng)
            }
        }
    }
}

/// `HT_ζ`: keeps entries with `|x| > ζ`, zeroes the rest.
#[inline]
pub fn hard_threshold_value(x: f64, zeta: f64) -> f64 {
    if x.abs() > zeta {
        x
    } else {
        0.0
    }
}

pub fn hard_threshold(values: &[f64], zeta: f64) -> Vec<f64> {
    values
        .iter()
        .map(|&x| hard_threshold_value(x, zeta))
        .collect()
}

/// `γᵏ ζ⁰`.
pub fn zeta_schedule(zeta0: f64, gamma: f64, k: usize) -> f64 {
    let k = i32::try_from(k).unwrap_or(i32::MAX);
    gamma.powi(k) * zeta0
}

/// `(‖E(I)‖_F + Σᵢ ‖E_(i)(:, Jᵢ)‖_F) / (‖X(I)‖_F + Σᵢ ‖X_(i)(:, Jᵢ)‖_F)`, with
/// `0/0 = 0` and `x/0 = ∞`.
pub fn sampled_relative_error(residual: &SampledBlocks, observed: &SampledBlocks) -> f64 {
    ratio(residual.norm_sum(), observed.norm_sum())
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    TimeLimit,
    /// The sampled iterates stopped being finite.
    Diverged,
}

/// What one iteration produced, reported to observers.
#[derive(Debug)]
pub struct IterationRecord<'a> {
    /// One-based iteration number.
    pub iteration: usize,
    pub zeta: f64,
    pub samples: &'a SampleIndices,
    /// `S⁽ᵏ⁾` on the sampled blocks.
    pub sparse: &'a SampledBlocks,
    /// `L⁽ᵏ⁾` on the sampled blocks.
    pub low_rank: &'a SampledBlocks,
    pub cur: &'a FiberCur,
    pub error: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Timings {
    pub total: Duration,
    pub per_iteration: Vec<Duration>,
}

impl Timings {
    pub fn mean_iteration(&self) -> Duration {
        if self.per_iteration.is_empty() {
            Duration::ZERO
        } else {
            self.total_iterations() / self.per_iteration.len() as u32
        }
    }

    pub fn total_iterations(&self) -> Duration {
        self.per_iteration.iter().sum()
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Fiber CUR estimate of the low-rank component.
    pub cur: FiberCur,
    /// Sparse estimate on the final samples.
    pub sparse: SampledBlocks,
    pub error_history: Vec<f64>,
    pub zeta_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub stop: StopReason,
    /// Per-iteration, per-mode rank-deficiency flags of the intersections.
    pub diagnostics: Vec<Vec<bool>>,
    pub zeta0: f64,
    /// Number of index redraws after the initial draw.
    pub resamples: usize,
    pub timings: Timings,
}

impl SolveResult {
    pub fn final_error(&self) -> f64 {
        self.error_history.last().copied().unwrap_or(f64::NAN)
    }

    pub fn any_rank_deficient(&self) -> bool {
        self.diagnostics.iter().flatten().any(|&f| f)
    }

    /// The low-rank estimate over the full index range.
    pub fn low_rank_full(&self) -> Result<DenseTensor> {
        self.cur.reconstruct_full()
    }

    /// `HT_ζ(X − L)` over the full tensor, at the last threshold used.
    pub fn sparse_full(&self, observed: &DenseTensor) -> Result<DenseTensor> {
        let zeta = self.zeta_history.last().copied().unwrap_or(self.zeta0);
        let low = self.low_rank_full()?;
        Ok(observed.sub(&low)?.map(|v| hard_threshold_value(v, zeta)))
    }
}

/// Runs RTCUR on `observed`.
pub fn rtcur<S: EntrySource + ?Sized>(observed: &S, cfg: &SolverConfig) -> Result<SolveResult> {
    rtcur_observed(observed, cfg, |_| {})
}

/// Runs RTCUR, reporting every iteration to `observer`.
pub fn rtcur_observed<S, F>(observed: &S, cfg: &SolverConfig, mut observer: F) -> Result<SolveResult>
where
    S: EntrySource + ?Sized,
    F: FnMut(&IterationRecord<'_>),
{
    cfg.validate()?;
    let start = Instant::now();
    let shape = observed.shape().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut samples = cfg.draw_samples(&shape, &mut rng)?;
    let mut x_blocks = SampledBlocks::gather(observed, &samples)?;
    let mut x_norm = x_blocks.norm_sum();
    let zeta0 = cfg.zeta0.unwrap_or_else(|| max_abs(observed));

    let mut low = SampledBlocks::zeros_like(&samples, &shape);
    let mut cur: Option<FiberCur> = None;
    let mut sparse = low.clone();

    let mut error_history = Vec::new();
    let mut zeta_history = Vec::new();
    let mut diagnostics = Vec::new();
    let mut per_iteration = Vec::new();
    let mut stop = StopReason::MaxIterations;
    let mut resamples = 0;

    for k in 1..=cfg.max_iters {
        let iter_start = Instant::now();
        if k > 1 && cfg.variant == Variant::Resample {
            samples = cfg.draw_samples(&shape, &mut rng)?;
            resamples += 1;
            x_blocks = SampledBlocks::gather(observed, &samples)?;
            x_norm = x_blocks.norm_sum();
            low = cur
                .as_ref()
                .expect("an estimate exists after the first iteration")
                .eval_blocks(&samples)?;
        }

        // Sparse update on the sampled blocks only.
        let zeta = zeta_schedule(zeta0, cfg.gamma, k);
        sparse = x_blocks.sub(&low)?.map(|v| hard_threshold_value(v, zeta));

        // Low-rank update from the cleaned samples.
        let cleaned = x_blocks.sub(&sparse)?;
        if !cleaned.is_finite() {
            stop = StopReason::Diverged;
            break;
        }
        let next = FiberCur::from_blocks(&shape, samples.clone(), cleaned, &cfg.ranks)?;
        low = next.eval_blocks(&samples)?;

        let residual = x_blocks.sub(&low)?.sub(&sparse)?;
        let error = ratio(residual.norm_sum(), x_norm);

        error_history.push(error);
        zeta_history.push(zeta);
        diagnostics.push(next.rank_deficient());
        per_iteration.push(iter_start.elapsed());
        observer(&IterationRecord {
            iteration: k,
            zeta,
            samples: &samples,
            sparse: &sparse,
            low_rank: &low,
            cur: &next,
            error,
        });
        cur = Some(next);

        if error <= cfg.epsilon {
            stop = StopReason::Converged;
            break;
        }
        if !error.is_finite() {
            stop = StopReason::Diverged;
            break;
        }
        if cfg.time_limit.is_some_and(|limit| start.elapsed() >= limit) {
            stop = StopReason::TimeLimit;
            break;
        }
    }

    let cur = match cur {
        Some(c) => c,
        // Diverged before the first estimate: report the zero decomposition.
        None => FiberCur::from_blocks(
            &shape,
            samples.clone(),
            SampledBlocks::zeros_like(&samples, &shape),
            &cfg.ranks,
        )?,
    };

    Ok(SolveResult {
        cur,
        sparse,
        iterations: error_history.len(),
        converged: stop == StopReason::Converged,
        stop,
        error_history,
        zeta_history,
        diagnostics,
        zeta0,
        resamples,
        timings: Timings {
            total: start.elapsed(),
            per_iteration,
        },
    })
}

/// `‖X‖∞`, read entry by entry for sources other than dense tensors.
pub fn max_abs<S: EntrySource + ?Sized>(source: &S) -> f64 {
    let shape = source.shape();
    let n = shape.order();
    let mut idx = vec![0usize; n];
    let mut best = 0.0f64;
    for _ in 0..shape.len() {
        best = best.max(source.entry(&idx).abs());
        for m in 0..n {
            idx[m] += 1;
            if idx[m] < shape.dim(m) {
                break;
            }
            idx[m] = 0;
        }
    }
    best
}

/// Outcome of [`support_projection_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SupportCheck {
    /// `supp(S_next) ⊆ supp(S⋆)`.
    pub support_contained: bool,
    /// `‖S⋆ − S_next‖∞ ≤ 2 ‖L⋆ − L‖∞`.
    pub error_bounded: bool,
}

/// Thresholds `X − L` with `X = L⋆ + S⋆` at `ζ = ‖L⋆ − L‖∞` and checks the
/// support and error guarantees of the resulting sparse estimate.
pub fn support_projection_check(
    low_rank_true: &DenseTensor,
    low_rank: &DenseTensor,
    sparse_true: &DenseTensor,
) -> Result<SupportCheck> {
    let observed = low_rank_true.add(sparse_true)?;
    let zeta = low_rank_true.sub(low_rank)?.inf_norm();
    let next = observed
        .sub(low_rank)?
        .map(|v| hard_threshold_value(v, zeta));
    let support_contained = next
        .data()
        .iter()
        .zip(sparse_true.data())
        .all(|(&s, &t)| s == 0.0 || t != 0.0);
    // Allow for the rounding of X = L⋆ + S⋆ and X − L.
    let slack = 4.0 * f64::EPSILON * (observed.inf_norm() + low_rank.inf_norm());
    let error_bounded = sparse_true.sub(&next)?.inf_norm() <= 2.0 * zeta + slack;
    Ok(SupportCheck {
        support_contained,
        error_bounded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::tensor::Shape;
    use rand::Rng;

    fn low_rank(d: usize, r: usize, seed: u64) -> DenseTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let core = DenseTensor::from_fn(Shape::new([r, r, r]).unwrap(), |_| {
            rng.random::<f64>() - 0.5
        });
        let factors: Vec<Matrix> = (0..3)
            .map(|_| Matrix::from_fn(d, r, |_, _| rng.random::<f64>() - 0.5))
            .collect();
        core.multi_mode_product(&factors).unwrap()
    }

    #[test]
    fn hard_threshold_examples() {
        assert_eq!(hard_threshold(&[1.0, -3.0, 2.0, 0.0], 2.0), vec![0.0, -3.0, 0.0, 0.0]);
        assert_eq!(hard_threshold(&[1.0, -1e-300, 0.0], 0.0), vec![1.0, -1e-300, 0.0]);
        assert_eq!(hard_threshold(&[1.0, -3.0], 3.0), vec![0.0, 0.0]);
        let once = hard_threshold(&[0.5, -4.0, 2.5], 1.0);
        assert_eq!(hard_threshold(&once, 1.0), once);
    }

    #[test]
    fn zeta_examples() {
        assert!((zeta_schedule(255.0, 0.7, 1) - 178.5).abs() < 1e-12);
        assert_eq!(zeta_schedule(3.0, 0.7, 0), 3.0);
        assert!((zeta_schedule(1.0, 0.7, 10) - 0.0282475249).abs() < 1e-12);
    }

    #[test]
    fn relative_error_edge_cases() {
        let shape = Shape::new([4, 4, 4]).unwrap();
        let t = DenseTensor::from_fn(shape.clone(), |i| (i[0] + 2 * i[1] + 3 * i[2]) as f64);
        let s = SampleIndices::full(&shape);
        let x = SampledBlocks::gather(&t, &s).unwrap();
        let zero = SampledBlocks::zeros_like(&s, &shape);
        assert_eq!(sampled_relative_error(&zero, &x), 0.0);
        assert_eq!(sampled_relative_error(&x, &x), 1.0);
        assert_eq!(sampled_relative_error(&zero, &zero), 0.0);
        assert_eq!(sampled_relative_error(&x, &zero), f64::INFINITY);
    }

    #[test]
    fn config_validation() {
        let base = SolverConfig::new(vec![2, 2, 2]);
        assert!(base.validate().is_ok());
        assert!(base.clone().gamma(1.0).validate().is_err());
        assert!(base.clone().gamma(0.0).validate().is_err());
        assert!(base.clone().epsilon(0.0).validate().is_err());
        assert!(base.clone().zeta0(-1.0).validate().is_err());
        assert!(base.clone().max_iters(0).validate().is_err());
        assert!(base.upsilon(-2.0).validate().is_err());
    }

    #[test]
    fn infeasible_ranks_are_rejected() {
        let t = low_rank(6, 2, 1);
        let cfg = SolverConfig::new(vec![2, 7, 2]);
        assert!(matches!(rtcur(&t, &cfg), Err(Error::Rank(_))));
    }

    #[test]
    fn clean_low_rank_converges_quickly() {
        let t = low_rank(20, 2, 3);
        let cfg = SolverConfig::new(vec![2, 2, 2]).upsilon(4.0).epsilon(1e-8).seed(5);
        let res = rtcur(&t, &cfg).unwrap();
        assert!(res.converged, "{:?}", res.error_history);
        assert!(res.iterations <= 3);
        assert!(res.final_error() <= 1e-8);
        let l = res.low_rank_full().unwrap();
        assert!(l.relative_error(&t).unwrap() < 1e-8);
    }

    #[test]
    fn zero_input_converges_immediately() {
        let t = DenseTensor::zeros(Shape::new([8, 8, 8]).unwrap());
        let res = rtcur(&t, &SolverConfig::new(vec![2, 2, 2])).unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 1);
        assert_eq!(res.error_history, vec![0.0]);
        assert_eq!(res.low_rank_full().unwrap().inf_norm(), 0.0);
        assert_eq!(res.sparse.norm_sum(), 0.0);
    }

    #[test]
    fn non_convergence_is_reported() {
        let t = low_rank(12, 2, 4);
        let cfg = SolverConfig::new(vec![2, 2, 2])
            .upsilon(3.0)
            .epsilon(1e-300)
            .max_iters(4);
        let res = rtcur(&t, &cfg).unwrap();
        assert!(!res.converged);
        assert_eq!(res.stop, StopReason::MaxIterations);
        assert_eq!(res.iterations, 4);
        assert_eq!(res.error_history.len(), 4);
    }

    #[test]
    fn zeta_sequence_strictly_decreases() {
        let t = low_rank(12, 2, 9);
        let cfg = SolverConfig::new(vec![2, 2, 2]).epsilon(1e-300).max_iters(6).zeta0(2.0);
        let res = rtcur(&t, &cfg).unwrap();
        assert!(res.zeta_history.windows(2).all(|w| w[1] < w[0]));
        assert!((res.zeta_history[0] - 1.4).abs() < 1e-15);
        assert!(res.error_history.iter().all(|e| e.is_finite() && *e >= 0.0));
    }

    #[test]
    fn explicit_sampling_sizes() {
        let t = low_rank(15, 2, 6);
        let mut cfg = SolverConfig::new(vec![2, 2, 2]).epsilon(1e-9);
        cfg.sampling = Sampling::Explicit {
            rows: vec![8, 8, 8],
            cols: vec![16, 16, 16],
        };
        let res = rtcur(&t, &cfg).unwrap();
        assert_eq!(res.cur.samples().row_sizes(), vec![8, 8, 8]);
        assert_eq!(res.cur.samples().col_sizes(), vec![16, 16, 16]);
        assert!(res.converged);

        cfg.sampling = Sampling::Explicit {
            rows: vec![1, 8, 8],
            cols: vec![16, 16, 16],
        };
        assert!(rtcur(&t, &cfg).is_err());
    }

    #[test]
    fn resampling_changes_indices_each_iteration() {
        let t = low_rank(15, 2, 7);
        let cfg = SolverConfig::new(vec![2, 2, 2])
            .variant(Variant::Resample)
            .epsilon(1e-300)
            .max_iters(3);
        let mut seen = Vec::new();
        rtcur_observed(&t, &cfg, |rec| seen.push(rec.samples.clone())).unwrap();
        assert_eq!(seen.len(), 3);
        assert_ne!(seen[0], seen[1]);
        assert_ne!(seen[1], seen[2]);

        let fixed = SolverConfig { variant: Variant::Fixed, ..cfg };
        let mut first = None;
        rtcur_observed(&t, &fixed, |rec| {
            if rec.iteration == 1 {
                first = Some(rec.samples.clone());
            }
            assert_eq!(Some(rec.samples), first.as_ref());
        })
        .unwrap();
        assert_eq!(first.as_ref(), Some(&seen[0]));
    }

    #[test]
    fn support_check_exact_estimate() {
        let l = low_rank(6, 2, 11);
        let mut s = DenseTensor::zeros(l.shape().clone());
        s.set(&[1, 2, 3], 4.0).unwrap();
        s.set(&[0, 0, 0], -0.5).unwrap();
        let check = support_projection_check(&l, &l, &s).unwrap();
        assert!(check.support_contained && check.error_bounded);
    }
}
