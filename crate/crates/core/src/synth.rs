//! Synthetic robust tensor PCA instances: a Gaussian Tucker-form low-rank
//! tensor plus uniformly placed, uniformly valued sparse outliers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::source::EntrySource;
use crate::tensor::{DenseTensor, Shape};

/// RNG stream used for outlier placement and values; the low-rank part uses
/// stream 0 of the same seed.
const OUTLIER_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceSpec {
    /// Number of modes `n`.
    pub order: usize,
    /// Extent `d` of every mode.
    pub dim: usize,
    /// Multilinear rank `r` of every mode.
    pub rank: usize,
    /// Fraction of corrupted entries, in `[0, 1)`.
    pub alpha: f64,
    pub seed: u64,
}

impl InstanceSpec {
    pub fn new(order: usize, dim: usize, rank: usize, alpha: f64, seed: u64) -> Self {
        Self {
            order,
            dim,
            rank,
            alpha,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.order == 0 || self.dim == 0 {
            return Err(Error::Config("order and dimension must be positive".into()));
        }
        if self.rank == 0 || self.rank > self.dim {
            return Err(Error::Rank(format!(
                "rank {} is infeasible for dimension {}",
                self.rank, self.dim
            )));
        }
        check_alpha(self.alpha)
    }

    pub fn shape(&self) -> Result<Shape> {
        Shape::new(vec![self.dim; self.order])
    }

    pub fn ranks(&self) -> Vec<usize> {
        vec![self.rank; self.order]
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "corruption fraction must lie in [0, 1), got {alpha}"
        )))
    }
}

/// `𝒴 ×₀ Y₀ ⋯ ×_{n-1} Y_{n-1}` kept in factored form.
#[derive(Debug, Clone)]
pub struct LowRankFactors {
    pub core: DenseTensor,
    pub factors: Vec<Matrix>,
    shape: Shape,
}

impl LowRankFactors {
    /// Standard normal core and factors, drawn in that order.
    pub fn sample(spec: &InstanceSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let core = DenseTensor::from_fn(Shape::new(spec.ranks())?, |_| {
            rng.sample::<f64, _>(StandardNormal)
        });
        let factors = (0..spec.order)
            .map(|_| Matrix::from_fn(spec.dim, spec.rank, |_, _| rng.sample(StandardNormal)))
            .collect();
        Ok(Self {
            core,
            factors,
            shape: spec.shape()?,
        })
    }

    pub fn to_dense(&self) -> Result<DenseTensor> {
        self.core.multi_mode_product(&self.factors)
    }

    /// Calls `f` with consecutive slabs of the dense tensor along the last
    /// mode, in layout order, without holding more than one slab.
    fn for_each_slab(&self, mut f: impl FnMut(&[f64])) -> Result<()> {
        let n = self.factors.len();
        let mut partial = self.core.clone();
        for (m, a) in self.factors.iter().enumerate().take(n - 1) {
            partial = partial.mode_product(a, m)?;
        }
        let last = &self.factors[n - 1];
        for i in 0..last.rows() {
            let row = Matrix::from_fn(1, last.cols(), |_, j| last[(i, j)]);
            let slab = partial.mode_product(&row, n - 1)?;
            f(slab.data());
        }
        Ok(())
    }

    /// Mean of `|L|` over every entry.
    pub fn mean_abs(&self) -> Result<f64> {
        let mut sum = 0.0;
        self.for_each_slab(|s| sum += s.iter().map(|v| v.abs()).sum::<f64>())?;
        Ok(sum / self.shape.len() as f64)
    }

    pub fn inf_norm(&self) -> Result<f64> {
        let mut best = 0.0f64;
        self.for_each_slab(|s| best = s.iter().fold(best, |b, v| b.max(v.abs())))?;
        Ok(best)
    }

    pub fn fro_norm(&self) -> Result<f64> {
        let mut sum = 0.0;
        self.for_each_slab(|s| sum += s.iter().map(|v| v * v).sum::<f64>())?;
        Ok(sum.sqrt())
    }
}

impl EntrySource for LowRankFactors {
    fn shape(&self) -> &Shape {
        &self.shape
    }

    fn entry(&self, idx: &[usize]) -> f64 {
        tucker_entry(&self.core, &self.factors, idx)
    }
}

/// Entry of `core ×ₘ factorsₘ` at `idx`, by direct contraction.
pub(crate) fn tucker_entry(core: &DenseTensor, factors: &[Matrix], idx: &[usize]) -> f64 {
    let dims = core.dims();
    let n = dims.len();
    let mut counter = vec![0usize; n];
    let mut sum = 0.0;
    for &c in core.data() {
        let mut w = c;
        for m in 0..n {
            w *= factors[m][(idx[m], counter[m])];
        }
        sum += w;
        for m in 0..n {
            counter[m] += 1;
            if counter[m] < dims[m] {
                break;
            }
            counter[m] = 0;
        }
    }
    sum
}

/// Outliers stored as sorted `(offset, value)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOutliers {
    shape: Shape,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl SparseOutliers {
    /// Places `⌊α ∏dᵢ⌋` outliers uniformly without replacement, with values
    /// uniform on `[−μ, μ]`.
    pub fn sample(shape: &Shape, alpha: f64, magnitude: f64, seed: u64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(magnitude >= 0.0 && magnitude.is_finite()) {
            return Err(Error::Config(format!(
                "outlier magnitude must be finite and nonnegative, got {magnitude}"
            )));
        }
        let total = shape.len();
        let count = ((alpha * total as f64).floor() as usize).min(total);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(OUTLIER_STREAM);

        // Selection sampling: visits offsets in order, keeping each with
        // probability (still needed) / (still available).
        let mut offsets = Vec::with_capacity(count);
        let mut needed = count;
        for off in 0..total {
            if needed == 0 {
                break;
            }
            let available = total - off;
            if rng.random_range(0..available) < needed {
                offsets.push(off);
                needed -= 1;
            }
        }
        let values = offsets
            .iter()
            .map(|_| {
                if magnitude == 0.0 {
                    0.0
                } else {
                    rng.random_range(-magnitude..=magnitude)
                }
            })
            .collect();
        Ok(Self {
            shape: shape.clone(),
            offsets,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_at_offset(&self, offset: usize) -> f64 {
        match self.offsets.binary_search(&offset) {
            Ok(i) => self.values[i],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> DenseTensor {
        let mut t = DenseTensor::zeros(self.shape.clone());
        for (&o, &v) in self.offsets.iter().zip(&self.values) {
            t.data_mut()[o] = v;
        }
        t
    }
}

/// Observed tensor `X = L⋆ + S⋆`, evaluated entry by entry.
#[derive(Debug, Clone)]
pub struct Instance {
    pub spec: InstanceSpec,
    pub low_rank: LowRankFactors,
    pub outliers: SparseOutliers,
}

impl Instance {
    /// Draws the low-rank part, then outliers scaled by the mean `|L⋆|`.
    pub fn generate(spec: &InstanceSpec) -> Result<Self> {
        let low_rank = LowRankFactors::sample(spec)?;
        let mu = if spec.alpha > 0.0 {
            low_rank.mean_abs()?
        } else {
            0.0
        };
        let outliers = SparseOutliers::sample(&spec.shape()?, spec.alpha, mu, spec.seed)?;
        Ok(Self {
            spec: *spec,
            low_rank,
            outliers,
        })
    }

    pub fn low_rank_dense(&self) -> Result<DenseTensor> {
        self.low_rank.to_dense()
    }

    pub fn sparse_dense(&self) -> DenseTensor {
        self.outliers.to_dense()
    }

    pub fn observed_dense(&self) -> Result<DenseTensor> {
        let mut x = self.low_rank.to_dense()?;
        for (&o, &v) in self.outliers.offsets.iter().zip(&self.outliers.values) {
            x.data_mut()[o] += v;
        }
        Ok(x)
    }
}

impl EntrySource for Instance {
    fn shape(&self) -> &Shape {
        &self.low_rank.shape
    }

    fn entry(&self, idx: &[usize]) -> f64 {
        let off: usize = idx
            .iter()
            .zip(self.low_rank.shape.strides())
            .map(|(i, s)| i * s)
            .sum();
        self.low_rank.entry(idx) + self.outliers.value_at_offset(off)
    }
}

/// Dense Gaussian Tucker tensor of multilinear rank `(r, …, r)`.
pub fn gen_lowrank(spec: &InstanceSpec) -> Result<DenseTensor> {
    LowRankFactors::sample(spec)?.to_dense()
}

/// Dense outlier tensor for `low_rank`: `⌊α ∏dᵢ⌋` entries, uniform on
/// `[−μ, μ]` with `μ` the mean of `|low_rank|`.
pub fn gen_outliers(low_rank: &DenseTensor, alpha: f64, seed: u64) -> Result<DenseTensor> {
    let mu = low_rank.data().iter().map(|v| v.abs()).sum::<f64>() / low_rank.len() as f64;
    Ok(SparseOutliers::sample(low_rank.shape(), alpha, mu, seed)?.to_dense())
}
