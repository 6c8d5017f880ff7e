//! Fiber CUR decomposition.
//!
//! A tensor of multilinear rank `(r₀, …, r_{n-1})` is recovered exactly from a
//! sampled core subtensor `R = T(I₀, …, I_{n-1})`, sampled fibers
//! `Cᵢ = T_(i)(:, Jᵢ)` and their intersections `Uᵢ = Cᵢ(Iᵢ, :)` as
//!
//! ```text
//! T = R ×₀ (C₀ U₀⁺) ×₁ … ×_{n-1} (C_{n-1} U_{n-1}⁺)
//! ```
//!
//! whenever every `Uᵢ` has rank `rᵢ`. Here `Uᵢ⁺` is the pseudoinverse of the
//! rank-`rᵢ` truncation of `Uᵢ`, which also makes the construction a
//! low-multilinear-rank projection when the input is only approximately low
//! rank.
//!
//! Writing `Uᵢ ≈ Pᵢ Σᵢ Qᵢᵀ`, each factor splits as
//! `Cᵢ Uᵢ⁺ = (Cᵢ Qᵢ Σᵢ⁺) Pᵢᵀ`, so the decomposition is also a Tucker form with a
//! tiny `r₀ × … × r_{n-1}` core `R ×ᵢ Pᵢᵀ`. Restricted evaluations go through
//! that compact form; [`FiberCur::reconstruct_full`] uses the direct formula.

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{truncated_svd, Matrix, TruncatedSvd};
use crate::source::EntrySource;
use crate::tensor::{DenseTensor, IndexSets, Shape};

/// Relative singular-value floor `σ_r / σ₁` under which an intersection is
/// reported as rank deficient.
pub const RANK_DEFICIENCY_TOLERANCE: f64 = 1e-8;

/// `(|Iᵢ|, |Jᵢ|)` per mode: `min(dᵢ, ⌈υ rᵢ ln dᵢ⌉)` and
/// `min(∏_{j≠i} dⱼ, ⌈υ rᵢ ln ∏_{j≠i} dⱼ⌉)`, never below `rᵢ`.
pub fn sample_sizes(
    shape: &Shape,
    ranks: &[usize],
    upsilon: f64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    check_ranks(shape, ranks)?;
    if !(upsilon > 0.0 && upsilon.is_finite()) {
        return Err(Error::Config(format!(
            "sampling constant must be positive, got {upsilon}"
        )));
    }
    let size = |extent: usize, r: usize| -> usize {
        let raw = (upsilon * r as f64 * (extent as f64).ln()).ceil();
        let raw = if raw.is_finite() && raw > 0.0 {
            raw.min(usize::MAX as f64) as usize
        } else {
            0
        };
        raw.max(r).min(extent)
    };
    let rows = ranks
        .iter()
        .enumerate()
        .map(|(m, &r)| size(shape.dim(m), r))
        .collect();
    let cols = ranks
        .iter()
        .enumerate()
        .map(|(m, &r)| size(shape.fiber_count(m), r))
        .collect();
    Ok((rows, cols))
}

fn check_ranks(shape: &Shape, ranks: &[usize]) -> Result<()> {
    if ranks.len() != shape.order() {
        return Err(Error::Rank(format!(
            "{} ranks given for a tensor of order {}",
            ranks.len(),
            shape.order()
        )));
    }
    for (m, &r) in ranks.iter().enumerate() {
        if r == 0 || r > shape.dim(m) || r > shape.fiber_count(m) {
            return Err(Error::Rank(format!(
                "rank {r} is infeasible for mode {m} of {:?}",
                shape.dims()
            )));
        }
    }
    Ok(())
}

/// Row index sets `Iᵢ ⊆ [dᵢ]` and fiber column sets `Jᵢ ⊆ [∏_{j≠i} dⱼ]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleIndices {
    rows: IndexSets,
    cols: Vec<Vec<usize>>,
}

impl SampleIndices {
    /// Validates explicit index sets against a shape.
    pub fn new(shape: &Shape, rows: Vec<Vec<usize>>, cols: Vec<Vec<usize>>) -> Result<Self> {
        let rows = IndexSets::new(rows)?;
        rows.check(shape)?;
        if cols.len() != shape.order() {
            return Err(Error::Shape(format!(
                "{} fiber sets for a tensor of order {}",
                cols.len(),
                shape.order()
            )));
        }
        for (mode, set) in cols.iter().enumerate() {
            let count = shape.fiber_count(mode);
            if set.is_empty() || set.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Shape(format!(
                    "fiber set for mode {mode} must be nonempty and strictly increasing"
                )));
            }
            let last = *set.last().expect("nonempty");
            if last >= count {
                return Err(Error::Bounds {
                    mode,
                    index: last,
                    extent: count,
                });
            }
        }
        Ok(Self { rows, cols })
    }

    /// Draws `row_sizes[i]` rows and `col_sizes[i]` fibers per mode uniformly
    /// without replacement.
    pub fn sample_with_sizes<R: Rng + ?Sized>(
        shape: &Shape,
        row_sizes: &[usize],
        col_sizes: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        let n = shape.order();
        if row_sizes.len() != n || col_sizes.len() != n {
            return Err(Error::Shape(format!(
                "sample sizes must have one entry per mode ({n})"
            )));
        }
        let mut draw = |len: usize, amount: usize, mode: usize| -> Result<Vec<usize>> {
            if amount == 0 || amount > len {
                return Err(Error::Config(format!(
                    "cannot draw {amount} of {len} indices for mode {mode}"
                )));
            }
            let mut v = index::sample(rng, len, amount).into_vec();
            v.sort_unstable();
            Ok(v)
        };
        let mut rows = Vec::with_capacity(n);
        let mut cols = Vec::with_capacity(n);
        for m in 0..n {
            rows.push(draw(shape.dim(m), row_sizes[m], m)?);
            cols.push(draw(shape.fiber_count(m), col_sizes[m], m)?);
        }
        Self::new(shape, rows, cols)
    }

    /// Uniform sampling with the default sizes from [`sample_sizes`].
    pub fn sample<R: Rng + ?Sized>(
        shape: &Shape,
        ranks: &[usize],
        upsilon: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let (rows, cols) = sample_sizes(shape, ranks, upsilon)?;
        Self::sample_with_sizes(shape, &rows, &cols, rng)
    }

    /// Every row and every fiber.
    pub fn full(shape: &Shape) -> Self {
        Self {
            rows: IndexSets::full(shape),
            cols: (0..shape.order())
                .map(|m| (0..shape.fiber_count(m)).collect())
                .collect(),
        }
    }

    /// `I₀, …, I_{n-1}`.
    pub fn rows(&self) -> &IndexSets {
        &self.rows
    }

    /// `Jᵢ` for one mode.
    pub fn cols(&self, mode: usize) -> &[usize] {
        &self.cols[mode]
    }

    pub fn all_cols(&self) -> &[Vec<usize>] {
        &self.cols
    }

    pub fn order(&self) -> usize {
        self.cols.len()
    }

    pub fn row_sizes(&self) -> Vec<usize> {
        self.rows.sizes()
    }

    pub fn col_sizes(&self) -> Vec<usize> {
        self.cols.iter().map(Vec::len).collect()
    }

    /// `Iᵢ`: the rows of `Cᵢ` that form `Uᵢ`.
    pub fn rows_of(&self, mode: usize) -> &[usize] {
        self.rows.mode(mode)
    }
}

/// Sampled blocks of a tensor: the core subtensor and the per-mode fibers.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledBlocks {
    pub core: DenseTensor,
    pub fibers: Vec<Matrix>,
}

impl SampledBlocks {
    pub fn gather<S: EntrySource + ?Sized>(source: &S, samples: &SampleIndices) -> Result<Self> {
        let core = source.gather_subtensor(samples.rows())?;
        let fibers = (0..samples.order())
            .map(|m| source.gather_fibers(m, samples.cols(m)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { core, fibers })
    }

    pub fn zeros_like(samples: &SampleIndices, shape: &Shape) -> Self {
        Self {
            core: DenseTensor::zeros(samples.rows().shape()),
            fibers: samples
                .all_cols()
                .iter()
                .enumerate()
                .map(|(m, c)| Matrix::zeros(shape.dim(m), c.len()))
                .collect(),
        }
    }

    /// `‖core‖_F + Σᵢ ‖fibersᵢ‖_F`.
    pub fn norm_sum(&self) -> f64 {
        self.core.fro_norm() + self.fibers.iter().map(Matrix::fro_norm).sum::<f64>()
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        Ok(Self {
            core: self.core.sub(&rhs.core)?,
            fibers: self
                .fibers
                .iter()
                .zip(&rhs.fibers)
                .map(|(a, b)| a.sub(b))
                .collect::<Result<Vec<_>>>()?,
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            core: self.core.map(&f),
            fibers: self
                .fibers
                .iter()
                .map(|m| {
                    let data = m.as_slice().iter().map(|&v| f(v)).collect();
                    Matrix::from_col_major(m.rows(), m.cols(), data).expect("same size")
                })
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.core.data().iter().all(|v| v.is_finite()) && self.fibers.iter().all(Matrix::is_finite)
    }

    /// Largest absolute difference to `other`, over every block.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        let d = self.sub(other)?;
        Ok(d.fibers
            .iter()
            .map(Matrix::max_abs)
            .fold(d.core.inf_norm(), f64::max))
    }
}

/// The Fiber CUR triple plus its compact Tucker form.
#[derive(Debug, Clone)]
pub struct FiberCur {
    shape: Shape,
    ranks: Vec<usize>,
    samples: SampleIndices,
    core: DenseTensor,
    fibers: Vec<Matrix>,
    intersections: Vec<TruncatedSvd>,
    compact_core: DenseTensor,
    compact_factors: Vec<Matrix>,
}

impl FiberCur {
    /// Builds the decomposition from already-gathered blocks of the tensor to
    /// approximate.
    pub fn from_blocks(
        shape: &Shape,
        samples: SampleIndices,
        blocks: SampledBlocks,
        ranks: &[usize],
    ) -> Result<Self> {
        check_ranks(shape, ranks)?;
        let SampledBlocks { core, fibers } = blocks;
        if core.shape() != &samples.rows().shape() {
            return Err(Error::Shape(format!(
                "core {:?} does not match the row samples {:?}",
                core.dims(),
                samples.row_sizes()
            )));
        }
        if fibers.len() != shape.order() {
            return Err(Error::Shape(format!(
                "{} fiber matrices for a tensor of order {}",
                fibers.len(),
                shape.order()
            )));
        }
        let mut intersections = Vec::with_capacity(shape.order());
        for (m, c) in fibers.iter().enumerate() {
            if c.rows() != shape.dim(m) || c.cols() != samples.cols(m).len() {
                return Err(Error::Shape(format!(
                    "fiber matrix {m} is {}x{}, expected {}x{}",
                    c.rows(),
                    c.cols(),
                    shape.dim(m),
                    samples.cols(m).len()
                )));
            }
            let r = ranks[m];
            let u = c.select_rows(samples.rows_of(m));
            if r > u.rows().min(u.cols()) {
                return Err(Error::Rank(format!(
                    "rank {r} exceeds the {}x{} intersection of mode {m}",
                    u.rows(),
                    u.cols()
                )));
            }
            intersections.push(truncated_svd(&u, r)?);
        }

        let mut compact_core = core.clone();
        let mut compact_factors = Vec::with_capacity(shape.order());
        for (m, svd) in intersections.iter().enumerate() {
            compact_core = compact_core.mode_product(&svd.u.transpose(), m)?;
            let mut a = fibers[m].matmul(&svd.v)?;
            a.scale_cols(&svd.inverse_singular_values());
            compact_factors.push(a);
        }

        Ok(Self {
            shape: shape.clone(),
            ranks: ranks.to_vec(),
            samples,
            core,
            fibers,
            intersections,
            compact_core,
            compact_factors,
        })
    }

    /// Gathers the sampled blocks of `source` and decomposes them.
    pub fn build<S: EntrySource + ?Sized>(
        source: &S,
        samples: SampleIndices,
        ranks: &[usize],
    ) -> Result<Self> {
        let blocks = SampledBlocks::gather(source, &samples)?;
        Self::from_blocks(source.shape(), samples, blocks, ranks)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn samples(&self) -> &SampleIndices {
        &self.samples
    }

    /// The core subtensor `R`.
    pub fn core(&self) -> &DenseTensor {
        &self.core
    }

    /// The fiber matrices `Cᵢ`.
    pub fn fibers(&self) -> &[Matrix] {
        &self.fibers
    }

    /// Truncated SVDs of the intersections `Uᵢ`.
    pub fn intersections(&self) -> &[TruncatedSvd] {
        &self.intersections
    }

    /// `r₀ × … × r_{n-1}` core and `dᵢ × rᵢ` factors of the equivalent Tucker form.
    pub fn compact(&self) -> (&DenseTensor, &[Matrix]) {
        (&self.compact_core, &self.compact_factors)
    }

    /// Per-mode flags: `σ_{rᵢ}(Uᵢ) ≤ 1e-8 · σ₁(Uᵢ)`.
    pub fn rank_deficient(&self) -> Vec<bool> {
        self.intersections
            .iter()
            .map(|s| s.is_rank_deficient(RANK_DEFICIENCY_TOLERANCE))
            .collect()
    }

    /// `R ×ᵢ (Cᵢ Uᵢ⁺)` over the full index range.
    pub fn reconstruct_full(&self) -> Result<DenseTensor> {
        let factors = self
            .fibers
            .iter()
            .zip(&self.intersections)
            .map(|(c, svd)| c.matmul(&svd.pinv()))
            .collect::<Result<Vec<_>>>()?;
        self.core.multi_mode_product(&factors)
    }

    /// The reconstruction restricted to `sel`, without forming the full tensor.
    pub fn eval_subtensor(&self, sel: &IndexSets) -> Result<DenseTensor> {
        sel.check(&self.shape)?;
        let factors: Vec<Matrix> = self
            .compact_factors
            .iter()
            .zip(sel.sets())
            .map(|(a, rows)| a.select_rows(rows))
            .collect();
        self.compact_core.multi_mode_product(&factors)
    }

    /// Columns `columns` of the mode-`mode` unfolding of the reconstruction.
    pub fn eval_fibers(&self, mode: usize, columns: &[usize]) -> Result<Matrix> {
        self.shape.check_mode(mode)?;
        let n = self.shape.order();
        let count = self.shape.fiber_count(mode);
        let core = &self.compact_core;
        let core_dims = core.dims();
        let rk = core_dims[mode];
        let factor_k = &self.compact_factors[mode];
        let d = self.shape.dim(mode);

        let mut out = Matrix::zeros(d, columns.len());
        let mut weights: Vec<Vec<f64>> = vec![Vec::new(); n];
        let mut reduced = vec![0.0; rk];
        let mut counter = vec![0usize; n];
        for (col, &c) in columns.iter().enumerate() {
            if c >= count {
                return Err(Error::Bounds {
                    mode,
                    index: c,
                    extent: count,
                });
            }
            let others = self.shape.fiber_column_multiindex(mode, c)?;
            let mut it = others.iter();
            for (m, w) in weights.iter_mut().enumerate() {
                if m != mode {
                    let i = *it.next().expect("one index per non-fiber mode");
                    *w = self.compact_factors[m].row(i);
                }
            }

            // Contract every mode but `mode` against its weight row.
            reduced.iter_mut().for_each(|v| *v = 0.0);
            counter.iter_mut().for_each(|v| *v = 0);
            for &value in core.data() {
                let mut w = value;
                for m in 0..n {
                    if m != mode {
                        w *= weights[m][counter[m]];
                    }
                }
                reduced[counter[mode]] += w;
                for m in 0..n {
                    counter[m] += 1;
                    if counter[m] < core_dims[m] {
                        break;
                    }
                    counter[m] = 0;
                }
            }

            let dst = out.col_mut(col);
            for (a, &g) in reduced.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                for (o, &f) in dst.iter_mut().zip(factor_k.col(a)) {
                    *o += f * g;
                }
            }
        }
        Ok(out)
    }

    /// The reconstruction on the sampled blocks of `samples`.
    pub fn eval_blocks(&self, samples: &SampleIndices) -> Result<SampledBlocks> {
        let core = self.eval_subtensor(samples.rows())?;
        let fibers = (0..samples.order())
            .map(|m| self.eval_fibers(m, samples.cols(m)))
            .collect::<Result<Vec<_>>>()?;
        Ok(SampledBlocks { core, fibers })
    }
}

impl EntrySource for FiberCur {
    fn shape(&self) -> &Shape {
        &self.shape
    }

    fn entry(&self, idx: &[usize]) -> f64 {
        let sel = IndexSets::new(idx.iter().map(|&i| vec![i]).collect())
            .expect("singletons are valid sets");
        self.eval_subtensor(&sel).expect("index in range").data()[0]
    }

    fn gather_subtensor(&self, sel: &IndexSets) -> Result<DenseTensor> {
        self.eval_subtensor(sel)
    }

    fn gather_fibers(&self, mode: usize, columns: &[usize]) -> Result<Matrix> {
        self.eval_fibers(mode, columns)
    }
}
