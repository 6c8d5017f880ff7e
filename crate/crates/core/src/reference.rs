//! Slow reference implementations: loop-based tensor operations, a Jacobi
//! symmetric eigensolver, HOSVD, an HOSVD-based alternating-projections
//! baseline, and a full-tensor replay of RTCUR-F.
//!
//! These deliberately avoid the fast paths in [`crate::tensor`] and
//! [`crate::cur`] so they can serve as test oracles and timing baselines.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cur::{SampleIndices, SampledBlocks};
use crate::error::{Error, Result};
use crate::linalg::{pinv_truncated, truncated_svd, Matrix};
use crate::solver::{hard_threshold_value, zeta_schedule, Sampling, SolverConfig, StopReason};
use crate::tensor::{DenseTensor, Shape};

/// Largest element count the loop oracles accept.
pub const NAIVE_SIZE_LIMIT: usize = 100_000;

fn guard(shape: &Shape) -> Result<()> {
    if shape.len() > NAIVE_SIZE_LIMIT {
        return Err(Error::Shape(format!(
            "{} elements exceed the loop-oracle limit of {NAIVE_SIZE_LIMIT}",
            shape.len()
        )));
    }
    Ok(())
}

/// Every multi-index of `dims`, mode 0 fastest.
fn multi_indices(dims: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = dims.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; dims.len()];
    for _ in 0..total {
        out.push(idx.clone());
        for m in 0..dims.len() {
            idx[m] += 1;
            if idx[m] < dims[m] {
                break;
            }
            idx[m] = 0;
        }
    }
    out
}

fn naive_offset(dims: &[usize], idx: &[usize]) -> usize {
    let mut off = 0;
    let mut step = 1;
    for (&i, &d) in idx.iter().zip(dims) {
        off += i * step;
        step *= d;
    }
    off
}

/// Mode-`mode` unfolding built from the definition: column index
/// `Σ_{m≠mode} iₘ ∏_{l<m, l≠mode} d_l`.
pub fn naive_unfold(t: &DenseTensor, mode: usize) -> Result<Matrix> {
    guard(t.shape())?;
    t.shape().check_mode(mode)?;
    let dims = t.dims();
    let cols = t.len() / dims[mode];
    let mut m = Matrix::zeros(dims[mode], cols);
    for idx in multi_indices(dims) {
        let mut col = 0;
        let mut step = 1;
        for (l, (&i, &d)) in idx.iter().zip(dims).enumerate() {
            if l != mode {
                col += i * step;
                step *= d;
            }
        }
        m[(idx[mode], col)] = t.data()[naive_offset(dims, &idx)];
    }
    Ok(m)
}

/// `Y[…, j, …] = Σ_s X[…, s, …] A[j, s]`, summed element by element.
pub fn naive_mode_product(t: &DenseTensor, a: &Matrix, mode: usize) -> Result<DenseTensor> {
    guard(t.shape())?;
    t.shape().check_mode(mode)?;
    let dims = t.dims();
    if a.cols() != dims[mode] {
        return Err(Error::Shape(format!(
            "a {}x{} matrix cannot act on mode {mode} of extent {}",
            a.rows(),
            a.cols(),
            dims[mode]
        )));
    }
    let mut out_dims = dims.to_vec();
    out_dims[mode] = a.rows();
    let out_shape = Shape::new(out_dims.clone())?;
    guard(&out_shape)?;
    let mut data = vec![0.0; out_shape.len()];
    for out_idx in multi_indices(&out_dims) {
        let mut src = out_idx.clone();
        let mut sum = 0.0;
        for s in 0..dims[mode] {
            src[mode] = s;
            sum += t.data()[naive_offset(dims, &src)] * a[(out_idx[mode], s)];
        }
        data[naive_offset(&out_dims, &out_idx)] = sum;
    }
    DenseTensor::from_vec(out_shape, data)
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns eigenvalues
/// in non-increasing order with matching eigenvector columns.
pub fn jacobi_eigen_symmetric(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Shape("Jacobi eigensolver needs a square matrix".into()));
    }
    let mut a = a.clone();
    let mut v = Matrix::identity(n);
    let scale = a.fro_norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    Ok((values, v.select_cols(&order)))
}

/// Singular values of `m` as square roots of the Gram eigenvalues.
pub fn singular_values_via_gram(m: &Matrix) -> Result<Vec<f64>> {
    let gram = if m.rows() <= m.cols() {
        m.gram_rows()
    } else {
        m.t_matmul(m)?
    };
    let (values, _) = jacobi_eigen_symmetric(&gram)?;
    Ok(values.into_iter().map(|v| v.max(0.0).sqrt()).collect())
}

/// Orthogonal Tucker decomposition.
#[derive(Debug, Clone)]
pub struct TuckerDecomp {
    pub core: DenseTensor,
    /// Column-orthonormal `dᵢ × Rᵢ` factors.
    pub factors: Vec<Matrix>,
}

impl TuckerDecomp {
    pub fn reconstruct(&self) -> Result<DenseTensor> {
        self.core.multi_mode_product(&self.factors)
    }
}

/// Leading `rank` left singular vectors of `unfold(t, mode)`, from the Gram
/// matrix of the unfolding.
fn leading_left_singular_vectors(t: &DenseTensor, mode: usize, rank: usize) -> Result<Matrix> {
    let gram = t.unfold(mode)?.gram_rows();
    Ok(truncated_svd(&gram, rank)?.u)
}

/// Truncated HOSVD: factors from each unfolding, core `T ×ᵢ Uᵢᵀ`.
pub fn hosvd(t: &DenseTensor, ranks: &[usize]) -> Result<TuckerDecomp> {
    if ranks.len() != t.order() {
        return Err(Error::Rank(format!(
            "{} ranks for a tensor of order {}",
            ranks.len(),
            t.order()
        )));
    }
    for (m, (&r, &d)) in ranks.iter().zip(t.dims()).enumerate() {
        if r == 0 || r > d {
            return Err(Error::Rank(format!("rank {r} infeasible for mode {m} of extent {d}")));
        }
    }
    let factors = ranks
        .iter()
        .enumerate()
        .map(|(m, &r)| leading_left_singular_vectors(t, m, r))
        .collect::<Result<Vec<_>>>()?;
    let mut core = t.clone();
    for (m, u) in factors.iter().enumerate() {
        core = core.mode_product(&u.transpose(), m)?;
    }
    Ok(TuckerDecomp { core, factors })
}

#[derive(Debug, Clone)]
pub struct ApConfig {
    pub ranks: Vec<usize>,
    pub zeta0: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    pub time_limit: Option<Duration>,
}

#[derive(Debug, Clone)]
pub struct ApResult {
    pub low_rank: DenseTensor,
    pub sparse: DenseTensor,
    pub error_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub stop: StopReason,
    pub per_iteration: Vec<Duration>,
}

/// Alternating projections with full hard thresholding and HOSVD truncation,
/// on the same threshold schedule as RTCUR. Stops on
/// `‖X − L − S‖_F / ‖X‖_F ≤ ε`.
pub fn ap_hosvd_trpca(x: &DenseTensor, cfg: &ApConfig) -> Result<ApResult> {
    if !(cfg.gamma > 0.0 && cfg.gamma < 1.0) || !(cfg.epsilon > 0.0) || cfg.max_iters == 0 {
        return Err(Error::Config("invalid baseline parameters".into()));
    }
    let start = Instant::now();
    let x_norm = x.fro_norm();
    let mut low = DenseTensor::zeros(x.shape().clone());
    let mut sparse = low.clone();
    let mut error_history = Vec::new();
    let mut per_iteration = Vec::new();
    let mut stop = StopReason::MaxIterations;

    for k in 1..=cfg.max_iters {
        let it = Instant::now();
        let zeta = zeta_schedule(cfg.zeta0, cfg.gamma, k);
        sparse = x.sub(&low)?.map(|v| hard_threshold_value(v, zeta));
        let cleaned = x.sub(&sparse)?;
        if !cleaned.data().iter().all(|v| v.is_finite()) {
            stop = StopReason::Diverged;
            break;
        }
        low = hosvd(&cleaned, &cfg.ranks)?.reconstruct()?;
        let resid = x.sub(&low)?.sub(&sparse)?.fro_norm();
        let error = if x_norm == 0.0 {
            if resid == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            resid / x_norm
        };
        error_history.push(error);
        per_iteration.push(it.elapsed());
        if error <= cfg.epsilon {
            stop = StopReason::Converged;
            break;
        }
        if cfg.time_limit.is_some_and(|l| start.elapsed() >= l) {
            stop = StopReason::TimeLimit;
            break;
        }
    }

    Ok(ApResult {
        low_rank: low,
        sparse,
        iterations: error_history.len(),
        converged: stop == StopReason::Converged,
        stop,
        error_history,
        per_iteration,
    })
}

/// One iterate of [`naive_rtcur_fixed`], restricted to the samples.
#[derive(Debug, Clone)]
pub struct NaiveIterate {
    pub zeta: f64,
    pub sparse: SampledBlocks,
    pub low_rank: SampledBlocks,
    pub error: f64,
}

/// RTCUR-F replayed with full tensors: every `L⁽ᵏ⁾` is formed as
/// `R ×ᵢ (Cᵢ Uᵢ⁺)` over the whole index range, `S⁽ᵏ⁺¹⁾` thresholds all of
/// `X − L⁽ᵏ⁾`, and only then are the sampled blocks read off.
pub fn naive_rtcur_fixed(x: &DenseTensor, cfg: &SolverConfig) -> Result<Vec<NaiveIterate>> {
    cfg.validate()?;
    let Sampling::Constant(upsilon) = cfg.sampling else {
        return Err(Error::Config("the replay draws samples from υ".into()));
    };
    let shape = x.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let samples = SampleIndices::sample(shape, &cfg.ranks, upsilon, &mut rng)?;
    let zeta0 = cfg.zeta0.unwrap_or_else(|| x.inf_norm());
    let restrict = |t: &DenseTensor| SampledBlocks::gather(t, &samples);
    let x_blocks = restrict(x)?;
    let x_norm = x_blocks.norm_sum();

    let mut low_full = DenseTensor::zeros(shape.clone());
    let mut out = Vec::new();
    for k in 1..=cfg.max_iters {
        let zeta = zeta_schedule(zeta0, cfg.gamma, k);
        let sparse_full = x.sub(&low_full)?.map(|v| hard_threshold_value(v, zeta));
        let cleaned = x.sub(&sparse_full)?;

        let core = cleaned.subtensor(samples.rows())?;
        let mut factors = Vec::with_capacity(shape.order());
        for m in 0..shape.order() {
            let c = cleaned.unfold(m)?.select_cols(samples.cols(m));
            let u = c.select_rows(samples.rows_of(m));
            factors.push(c.matmul(&pinv_truncated(&u, cfg.ranks[m])?)?);
        }
        low_full = core.multi_mode_product(&factors)?;

        let resid_full = x.sub(&low_full)?.sub(&sparse_full)?;
        let resid = restrict(&resid_full)?;
        let error = if x_norm == 0.0 {
            if resid.norm_sum() == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            resid.norm_sum() / x_norm
        };
        out.push(NaiveIterate {
            zeta,
            sparse: restrict(&sparse_full)?,
            low_rank: restrict(&low_full)?,
            error,
        });
        if error <= cfg.epsilon {
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_lowrank, InstanceSpec};

    fn cube() -> DenseTensor {
        let shape = Shape::new([2, 2, 2]).unwrap();
        DenseTensor::from_vec(shape, (1..=8).map(f64::from).collect()).unwrap()
    }

    #[test]
    fn canonical_examples() {
        let t = cube();
        assert_eq!(
            naive_unfold(&t, 0).unwrap(),
            Matrix::from_rows(&[vec![1.0, 3.0, 5.0, 7.0], vec![2.0, 4.0, 6.0, 8.0]])
        );
        assert_eq!(
            naive_unfold(&t, 2).unwrap(),
            Matrix::from_rows(&[vec![1.0, 2.0, 3.0, 4.0], vec![5.0, 6.0, 7.0, 8.0]])
        );
        let p = naive_mode_product(&t, &Matrix::from_rows(&[vec![1.0, 1.0]]), 0).unwrap();
        assert_eq!(p.data(), &[3.0, 7.0, 11.0, 15.0]);
        assert_eq!(naive_mode_product(&t, &Matrix::identity(2), 2).unwrap(), t);
    }

    #[test]
    fn size_guard() {
        let big = DenseTensor::zeros(Shape::new([100, 100, 11]).unwrap());
        assert!(naive_unfold(&big, 0).is_err());
    }

    #[test]
    fn jacobi_diagonalizes() {
        let a = Matrix::from_rows(&[
            vec![4.0, 1.0, 0.5],
            vec![1.0, 3.0, 0.2],
            vec![0.5, 0.2, 1.0],
        ]);
        let (vals, vecs) = jacobi_eigen_symmetric(&a).unwrap();
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        for (k, &lambda) in vals.iter().enumerate() {
            let x = vecs.select_cols(&[k]);
            let ax = a.matmul(&x).unwrap();
            for i in 0..3 {
                assert!((ax[(i, 0)] - lambda * x[(i, 0)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hosvd_examples() {
        let spec = InstanceSpec::new(3, 8, 2, 0.0, 3);
        let l = gen_lowrank(&spec).unwrap();
        let dec = hosvd(&l, &[2, 2, 2]).unwrap();
        assert!(dec.reconstruct().unwrap().relative_error(&l).unwrap() < 1e-8);
        assert!(dec.core.fro_norm() <= l.fro_norm() * (1.0 + 1e-12));
        for f in &dec.factors {
            let g = f.t_matmul(f).unwrap();
            assert!(g.sub(&Matrix::identity(2)).unwrap().max_abs() < 1e-10);
        }

        let t = DenseTensor::from_fn(Shape::new([3, 4, 2]).unwrap(), |i| {
            ((i[0] * 5 + i[1] * 3 + i[2] * 7) as f64).cos()
        });
        let full = hosvd(&t, &[3, 4, 2]).unwrap();
        assert!(full.reconstruct().unwrap().relative_error(&t).unwrap() < 1e-10);
        assert!(hosvd(&t, &[4, 1, 1]).is_err());
    }

    #[test]
    fn hosvd_error_non_increasing_in_rank() {
        let t = DenseTensor::from_fn(Shape::new([6, 6, 6]).unwrap(), |i| {
            ((i[0] * 13 + i[1] * 7 + i[2] * 3) as f64).sin() + (i[0] as f64) * 0.1
        });
        let mut last = f64::INFINITY;
        for r in 1..=6 {
            let err = hosvd(&t, &[r, 3, 3])
                .unwrap()
                .reconstruct()
                .unwrap()
                .relative_error(&t)
                .unwrap();
            assert!(err <= last + 1e-12, "r={r}: {err} > {last}");
            last = err;
        }
    }

    #[test]
    fn baseline_clean_data_converges_fast() {
        let spec = InstanceSpec::new(3, 12, 2, 0.0, 5);
        let l = gen_lowrank(&spec).unwrap();
        let res = ap_hosvd_trpca(
            &l,
            &ApConfig {
                ranks: vec![2, 2, 2],
                zeta0: l.inf_norm(),
                gamma: 0.7,
                epsilon: 1e-8,
                max_iters: 50,
                time_limit: None,
            },
        )
        .unwrap();
        assert!(res.converged);
        assert!(res.iterations <= 3, "{:?}", res.error_history);
    }
}
