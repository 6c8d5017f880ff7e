//! Golub–Kahan–Reinsch SVD: Householder bidiagonalization followed by
//! implicitly shifted QR sweeps on the bidiagonal.

use super::Matrix;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 75;

/// Relative cutoff below which singular values are treated as zero by the
/// pseudoinverse, scaled by `max(m, p) * σ₁`.
pub const PINV_RELATIVE_CUTOFF: f64 = 1e-12;

/// Rank-`r` truncation `U · diag(σ) · Vᵀ` of an `m × p` matrix.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    /// `m × r`, orthonormal columns.
    pub u: Matrix,
    /// Non-increasing, nonnegative.
    pub singular_values: Vec<f64>,
    /// `p × r`, orthonormal columns.
    pub v: Matrix,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// Row count of the decomposed matrix.
    pub fn rows(&self) -> usize {
        self.u.rows()
    }

    /// Column count of the decomposed matrix.
    pub fn cols(&self) -> usize {
        self.v.rows()
    }

    /// Singular values at or below this are dropped by [`TruncatedSvd::pinv`].
    pub fn cutoff(&self) -> f64 {
        let sigma_max = self.singular_values.first().copied().unwrap_or(0.0);
        self.rows().max(self.cols()) as f64 * sigma_max * PINV_RELATIVE_CUTOFF
    }

    /// Number of singular values kept by the pseudoinverse.
    pub fn effective_rank(&self) -> usize {
        let tau = self.cutoff();
        self.singular_values.iter().filter(|&&s| s > tau).count()
    }

    /// True when `σ_r ≤ rel · σ₁`, or the matrix is zero.
    pub fn is_rank_deficient(&self, rel: f64) -> bool {
        match (self.singular_values.first(), self.singular_values.last()) {
            (Some(&first), Some(&last)) => first == 0.0 || last <= rel * first,
            _ => true,
        }
    }

    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        us.scale_cols(&self.singular_values);
        us.matmul(&self.v.transpose())
            .expect("factor shapes agree by construction")
    }

    /// Reciprocals of the kept singular values, zero for the dropped ones.
    pub fn inverse_singular_values(&self) -> Vec<f64> {
        let tau = self.cutoff();
        self.singular_values
            .iter()
            .map(|&s| if s > tau { 1.0 / s } else { 0.0 })
            .collect()
    }

    /// `V · Σ⁺ · Uᵀ`, a `p × m` matrix.
    pub fn pinv(&self) -> Matrix {
        let mut v_scaled = self.v.clone();
        v_scaled.scale_cols(&self.inverse_singular_values());
        v_scaled
            .matmul(&self.u.transpose())
            .expect("factor shapes agree by construction")
    }
}

/// Best rank-`rank` approximation of `m`.
pub fn truncated_svd(m: &Matrix, rank: usize) -> Result<TruncatedSvd> {
    let full_rank = m.rows().min(m.cols());
    if rank == 0 || rank > full_rank {
        return Err(Error::Rank(format!(
            "rank {rank} requested for a {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_finite() {
        return Err(Error::Data("matrix has non-finite entries".into()));
    }

    let (u, s, v) = if m.rows() >= m.cols() {
        golub_kahan(m.clone())?
    } else {
        let (u, s, v) = golub_kahan(m.transpose())?;
        (v, s, u)
    };

    Ok(TruncatedSvd {
        u: u.leading_cols(rank),
        singular_values: s[..rank].to_vec(),
        v: v.leading_cols(rank),
    })
}

/// Pseudoinverse of the rank-`rank` truncation of `m`.
pub fn pinv_truncated(m: &Matrix, rank: usize) -> Result<Matrix> {
    Ok(truncated_svd(m, rank)?.pinv())
}

#[inline]
fn with_sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Thin SVD of a tall matrix (`rows >= cols`). Returns `(U, σ, V)` with σ sorted
/// in non-increasing order.
fn golub_kahan(mut a: Matrix) -> Result<(Matrix, Vec<f64>, Matrix)> {
    let m = a.rows();
    let n = a.cols();
    debug_assert!(m >= n);

    let mut w = vec![0.0; n];
    let mut rv1 = vec![0.0; n];
    let mut v = Matrix::zeros(n, n);

    let mut g = 0.0f64;
    let mut scale = 0.0f64;
    let mut anorm = 0.0f64;
    let mut l = 0;

    // Householder reduction to upper bidiagonal form.
    for i in 0..n {
        l = i + 1;
        rv1[i] = scale * g;
        g = 0.0;
        scale = 0.0;
        let mut s;
        if i < m {
            scale = (i..m).map(|k| a[(k, i)].abs()).sum();
            if scale != 0.0 {
                s = 0.0;
                for k in i..m {
                    a[(k, i)] /= scale;
                    s += a[(k, i)] * a[(k, i)];
                }
                let f = a[(i, i)];
                g = -with_sign(s.sqrt(), f);
                let h = f * g - s;
                a[(i, i)] = f - g;
                for j in l..n {
                    let s: f64 = (i..m).map(|k| a[(k, i)] * a[(k, j)]).sum();
                    let f = s / h;
                    for k in i..m {
                        let aki = a[(k, i)];
                        a[(k, j)] += f * aki;
                    }
                }
                for k in i..m {
                    a[(k, i)] *= scale;
                }
            }
        }
        w[i] = scale * g;
        g = 0.0;
        scale = 0.0;
        if i < m && i + 1 != n {
            scale = (l..n).map(|k| a[(i, k)].abs()).sum();
            if scale != 0.0 {
                s = 0.0;
                for k in l..n {
                    a[(i, k)] /= scale;
                    s += a[(i, k)] * a[(i, k)];
                }
                let f = a[(i, l)];
                g = -with_sign(s.sqrt(), f);
                let h = f * g - s;
                a[(i, l)] = f - g;
                for k in l..n {
                    rv1[k] = a[(i, k)] / h;
                }
                for j in l..m {
                    let s: f64 = (l..n).map(|k| a[(j, k)] * a[(i, k)]).sum();
                    for k in l..n {
                        a[(j, k)] += s * rv1[k];
                    }
                }
                for k in l..n {
                    a[(i, k)] *= scale;
                }
            }
        }
        anorm = anorm.max(w[i].abs() + rv1[i].abs());
    }

    // Accumulate the right-hand transformations.
    for i in (0..n).rev() {
        if i + 1 < n {
            if g != 0.0 {
                for j in l..n {
                    v[(j, i)] = (a[(i, j)] / a[(i, l)]) / g;
                }
                for j in l..n {
                    let s: f64 = (l..n).map(|k| a[(i, k)] * v[(k, j)]).sum();
                    for k in l..n {
                        let vki = v[(k, i)];
                        v[(k, j)] += s * vki;
                    }
                }
            }
            for j in l..n {
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        }
        v[(i, i)] = 1.0;
        g = rv1[i];
        l = i;
    }

    // Accumulate the left-hand transformations.
    for i in (0..n.min(m)).rev() {
        let l = i + 1;
        let mut g = w[i];
        for j in l..n {
            a[(i, j)] = 0.0;
        }
        if g != 0.0 {
            g = 1.0 / g;
            for j in l..n {
                let s: f64 = (l..m).map(|k| a[(k, i)] * a[(k, j)]).sum();
                let f = (s / a[(i, i)]) * g;
                for k in i..m {
                    let aki = a[(k, i)];
                    a[(k, j)] += f * aki;
                }
            }
            for j in i..m {
                a[(j, i)] *= g;
            }
        } else {
            for j in i..m {
                a[(j, i)] = 0.0;
            }
        }
        a[(i, i)] += 1.0;
    }

    // Diagonalize the bidiagonal form.
    let negligible = |x: f64| x.abs() <= f64::EPSILON * anorm;
    for k in (0..n).rev() {
        let mut sweep = 0;
        loop {
            let mut cancel = true;
            let mut l = k;
            loop {
                if negligible(rv1[l]) {
                    cancel = false;
                    break;
                }
                // rv1[0] is always zero, so l > 0 here.
                if negligible(w[l - 1]) {
                    break;
                }
                l -= 1;
            }
            if cancel {
                // w[l-1] is negligible: chase the superdiagonal entry out.
                let nm = l - 1;
                let mut c = 0.0;
                let mut s = 1.0;
                for i in l..=k {
                    let f = s * rv1[i];
                    rv1[i] *= c;
                    if negligible(f) {
                        break;
                    }
                    let g = w[i];
                    let h = f.hypot(g);
                    w[i] = h;
                    c = g / h;
                    s = -f / h;
                    for j in 0..m {
                        let y = a[(j, nm)];
                        let z = a[(j, i)];
                        a[(j, nm)] = y * c + z * s;
                        a[(j, i)] = z * c - y * s;
                    }
                }
            }
            let z = w[k];
            if l == k {
                if z < 0.0 {
                    w[k] = -z;
                    for j in 0..n {
                        v[(j, k)] = -v[(j, k)];
                    }
                }
                break;
            }
            if sweep == MAX_SWEEPS {
                return Err(Error::Data(format!(
                    "SVD did not converge after {MAX_SWEEPS} sweeps"
                )));
            }
            sweep += 1;

            // Wilkinson-style shift from the trailing 2x2 block.
            let mut x = w[l];
            let nm = k - 1;
            let mut y = w[nm];
            let mut g = rv1[nm];
            let mut h = rv1[k];
            let mut f = ((y - z) * (y + z) + (g - h) * (g + h)) / (2.0 * h * y);
            g = f.hypot(1.0);
            f = ((x - z) * (x + z) + h * ((y / (f + with_sign(g, f))) - h)) / x;

            let mut c = 1.0;
            let mut s = 1.0;
            for j in l..=nm {
                let i = j + 1;
                g = rv1[i];
                y = w[i];
                h = s * g;
                g *= c;
                let mut z = f.hypot(h);
                rv1[j] = z;
                c = f / z;
                s = h / z;
                f = x * c + g * s;
                g = g * c - x * s;
                h = y * s;
                y *= c;
                for jj in 0..n {
                    let xv = v[(jj, j)];
                    let zv = v[(jj, i)];
                    v[(jj, j)] = xv * c + zv * s;
                    v[(jj, i)] = zv * c - xv * s;
                }
                z = f.hypot(h);
                w[j] = z;
                if z != 0.0 {
                    c = f / z;
                    s = h / z;
                }
                f = c * g + s * y;
                x = c * y - s * g;
                for jj in 0..m {
                    let ya = a[(jj, j)];
                    let za = a[(jj, i)];
                    a[(jj, j)] = ya * c + za * s;
                    a[(jj, i)] = za * c - ya * s;
                }
            }
            rv1[l] = 0.0;
            rv1[k] = f;
            w[k] = x;
        }
    }

    // Sort by decreasing singular value.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&p, &q| w[q].total_cmp(&w[p]));
    let sorted_w = order.iter().map(|&i| w[i]).collect();
    let u = a.select_cols(&order);
    let v = v.select_cols(&order);
    Ok((u, sorted_w, v))
}
