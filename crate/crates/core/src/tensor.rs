//! Dense n-mode tensors in generalized column-major layout (mode 0 varies
//! fastest), with the unfolding convention where the columns of the mode-k
//! unfolding enumerate the remaining modes in increasing order, lowest first.
//!
//! All indices in this module are zero-based.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Tensor dimensions `(d₀, …, d_{n-1})`, each at least one.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Shape {
    dims: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl Shape {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.is_empty() {
            return Err(Error::Shape("a tensor needs at least one mode".into()));
        }
        if let Some(m) = dims.iter().position(|&d| d == 0) {
            return Err(Error::Shape(format!("mode {m} has zero extent")));
        }
        let mut strides = Vec::with_capacity(dims.len());
        let mut len: usize = 1;
        for &d in &dims {
            strides.push(len);
            len = len
                .checked_mul(d)
                .ok_or_else(|| Error::Shape(format!("element count of {dims:?} overflows")))?;
        }
        Ok(Self { dims, strides, len })
    }

    #[inline]
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    #[inline]
    pub fn dim(&self, mode: usize) -> usize {
        self.dims[mode]
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.dims.len()
    }

    /// Offset step for each mode.
    #[inline]
    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Total element count `∏ dᵢ`.
    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    /// Never true: every mode has positive extent.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn check_mode(&self, mode: usize) -> Result<()> {
        if mode < self.order() {
            Ok(())
        } else {
            Err(Error::Mode {
                mode,
                order: self.order(),
            })
        }
    }

    /// Number of columns of the mode-`mode` unfolding, `∏_{j≠mode} dⱼ`.
    pub fn fiber_count(&self, mode: usize) -> usize {
        self.len / self.dims[mode]
    }

    /// Returns the same shape with `dims[mode]` replaced.
    pub fn with_dim(&self, mode: usize, extent: usize) -> Result<Shape> {
        let mut dims = self.dims.clone();
        dims[mode] = extent;
        Shape::new(dims)
    }

    /// Offset of a multi-index: `Σ_m idx_m · ∏_{l<m} d_l`.
    pub fn linear_offset(&self, idx: &[usize]) -> Result<usize> {
        if idx.len() != self.order() {
            return Err(Error::Shape(format!(
                "multi-index of length {} for a tensor of order {}",
                idx.len(),
                self.order()
            )));
        }
        let mut offset = 0;
        for (mode, (&i, (&d, &s))) in idx
            .iter()
            .zip(self.dims.iter().zip(&self.strides))
            .enumerate()
        {
            if i >= d {
                return Err(Error::Bounds {
                    mode,
                    index: i,
                    extent: d,
                });
            }
            offset += i * s;
        }
        Ok(offset)
    }

    /// Inverse of [`Shape::linear_offset`].
    pub fn multi_index(&self, mut offset: usize) -> Result<Vec<usize>> {
        if offset >= self.len {
            return Err(Error::Bounds {
                mode: 0,
                index: offset,
                extent: self.len,
            });
        }
        Ok(self
            .dims
            .iter()
            .map(|&d| {
                let i = offset % d;
                offset /= d;
                i
            })
            .collect())
    }

    /// Decodes column `column` of the mode-`mode` unfolding into the indices of
    /// the other modes, listed in increasing mode order.
    pub fn fiber_column_multiindex(&self, mode: usize, column: usize) -> Result<Vec<usize>> {
        self.check_mode(mode)?;
        let count = self.fiber_count(mode);
        if column >= count {
            return Err(Error::Bounds {
                mode,
                index: column,
                extent: count,
            });
        }
        let mut rest = column;
        Ok(self
            .dims
            .iter()
            .enumerate()
            .filter(|&(m, _)| m != mode)
            .map(|(_, &d)| {
                let i = rest % d;
                rest /= d;
                i
            })
            .collect())
    }

    /// Inverse of [`Shape::fiber_column_multiindex`].
    pub fn fiber_column_index(&self, mode: usize, others: &[usize]) -> Result<usize> {
        self.check_mode(mode)?;
        if others.len() + 1 != self.order() {
            return Err(Error::Shape(format!(
                "{} indices given for the {} non-fiber modes",
                others.len(),
                self.order() - 1
            )));
        }
        let mut column = 0;
        let mut step = 1;
        for ((m, &d), &i) in self
            .dims
            .iter()
            .enumerate()
            .filter(|&(m, _)| m != mode)
            .zip(others)
        {
            if i >= d {
                return Err(Error::Bounds {
                    mode: m,
                    index: i,
                    extent: d,
                });
            }
            column += i * step;
            step *= d;
        }
        Ok(column)
    }

    /// Offset of the first element of fiber `column` of the mode-`mode` unfolding.
    /// Successive fiber elements are `strides()[mode]` apart.
    pub(crate) fn fiber_base_offset(&self, mode: usize, column: usize) -> usize {
        let left = self.strides[mode];
        let a = column % left;
        let b = column / left;
        a + b * left * self.dims[mode]
    }
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Shape{:?}", self.dims)
    }
}

/// Per-mode sorted, duplicate-free, nonempty index sets selecting a subtensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSets {
    sets: Vec<Vec<usize>>,
}

impl IndexSets {
    pub fn new(sets: Vec<Vec<usize>>) -> Result<Self> {
        for (mode, set) in sets.iter().enumerate() {
            if set.is_empty() {
                return Err(Error::Shape(format!("index set for mode {mode} is empty")));
            }
            if set.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Shape(format!(
                    "index set for mode {mode} is not strictly increasing"
                )));
            }
        }
        Ok(Self { sets })
    }

    /// Every index of every mode.
    pub fn full(shape: &Shape) -> Self {
        Self {
            sets: shape.dims().iter().map(|&d| (0..d).collect()).collect(),
        }
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn mode(&self, mode: usize) -> &[usize] {
        &self.sets[mode]
    }

    pub fn order(&self) -> usize {
        self.sets.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.sets.iter().map(Vec::len).collect()
    }

    pub fn shape(&self) -> Shape {
        Shape::new(self.sizes()).expect("index sets are nonempty")
    }

    pub fn check(&self, shape: &Shape) -> Result<()> {
        if self.order() != shape.order() {
            return Err(Error::Shape(format!(
                "{} index sets for a tensor of order {}",
                self.order(),
                shape.order()
            )));
        }
        for (mode, (set, &d)) in self.sets.iter().zip(shape.dims()).enumerate() {
            if let Some(&last) = set.last() {
                if last >= d {
                    return Err(Error::Bounds {
                        mode,
                        index: last,
                        extent: d,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Calls `f` with the linear offset of every element of the selection, in the
/// selection's own mode-0-fastest order.
pub(crate) fn for_each_selected_offset(shape: &Shape, sel: &IndexSets, mut f: impl FnMut(usize)) {
    let n = shape.order();
    let contrib: Vec<Vec<usize>> = sel
        .sets()
        .iter()
        .zip(shape.strides())
        .map(|(set, &s)| set.iter().map(|&i| i * s).collect())
        .collect();
    let sizes = sel.sizes();
    let mut counter = vec![0usize; n];
    let mut partial = vec![0usize; n + 1];
    // partial[m] = Σ_{l≥m} contrib of the current counter, excluding mode 0's.
    loop {
        for m in (1..n).rev() {
            partial[m] = partial[m + 1] + contrib[m][counter[m]];
        }
        let base = if n > 1 { partial[1] } else { 0 };
        for &c0 in &contrib[0] {
            f(base + c0);
        }
        let mut m = 1;
        loop {
            if m >= n {
                return;
            }
            counter[m] += 1;
            if counter[m] < sizes[m] {
                break;
            }
            counter[m] = 0;
            m += 1;
        }
    }
}

/// n-mode real array with data stored mode-0 fastest.
#[derive(Clone, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn zeros(shape: Shape) -> Self {
        let data = vec![0.0; shape.len()];
        Self { shape, data }
    }

    pub fn from_vec(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::Shape(format!(
                "{} values supplied for shape {:?}",
                data.len(),
                shape.dims()
            )));
        }
        Ok(Self { shape, data })
    }

    /// Builds a tensor by evaluating `f` at every multi-index, in layout order.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let n = shape.order();
        let mut idx = vec![0usize; n];
        let mut data = Vec::with_capacity(shape.len());
        for _ in 0..shape.len() {
            data.push(f(&idx));
            for m in 0..n {
                idx[m] += 1;
                if idx[m] < shape.dim(m) {
                    break;
                }
                idx[m] = 0;
            }
        }
        Self { shape, data }
    }

    #[inline]
    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    #[inline]
    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.shape.order()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, idx: &[usize]) -> Result<f64> {
        Ok(self.data[self.shape.linear_offset(idx)?])
    }

    pub fn set(&mut self, idx: &[usize], value: f64) -> Result<()> {
        let off = self.shape.linear_offset(idx)?;
        self.data[off] = value;
        Ok(())
    }

    /// Reinterprets the data under a new shape with the same element count.
    pub fn reshape(self, shape: Shape) -> Result<Self> {
        Self::from_vec(shape, self.data)
    }

    /// Mode-`mode` unfolding: a `d_mode × ∏_{j≠mode} dⱼ` matrix whose columns are
    /// the mode-`mode` fibers.
    pub fn unfold(&self, mode: usize) -> Result<Matrix> {
        self.shape.check_mode(mode)?;
        let d = self.shape.dim(mode);
        let left = self.shape.strides()[mode];
        let right = self.shape.len() / (left * d);
        let cols = left * right;
        let mut out = vec![0.0; self.len()];
        for b in 0..right {
            for s in 0..d {
                let src = &self.data[left * (s + d * b)..left * (s + d * b + 1)];
                for (a, &v) in src.iter().enumerate() {
                    out[s + d * (a + left * b)] = v;
                }
            }
        }
        Matrix::from_col_major(d, cols, out)
    }

    /// Inverse of [`DenseTensor::unfold`].
    pub fn fold(m: &Matrix, mode: usize, shape: &Shape) -> Result<Self> {
        shape.check_mode(mode)?;
        let d = shape.dim(mode);
        if m.rows() != d || m.cols() != shape.fiber_count(mode) {
            return Err(Error::Shape(format!(
                "a {}x{} matrix cannot fold into mode {mode} of {:?}",
                m.rows(),
                m.cols(),
                shape.dims()
            )));
        }
        let left = shape.strides()[mode];
        let right = shape.len() / (left * d);
        let src = m.as_slice();
        let mut data = vec![0.0; shape.len()];
        for b in 0..right {
            for s in 0..d {
                let dst = &mut data[left * (s + d * b)..left * (s + d * b + 1)];
                for (a, v) in dst.iter_mut().enumerate() {
                    *v = src[s + d * (a + left * b)];
                }
            }
        }
        Ok(Self {
            shape: shape.clone(),
            data,
        })
    }

    /// `self ×_mode a` for `a` of size `J × d_mode`; the result has `J` in place
    /// of `d_mode`.
    pub fn mode_product(&self, a: &Matrix, mode: usize) -> Result<Self> {
        self.shape.check_mode(mode)?;
        let d = self.shape.dim(mode);
        if a.cols() != d {
            return Err(Error::Shape(format!(
                "a {}x{} matrix cannot act on mode {mode} of extent {d}",
                a.rows(),
                a.cols()
            )));
        }
        let j_out = a.rows();
        let shape = self.shape.with_dim(mode, j_out)?;
        let left = self.shape.strides()[mode];
        let right = self.shape.len() / (left * d);
        let mut out = vec![0.0; shape.len()];
        let coef = a.as_slice();
        for b in 0..right {
            for s in 0..d {
                let src = &self.data[left * (s + d * b)..left * (s + d * b + 1)];
                for j in 0..j_out {
                    let c = coef[j + j_out * s];
                    if c == 0.0 {
                        continue;
                    }
                    let dst = &mut out[left * (j + j_out * b)..left * (j + j_out * b + 1)];
                    for (o, &x) in dst.iter_mut().zip(src) {
                        *o += c * x;
                    }
                }
            }
        }
        Ok(Self { shape, data: out })
    }

    /// Applies `factors[m]` along every mode `m`, in increasing mode order.
    pub fn multi_mode_product(&self, factors: &[Matrix]) -> Result<Self> {
        if factors.len() != self.order() {
            return Err(Error::Shape(format!(
                "{} factors for a tensor of order {}",
                factors.len(),
                self.order()
            )));
        }
        let mut out = self.clone();
        for (mode, f) in factors.iter().enumerate() {
            out = out.mode_product(f, mode)?;
        }
        Ok(out)
    }

    /// Subtensor `T(I₀, …, I_{n-1})`.
    pub fn subtensor(&self, sel: &IndexSets) -> Result<Self> {
        sel.check(&self.shape)?;
        let mut data = Vec::with_capacity(sel.sizes().iter().product());
        for_each_selected_offset(&self.shape, sel, |off| data.push(self.data[off]));
        Ok(Self {
            shape: sel.shape(),
            data,
        })
    }

    /// Columns `columns` of the mode-`mode` unfolding, gathered straight from
    /// storage.
    pub fn fibers(&self, mode: usize, columns: &[usize]) -> Result<Matrix> {
        self.shape.check_mode(mode)?;
        let d = self.shape.dim(mode);
        let count = self.shape.fiber_count(mode);
        let stride = self.shape.strides()[mode];
        let mut out = Vec::with_capacity(d * columns.len());
        for &c in columns {
            if c >= count {
                return Err(Error::Bounds {
                    mode,
                    index: c,
                    extent: count,
                });
            }
            let base = self.shape.fiber_base_offset(mode, c);
            out.extend((0..d).map(|s| self.data[base + s * stride]));
        }
        Matrix::from_col_major(d, columns.len(), out)
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn inf_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip_with(&self, rhs: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape != rhs.shape {
            return Err(Error::Shape(format!(
                "{:?} and {:?} differ",
                self.dims(),
                rhs.dims()
            )));
        }
        Ok(Self {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, |a, b| a - b)
    }

    /// `‖self − rhs‖_F / ‖rhs‖_F`.
    pub fn relative_error(&self, reference: &Self) -> Result<f64> {
        let diff = self.sub(reference)?.fro_norm();
        let base = reference.fro_norm();
        Ok(if base == 0.0 {
            if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            diff / base
        })
    }

    pub fn nonzero_count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0.0).count()
    }
}

impl fmt::Debug for DenseTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DenseTensor")
            .field("dims", &self.dims())
            .field("fro_norm", &self.fro_norm())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube() -> DenseTensor {
        let shape = Shape::new([2, 2, 2]).unwrap();
        DenseTensor::from_vec(shape, (1..=8).map(f64::from).collect()).unwrap()
    }

    #[test]
    fn shape_rejects_degenerate() {
        assert!(Shape::new(Vec::<usize>::new()).is_err());
        assert!(Shape::new([3, 0]).is_err());
        assert!(Shape::new([usize::MAX, 2]).is_err());
    }

    #[test]
    fn offsets() {
        let s = Shape::new([2, 2, 2]).unwrap();
        assert_eq!(s.linear_offset(&[0, 0, 0]).unwrap(), 0);
        assert_eq!(s.linear_offset(&[1, 1, 1]).unwrap(), 7);
        let s = Shape::new([3, 4, 5]).unwrap();
        assert_eq!(s.linear_offset(&[1, 2, 3]).unwrap(), 43);
        assert!(matches!(
            s.linear_offset(&[3, 0, 0]),
            Err(Error::Bounds { mode: 0, .. })
        ));
        assert_eq!(s.multi_index(43).unwrap(), vec![1, 2, 3]);
    }

    #[test]
    fn unfold_examples() {
        let t = cube();
        let m1 = t.unfold(0).unwrap();
        assert_eq!(
            m1,
            Matrix::from_rows(&[vec![1.0, 3.0, 5.0, 7.0], vec![2.0, 4.0, 6.0, 8.0]])
        );
        let m3 = t.unfold(2).unwrap();
        assert_eq!(
            m3,
            Matrix::from_rows(&[vec![1.0, 2.0, 3.0, 4.0], vec![5.0, 6.0, 7.0, 8.0]])
        );
        assert!(matches!(t.unfold(3), Err(Error::Mode { mode: 3, order: 3 })));

        let v = DenseTensor::from_vec(Shape::new([3]).unwrap(), vec![1.0, 2.0, 3.0]).unwrap();
        let m = v.unfold(0).unwrap();
        assert_eq!((m.rows(), m.cols()), (3, 1));
        assert_eq!(m.as_slice(), v.data());
    }

    #[test]
    fn fold_examples() {
        let t = cube();
        let m = t.unfold(1).unwrap();
        assert_eq!(DenseTensor::fold(&m, 1, t.shape()).unwrap(), t);
        let m1 = Matrix::from_rows(&[vec![1.0, 3.0, 5.0, 7.0], vec![2.0, 4.0, 6.0, 8.0]]);
        assert_eq!(DenseTensor::fold(&m1, 0, t.shape()).unwrap(), t);
        let bad = Matrix::zeros(2, 3);
        assert!(matches!(
            DenseTensor::fold(&bad, 0, t.shape()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn mode_product_examples() {
        let t = cube();
        assert_eq!(t.mode_product(&Matrix::identity(2), 1).unwrap(), t);
        let a = Matrix::from_rows(&[vec![1.0, 1.0]]);
        let p = t.mode_product(&a, 0).unwrap();
        assert_eq!(p.dims(), &[1, 2, 2]);
        assert_eq!(p.data(), &[3.0, 7.0, 11.0, 15.0]);
        assert!(t.mode_product(&Matrix::zeros(2, 3), 0).is_err());
    }

    #[test]
    fn subtensor_examples() {
        let t = cube();
        assert_eq!(t.subtensor(&IndexSets::full(t.shape())).unwrap(), t);
        let one = IndexSets::new(vec![vec![1], vec![1], vec![1]]).unwrap();
        assert_eq!(t.subtensor(&one).unwrap().data(), &[8.0]);
        let sel = IndexSets::new(vec![vec![0, 1], vec![1], vec![0, 1]]).unwrap();
        assert_eq!(t.subtensor(&sel).unwrap().data(), &[3.0, 4.0, 7.0, 8.0]);
        let out = IndexSets::new(vec![vec![0], vec![2], vec![0]]).unwrap();
        assert!(matches!(t.subtensor(&out), Err(Error::Bounds { .. })));
        assert!(IndexSets::new(vec![vec![1, 0]]).is_err());
        assert!(IndexSets::new(vec![vec![]]).is_err());
    }

    #[test]
    fn fiber_column_decoding() {
        let s = Shape::new([2, 2, 2]).unwrap();
        assert_eq!(s.fiber_column_multiindex(0, 0).unwrap(), vec![0, 0]);
        assert_eq!(s.fiber_column_multiindex(0, 2).unwrap(), vec![0, 1]);
        let s = Shape::new([3, 4, 5]).unwrap();
        assert_eq!(s.fiber_column_multiindex(1, 14).unwrap(), vec![2, 4]);
        assert!(s.fiber_column_multiindex(1, 15).is_err());
        for j in 0..15 {
            let others = s.fiber_column_multiindex(1, j).unwrap();
            assert_eq!(s.fiber_column_index(1, &others).unwrap(), j);
        }
    }

    #[test]
    fn fibers_match_unfolding_columns() {
        let s = Shape::new([3, 4, 5]).unwrap();
        let t = DenseTensor::from_fn(s, |i| (i[0] * 100 + i[1] * 10 + i[2]) as f64);
        for mode in 0..3 {
            let u = t.unfold(mode).unwrap();
            let cols: Vec<usize> = (0..u.cols()).step_by(3).collect();
            assert_eq!(t.fibers(mode, &cols).unwrap(), u.select_cols(&cols));
        }
    }

    #[test]
    fn norms() {
        let z = DenseTensor::zeros(Shape::new([2, 3]).unwrap());
        assert_eq!(z.fro_norm(), 0.0);
        assert_eq!(z.inf_norm(), 0.0);
        let t = cube();
        assert!((t.fro_norm() - 204f64.sqrt()).abs() < 1e-14);
        assert_eq!(t.inf_norm(), 8.0);
        assert!((t.scale(-3.0).fro_norm() - 3.0 * t.fro_norm()).abs() < 1e-12);
    }
}
