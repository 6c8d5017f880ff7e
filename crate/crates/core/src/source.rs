//! Read access to an observed tensor. The solver only ever reads the sampled
//! subtensor and the sampled fibers, so anything that can produce individual
//! entries can be decomposed without being materialized.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::tensor::{for_each_selected_offset, DenseTensor, IndexSets, Shape};

pub trait EntrySource: Sync {
    fn shape(&self) -> &Shape;

    /// Entry at a zero-based multi-index. Callers guarantee the index is in range.
    fn entry(&self, idx: &[usize]) -> f64;

    fn gather_subtensor(&self, sel: &IndexSets) -> Result<DenseTensor> {
        let shape = self.shape();
        sel.check(shape)?;
        let mut data = Vec::with_capacity(sel.sizes().iter().product());
        let mut idx = vec![0usize; shape.order()];
        for_each_selected_offset(shape, sel, |off| {
            let mut rest = off;
            for (slot, &d) in idx.iter_mut().zip(shape.dims()) {
                *slot = rest % d;
                rest /= d;
            }
            data.push(self.entry(&idx));
        });
        DenseTensor::from_vec(sel.shape(), data)
    }

    /// Columns `columns` of the mode-`mode` unfolding.
    fn gather_fibers(&self, mode: usize, columns: &[usize]) -> Result<Matrix> {
        let shape = self.shape();
        shape.check_mode(mode)?;
        let d = shape.dim(mode);
        let count = shape.fiber_count(mode);
        let mut out = Vec::with_capacity(d * columns.len());
        let mut idx = vec![0usize; shape.order()];
        for &c in columns {
            if c >= count {
                return Err(Error::Bounds {
                    mode,
                    index: c,
                    extent: count,
                });
            }
            let others = shape.fiber_column_multiindex(mode, c)?;
            let mut it = others.into_iter();
            for (m, slot) in idx.iter_mut().enumerate() {
                if m != mode {
                    *slot = it.next().expect("one index per non-fiber mode");
                }
            }
            for s in 0..d {
                idx[mode] = s;
                out.push(self.entry(&idx));
            }
        }
        Matrix::from_col_major(d, columns.len(), out)
    }
}

impl EntrySource for DenseTensor {
    fn shape(&self) -> &Shape {
        DenseTensor::shape(self)
    }

    fn entry(&self, idx: &[usize]) -> f64 {
        let off: usize = idx
            .iter()
            .zip(DenseTensor::shape(self).strides())
            .map(|(i, s)| i * s)
            .sum();
        self.data()[off]
    }

    fn gather_subtensor(&self, sel: &IndexSets) -> Result<DenseTensor> {
        self.subtensor(sel)
    }

    fn gather_fibers(&self, mode: usize, columns: &[usize]) -> Result<Matrix> {
        self.fibers(mode, columns)
    }
}
