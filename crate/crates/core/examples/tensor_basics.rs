//! Shapes, offsets, unfoldings and mode products on a small tensor.

use rtcur::linalg::Matrix;
use rtcur::tensor::{DenseTensor, IndexSets, Shape};

fn main() -> rtcur::Result<()> {
    let shape = Shape::new(vec![3, 4, 2])?;
    let t = DenseTensor::from_fn(shape.clone(), |i| (100 * i[0] + 10 * i[1] + i[2]) as f64);

    println!("shape {:?}, strides {:?}", shape.dims(), shape.strides());
    println!("offset of (1, 2, 1) = {}", shape.linear_offset(&[1, 2, 1])?);
    println!("entry at offset 17 = {:?}", shape.multi_index(17)?);

    for mode in 0..3 {
        let u = t.unfold(mode)?;
        println!("mode-{mode} unfolding is {} x {}; first column {:?}", u.rows(), u.cols(), u.col(0));
    }
    println!(
        "column 5 of the mode-1 unfolding fixes (i0, i2) = {:?}",
        shape.fiber_column_multiindex(1, 5)?
    );

    // Summing over mode 0 with a 1 x 3 matrix of ones.
    let ones = Matrix::from_rows(&[vec![1.0; 3]]);
    let summed = t.mode_product(&ones, 0)?;
    println!("mode-0 sums have shape {:?}: {:?}", summed.dims(), summed.data());

    let sel = IndexSets::new(vec![vec![0, 2], vec![1, 3], vec![1]])?;
    println!("subtensor {:?}", t.subtensor(&sel)?.data());
    println!("‖T‖_F = {:.3}, ‖T‖∞ = {}", t.fro_norm(), t.inf_norm());
    Ok(())
}
