//! Background subtraction on a synthetic clip: a static, smoothly lit scene
//! with a small object crossing it. Frames are vectorized per color channel
//! into a (height·width) × 3 × frames tensor.

use rtcur::cli::vectorize_frames;
use rtcur::solver::{rtcur, SolverConfig};
use rtcur::tensor::{DenseTensor, Shape};

fn main() -> rtcur::Result<()> {
    let (h, w, frames) = (48, 64, 60);
    let clip = DenseTensor::from_fn(Shape::new(vec![h, w, 3, frames])?, |i| {
        let (y, x, c, f) = (i[0] as f64, i[1] as f64, i[2], i[3]);
        let light = 1.0 + 0.05 * (f as f64 * 0.2).sin();
        let scene = 60.0 + 80.0 * (y / h as f64) + 40.0 * (x / w as f64) + 15.0 * c as f64;
        let ox = (f * w) / frames;
        let object = (i[0] as isize - 20).abs() < 4 && (i[1] as isize - ox as isize).abs() < 4;
        if object {
            [230.0, 40.0, 40.0][c]
        } else {
            scene * light
        }
    });
    let x = vectorize_frames(clip.clone())?;
    println!("clip {:?} -> tensor {:?}", clip.dims(), x.dims());

    let cfg = SolverConfig::new(vec![3, 3, 3])
        .upsilon(2.0)
        .zeta0(255.0)
        .gamma(0.7)
        .seed(0);
    let res = rtcur(&x, &cfg)?;
    println!("{:?} after {} iterations", res.stop, res.iterations);

    let foreground = res.sparse_full(&x)?.reshape(clip.shape().clone())?;
    let background = res.low_rank_full()?.reshape(clip.shape().clone())?;
    let object_px = foreground.get(&[20, 0, 0, 0])?;
    let scene_px = foreground.get(&[5, 40, 1, 30])?;
    println!("foreground at the object {object_px:.1}, elsewhere {scene_px:.1}");
    println!("background at the object {:.1}", background.get(&[20, 0, 0, 0])?);
    let strong = foreground.data().iter().filter(|v| v.abs() > 5.0).count();
    println!(
        "{:.2}% of entries differ from the background by more than 5 levels",
        100.0 * strong as f64 / foreground.len() as f64
    );
    Ok(())
}
