//! A low-multilinear-rank tensor is recovered exactly from a sampled core,
//! a few fibers per mode and their intersections.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rtcur::cur::{sample_sizes, FiberCur, SampleIndices};
use rtcur::synth::{gen_lowrank, InstanceSpec};

fn main() -> rtcur::Result<()> {
    let spec = InstanceSpec::new(3, 40, 3, 0.0, 7);
    let l = gen_lowrank(&spec)?;
    let ranks = spec.ranks();

    let (rows, cols) = sample_sizes(l.shape(), &ranks, 3.0)?;
    println!("|I| = {rows:?}, |J| = {cols:?} out of {} entries", l.len());

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let samples = SampleIndices::sample(l.shape(), &ranks, 3.0, &mut rng)?;
    let cur = FiberCur::build(&l, samples, &ranks)?;

    for (mode, u) in cur.intersections().iter().enumerate() {
        let s = &u.singular_values;
        println!("mode {mode}: intersection σ = {s:.3?}, σ_r/σ₁ = {:.2e}", s[s.len() - 1] / s[0]);
    }
    let err = cur.reconstruct_full()?.relative_error(&l)?;
    println!("full reconstruction relative error {err:.2e}");
    println!("rank deficient: {:?}", cur.rank_deficient());
    Ok(())
}
