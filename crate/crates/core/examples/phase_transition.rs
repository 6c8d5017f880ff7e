//! A small corruption-rate against sampling-constant sweep.
//!
//! `cargo run --release --example phase_transition -- 60 10` runs the
//! default d=60 grid with ten trials per cell.

use rtcur::bench::{run_phase_transition, PhaseConfig};

fn main() -> rtcur::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>());
    let dim = args.next().transpose().ok().flatten().unwrap_or(40);
    let trials = args.next().transpose().ok().flatten().unwrap_or(4);

    let mut cfg = PhaseConfig::new(3);
    cfg.dim = dim;
    cfg.trials = trials;
    cfg.alphas = (1..=8).map(|i| f64::from(i) * 0.05).collect();
    let grid = run_phase_transition(&cfg)?;
    println!("successes out of {trials} at d = {dim}, r = 3");
    print!("{grid}");
    println!("α inversions per υ: {:?}", grid.alpha_inversions());
    println!("υ inversions per α: {:?}", grid.upsilon_inversions());
    Ok(())
}
