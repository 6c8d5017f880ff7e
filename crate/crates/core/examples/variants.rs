//! Fixed against resampled indices on a hard instance.

use rtcur::bench::{derive_seed, run_trial};
use rtcur::solver::{SolverConfig, Variant};
use rtcur::synth::InstanceSpec;

fn main() -> rtcur::Result<()> {
    let trials = 10;
    for alpha in [0.05, 0.10, 0.15] {
        let mut line = format!("α = {alpha:.2}:");
        for variant in [Variant::Fixed, Variant::Resample] {
            let mut ok = 0;
            let mut iters = 0;
            for t in 0..trials {
                let spec = InstanceSpec::new(3, 60, 3, alpha, derive_seed(1, &[t]));
                let cfg = SolverConfig::new(spec.ranks())
                    .upsilon(2.0)
                    .variant(variant)
                    .seed(t);
                let out = run_trial(&spec, &cfg)?;
                ok += usize::from(out.success);
                iters += out.iterations;
            }
            line += &format!(
                "  {} {ok}/{trials} (mean {} iters)",
                variant.as_str(),
                iters / trials as usize
            );
        }
        println!("{line}");
    }
    Ok(())
}
