//! Runtime against dimension for both variants and the HOSVD baseline.

use std::time::Duration;

use rtcur::bench::{run_timing, Method, TimingConfig};

fn main() -> rtcur::Result<()> {
    let mut cfg = TimingConfig::new(vec![50, 100, 150], Method::ALL.to_vec());
    cfg.repeats = 2;
    cfg.timeout = Some(Duration::from_secs(60));
    println!("{:>5} {:>9} {:>10} {:>9} {:>7}", "d", "method", "mean s", "std s", "iters");
    for row in run_timing(&cfg)? {
        println!(
            "{:>5} {:>9} {:>10.4} {:>9.4} {:>7.1}{}",
            row.d,
            row.method,
            row.mean_s,
            row.std_s,
            row.iters,
            if row.censored { " censored" } else { "" }
        );
    }
    Ok(())
}
