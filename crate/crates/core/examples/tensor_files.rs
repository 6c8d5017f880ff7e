//! Writing and reading the binary tensor format and the CSV tables.

use rtcur::io::{read_csv, read_header, read_tensor, write_csv, write_tensor, ErrorHistoryRow};
use rtcur::solver::{rtcur, SolverConfig};
use rtcur::synth::{Instance, InstanceSpec};

fn main() -> rtcur::Result<()> {
    let dir = std::env::temp_dir().join("rtcur-tensor-files");
    std::fs::create_dir_all(&dir)?;

    let spec = InstanceSpec::new(3, 30, 2, 0.1, 3);
    let x = Instance::generate(&spec)?.observed_dense()?;
    let path = dir.join("X.tnsr");
    write_tensor(&path, &x)?;
    println!(
        "{}: header {:?}, {} bytes",
        path.display(),
        read_header(&path)?.dims(),
        std::fs::metadata(&path)?.len()
    );
    let back = read_tensor(&path)?;
    println!("round trip bit-exact: {}", back == x);

    let res = rtcur(&back, &SolverConfig::new(spec.ranks()))?;
    let rows: Vec<ErrorHistoryRow> = res
        .error_history
        .iter()
        .zip(&res.zeta_history)
        .enumerate()
        .map(|(k, (&error, &zeta))| ErrorHistoryRow {
            iteration: k + 1,
            error,
            zeta,
            rank_deficient: res.diagnostics[k].iter().any(|&f| f),
        })
        .collect();
    let csv = dir.join("error_history.csv");
    write_csv(&csv, &rows)?;
    let parsed: Vec<ErrorHistoryRow> = read_csv(&csv)?;
    println!("{} history rows written and parsed back: {}", parsed.len(), parsed == rows);

    let truncated = dir.join("truncated.tnsr");
    let bytes = std::fs::read(&path)?;
    std::fs::write(&truncated, &bytes[..bytes.len() / 2])?;
    println!("truncated file: {}", read_tensor(&truncated).unwrap_err());
    Ok(())
}
