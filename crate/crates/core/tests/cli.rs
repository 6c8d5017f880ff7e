use std::path::Path;
use std::process::Command;

use rtcur::bench::{PhaseRow, TimingRow};
use rtcur::io::{read_csv, read_tensor, ErrorHistoryRow, RunManifest};

fn rtcur(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_rtcur"))
        .args(args)
        .output()
        .expect("binary runs")
        .status
        .code()
        .expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn generate(dir: &Path, alpha: &str) -> std::path::PathBuf {
    let out = dir.join("gen");
    let code = rtcur(&["gen", "--n", "3", "--d", "24", "--r", "2", "--alpha", alpha, "--seed", "5", "--out-dir", p(&out)]);
    assert_eq!(code, 0);
    out
}

#[test]
fn gen_writes_consistent_triplet() {
    let dir = tempfile::tempdir().unwrap();
    let out = generate(dir.path(), "0.1");
    let x = read_tensor(out.join("X.tnsr")).unwrap();
    let l = read_tensor(out.join("L_true.tnsr")).unwrap();
    let s = read_tensor(out.join("S_true.tnsr")).unwrap();
    assert_eq!(x.dims(), &[24, 24, 24]);
    assert_eq!(s.nonzero_count(), 24 * 24 * 24 / 10);
    assert_eq!(x, l.add(&s).unwrap());

    let clean = generate(&dir.path().join("clean"), "0");
    assert_eq!(read_tensor(clean.join("S_true.tnsr")).unwrap().nonzero_count(), 0);
}

#[test]
fn solve_writes_components_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(dir.path(), "0.1");
    let out = dir.path().join("solve");
    let code = rtcur(&[
        "solve", "--input", p(&g.join("X.tnsr")), "--ranks", "2,2,2", "--seed", "1", "--out-dir", p(&out), "--full-output",
    ]);
    assert_eq!(code, 0);
    for f in ["core.tnsr", "fiber_0.tnsr", "fiber_2.tnsr", "intersection_1_s.tnsr", "sparse_core.tnsr", "samples.csv", "L.tnsr", "S.tnsr"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let history: Vec<ErrorHistoryRow> = read_csv(out.join("error_history.csv")).unwrap();
    let manifest = RunManifest::read(out.join("manifest.toml")).unwrap();
    assert!(manifest.result.converged);
    assert_eq!(manifest.result.iterations, history.len());
    assert_eq!(manifest.result.final_error, history.last().unwrap().error);
    assert_eq!(manifest.input.shape, vec![24, 24, 24]);
    assert_eq!(manifest.input.sha256.len(), 64);

    let l = read_tensor(out.join("L.tnsr")).unwrap();
    let truth = read_tensor(g.join("L_true.tnsr")).unwrap();
    assert!(l.relative_error(&truth).unwrap() < 1e-3);
}

#[test]
fn variants_differ_only_in_variant_and_resampling() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(dir.path(), "0.1");
    let run = |v: &str| {
        let out = dir.path().join(format!("solve_{v}"));
        rtcur(&["solve", "--input", p(&g.join("X.tnsr")), "--ranks", "2,2,2", "--variant", v, "--seed", "3", "--out-dir", p(&out)]);
        RunManifest::read(out.join("manifest.toml")).unwrap()
    };
    let f = run("f");
    let r = run("r");
    assert_eq!(f.config.variant, "f");
    assert_eq!(r.config.variant, "r");
    assert_eq!(f.result.resamples, 0);
    assert!(r.result.resamples > 0);
    let mut r_cfg = r.config.clone();
    r_cfg.variant = "f".into();
    assert_eq!(r_cfg, f.config);
    assert_eq!(f.input, r.input);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(dir.path(), "0.1");
    let x = g.join("X.tnsr");
    let out = dir.path().join("o");
    assert_eq!(rtcur(&["solve", "--input", p(&x), "--out-dir", p(&out)]), 1, "missing --ranks");
    assert_eq!(rtcur(&["solve", "--input", p(&x), "--ranks", "30,2,2", "--out-dir", p(&out)]), 1, "infeasible rank");
    assert_eq!(rtcur(&["solve", "--input", p(&x), "--ranks", "2,2", "--out-dir", p(&out)]), 1, "rank count");
    assert_eq!(rtcur(&["solve", "--input", p(&dir.path().join("none")), "--ranks", "2,2,2", "--out-dir", p(&out)]), 2);
    std::fs::write(dir.path().join("junk.tnsr"), b"not a tensor").unwrap();
    assert_eq!(rtcur(&["solve", "--input", p(&dir.path().join("junk.tnsr")), "--ranks", "2,2,2", "--out-dir", p(&out)]), 2);

    let code = rtcur(&["solve", "--input", p(&x), "--ranks", "2,2,2", "--max-iters", "2", "--out-dir", p(&out)]);
    assert_eq!(code, 3, "non-convergence");
    assert!(out.join("manifest.toml").exists(), "outputs still written");
    assert!(!RunManifest::read(out.join("manifest.toml")).unwrap().result.converged);
    assert_eq!(rtcur(&["phase", "--alphas", "1.5", "--out-dir", p(&out)]), 1, "invalid grid");
}

#[test]
fn phase_and_bench_csv_parse_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("exp");
    let code = rtcur(&["phase", "--d", "60", "--r", "3", "--alphas", "0.1", "--upsilons", "3", "--trials", "10", "--out-dir", p(&out)]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(out.join("phase.csv")).unwrap();
    assert_eq!(text, "alpha,upsilon,successes,trials\n0.1,3,10,10\n");
    let rows: Vec<PhaseRow> = read_csv(out.join("phase.csv")).unwrap();
    assert_eq!(rows[0].upsilon, 3.0);

    let code = rtcur(&["bench", "--dims", "16", "--methods", "rtcur-f", "--repeats", "1", "--r", "2", "--out-dir", p(&out)]);
    assert_eq!(code, 0);
    let rows: Vec<TimingRow> = read_csv(out.join("bench.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].std_s, 0.0);
    let text = std::fs::read_to_string(out.join("bench.csv")).unwrap();
    assert!(text.starts_with("d,method,mean_s,std_s,iters,censored\n16,rtcur-f,"));
}

#[test]
fn video_separation_keeps_frame_layout() {
    use rtcur::io::write_tensor;
    use rtcur::tensor::{DenseTensor, Shape};

    // A static gradient background with a bright block moving across frames.
    let (h, w, frames) = (8, 6, 12);
    let shape = Shape::new(vec![h, w, 3, frames]).unwrap();
    let video = DenseTensor::from_fn(shape, |i| {
        let bg = 40.0 + 10.0 * i[0] as f64 + 5.0 * i[1] as f64 + 20.0 * i[2] as f64;
        let moving = i[0] == i[3] % h && i[1] < 2;
        if moving { 250.0 } else { bg }
    });
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("video.tnsr");
    write_tensor(&input, &video).unwrap();
    let out = dir.path().join("sep");
    let code = rtcur(&["video", "--input", p(&input), "--ranks", "2,2,2", "--upsilon", "6", "--out-dir", p(&out)]);
    assert_eq!(code, 0);
    let bg = read_tensor(out.join("background.tnsr")).unwrap();
    let fg = read_tensor(out.join("foreground.tnsr")).unwrap();
    assert_eq!(bg.dims(), &[h, w, 3, frames]);
    assert_eq!(fg.dims(), &[h, w, 3, frames]);
    // The moving block lands in the foreground.
    assert!(fg.get(&[0, 0, 0, 0]).unwrap().abs() > 50.0);
    assert!(fg.get(&[5, 5, 1, 3]).unwrap().abs() < 1.0);
}
