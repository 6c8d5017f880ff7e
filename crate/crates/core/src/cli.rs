//! Command-line surface: `gen`, `solve`, `phase`, `bench` and `video`.
//!
//! Exit codes: 0 success, 1 usage, 2 data, 3 solve finished without
//! converging (outputs are still written).

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use crate::bench::{run_phase_transition, run_timing, Method, PhaseConfig, TimingConfig};
use crate::error::{Error, Result};
use crate::io::{
    file_digest, read_tensor, write_csv, write_matrix, write_tensor, write_vector, ConfigEcho,
    ErrorHistoryRow, InputRecord, OutputRecord, ResultRecord, RunManifest, SampleRow,
    TimingRecord,
};
use crate::solver::{rtcur, Sampling, SolveResult, SolverConfig, StopReason, Variant};
use crate::synth::{Instance, InstanceSpec};
use crate::tensor::{DenseTensor, Shape};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

/// Entry count above which full outputs need `--force`.
pub const FULL_OUTPUT_LIMIT: usize = 1 << 31;

#[derive(Debug, Parser)]
#[command(name = "rtcur", version, about = "Robust tensor PCA with Fiber CUR")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic low-rank plus sparse instance.
    Gen(GenArgs),
    /// Separate a tensor file into low-rank and sparse parts.
    Solve(SolveArgs),
    /// Sweep corruption rate against sampling constant.
    Phase(PhaseArgs),
    /// Time solvers against dimension.
    Bench(BenchArgs),
    /// Background/foreground separation of a vectorized video tensor.
    Video(VideoArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub r: usize,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub ranks: Vec<usize>,
    #[arg(long, default_value_t = 3.0)]
    pub upsilon: f64,
    #[arg(long, default_value_t = 0.7)]
    pub gamma: f64,
    /// Defaults to the observed ∞-norm.
    #[arg(long)]
    pub zeta0: Option<f64>,
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    #[arg(long, default_value = "f", value_parser = parse_variant)]
    pub variant: Variant,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Also write the full `L.tnsr` and `S.tnsr`.
    #[arg(long)]
    pub full_output: bool,
    /// Allow full outputs above 2³¹ entries.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct PhaseArgs {
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 60)]
    pub d: usize,
    #[arg(long, default_value_t = 3)]
    pub r: usize,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub upsilons: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value = "f", value_parser = parse_variant)]
    pub variant: Variant,
    #[arg(long, default_value_t = 0.7)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub dims: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "rtcur-f,rtcur-r,hosvd-ap", value_parser = parse_method)]
    pub methods: Vec<Method>,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    /// Per-solve budget in seconds.
    #[arg(long)]
    pub timeout: Option<f64>,
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub r: usize,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 3.0)]
    pub upsilon: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct VideoArgs {
    /// `(height, width, 3, frames)` or already `(height·width, 3, frames)`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "3,3,3")]
    pub ranks: Vec<usize>,
    #[arg(long, default_value_t = 2.0)]
    pub upsilon: f64,
    #[arg(long, default_value_t = 0.7)]
    pub gamma: f64,
    #[arg(long, default_value_t = 255.0)]
    pub zeta0: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub force: bool,
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Maps an error onto the usage/data exit codes.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Rank(_) | Error::Mode { .. } | Error::Shape(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cmd: &Command) -> Result<i32> {
    match cmd {
        Command::Gen(a) => cmd_gen(a).map(|_| EXIT_OK),
        Command::Solve(a) => cmd_solve(a),
        Command::Phase(a) => cmd_phase(a).map(|_| EXIT_OK),
        Command::Bench(a) => cmd_bench(a).map(|_| EXIT_OK),
        Command::Video(a) => cmd_video(a).map(|_| EXIT_OK),
    }
}

fn load(path: &Path) -> Result<DenseTensor> {
    read_tensor(path).map_err(|e| match e {
        Error::Io(io) => Error::Data(format!("{}: {io}", path.display())),
        other => other,
    })
}

fn prepare_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

pub fn cmd_gen(a: &GenArgs) -> Result<()> {
    let spec = InstanceSpec::new(a.n, a.d, a.r, a.alpha, a.seed);
    let inst = Instance::generate(&spec)?;
    prepare_dir(&a.out_dir)?;
    let low = inst.low_rank_dense()?;
    let sparse = inst.sparse_dense();
    let observed = low.add(&sparse)?;
    write_tensor(a.out_dir.join("X.tnsr"), &observed)?;
    write_tensor(a.out_dir.join("L_true.tnsr"), &low)?;
    write_tensor(a.out_dir.join("S_true.tnsr"), &sparse)?;
    println!(
        "wrote {} entries, {} outliers, to {}",
        observed.len(),
        inst.outliers.len(),
        a.out_dir.display()
    );
    Ok(())
}

fn check_full_output(shape: &Shape, force: bool) -> Result<()> {
    if shape.len() > FULL_OUTPUT_LIMIT && !force {
        return Err(Error::Config(format!(
            "full output of {} entries exceeds 2^31; pass --force to write it anyway",
            shape.len()
        )));
    }
    Ok(())
}

/// Writes the CUR components, sampled sparse blocks, error history and
/// manifest; returns the file names written.
fn write_solve_outputs(
    dir: &Path,
    input: &Path,
    x: &DenseTensor,
    cfg: &SolverConfig,
    res: &SolveResult,
    zeta0_source: &str,
    extra: &[(&str, &DenseTensor)],
) -> Result<Vec<String>> {
    prepare_dir(dir)?;
    let mut files = Vec::new();
    let mut put = |name: String| -> PathBuf {
        let p = dir.join(&name);
        files.push(name);
        p
    };

    write_tensor(put("core.tnsr".into()), res.cur.core())?;
    for (i, c) in res.cur.fibers().iter().enumerate() {
        write_matrix(put(format!("fiber_{i}.tnsr")), c)?;
    }
    for (i, u) in res.cur.intersections().iter().enumerate() {
        write_matrix(put(format!("intersection_{i}_u.tnsr")), &u.u)?;
        write_vector(put(format!("intersection_{i}_s.tnsr")), &u.singular_values)?;
        write_matrix(put(format!("intersection_{i}_v.tnsr")), &u.v)?;
    }
    write_tensor(put("sparse_core.tnsr".into()), &res.sparse.core)?;
    for (i, m) in res.sparse.fibers.iter().enumerate() {
        write_matrix(put(format!("sparse_fiber_{i}.tnsr")), m)?;
    }

    let samples = res.cur.samples();
    let mut sample_rows = Vec::new();
    for mode in 0..samples.order() {
        for &index in samples.rows_of(mode) {
            sample_rows.push(SampleRow { set: "I".into(), mode, index });
        }
        for &index in samples.cols(mode) {
            sample_rows.push(SampleRow { set: "J".into(), mode, index });
        }
    }
    write_csv(put("samples.csv".into()), &sample_rows)?;

    let history: Vec<ErrorHistoryRow> = res
        .error_history
        .iter()
        .zip(&res.zeta_history)
        .zip(&res.diagnostics)
        .enumerate()
        .map(|(k, ((&error, &zeta), flags))| ErrorHistoryRow {
            iteration: k + 1,
            error,
            zeta,
            rank_deficient: flags.iter().any(|&f| f),
        })
        .collect();
    write_csv(put("error_history.csv".into()), &history)?;

    for (name, t) in extra {
        write_tensor(put((*name).to_string()), t)?;
    }

    let upsilon = match cfg.sampling {
        Sampling::Constant(u) => Some(u),
        Sampling::Explicit { .. } => None,
    };
    files.push("manifest.toml".into());
    let manifest = RunManifest {
        config: ConfigEcho {
            ranks: cfg.ranks.clone(),
            epsilon: cfg.epsilon,
            zeta0: res.zeta0,
            zeta0_source: zeta0_source.into(),
            gamma: cfg.gamma,
            upsilon,
            row_sizes: samples.row_sizes(),
            col_sizes: samples.col_sizes(),
            variant: cfg.variant.as_str().into(),
            max_iters: cfg.max_iters,
            seed: cfg.seed,
        },
        input: InputRecord {
            path: input.display().to_string(),
            sha256: file_digest(input)?,
            shape: x.dims().to_vec(),
        },
        result: ResultRecord {
            converged: res.converged,
            stop: format!("{:?}", res.stop).to_lowercase(),
            iterations: res.iterations,
            final_error: res.final_error(),
            resamples: res.resamples,
            rank_deficient_iterations: res
                .diagnostics
                .iter()
                .filter(|f| f.iter().any(|&x| x))
                .count(),
        },
        timing: TimingRecord {
            total_s: res.timings.total.as_secs_f64(),
            mean_iteration_s: res.timings.mean_iteration().as_secs_f64(),
        },
        outputs: OutputRecord { files: files.clone() },
    };
    manifest.write(dir.join("manifest.toml"))?;
    Ok(files)
}

fn report(res: &SolveResult) {
    println!(
        "{} after {} iterations, final error {:e}",
        if res.converged { "converged" } else { "stopped" },
        res.iterations,
        res.final_error()
    );
    if res.any_rank_deficient() {
        eprintln!("warning: an intersection matrix was rank deficient during the solve");
    }
}

pub fn cmd_solve(a: &SolveArgs) -> Result<i32> {
    let x = load(&a.input)?;
    if a.full_output {
        check_full_output(x.shape(), a.force)?;
    }
    if a.ranks.len() != x.order() {
        return Err(Error::Config(format!(
            "{} ranks given for a tensor of order {}",
            a.ranks.len(),
            x.order()
        )));
    }
    let mut cfg = SolverConfig::new(a.ranks.clone())
        .upsilon(a.upsilon)
        .gamma(a.gamma)
        .epsilon(a.eps)
        .variant(a.variant)
        .max_iters(a.max_iters)
        .seed(a.seed);
    cfg.zeta0 = a.zeta0;
    let res = rtcur(&x, &cfg)?;
    report(&res);

    let full;
    let extra: Vec<(&str, &DenseTensor)> = if a.full_output {
        full = (res.low_rank_full()?, res.sparse_full(&x)?);
        vec![("L.tnsr", &full.0), ("S.tnsr", &full.1)]
    } else {
        Vec::new()
    };
    let source = if a.zeta0.is_some() { "flag" } else { "observed-max" };
    write_solve_outputs(&a.out_dir, &a.input, &x, &cfg, &res, source, &extra)?;
    Ok(if res.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

pub fn cmd_phase(a: &PhaseArgs) -> Result<()> {
    let mut cfg = PhaseConfig::new(a.r);
    cfg.order = a.n;
    cfg.dim = a.d;
    if let Some(alphas) = &a.alphas {
        cfg.alphas = alphas.clone();
    }
    if let Some(upsilons) = &a.upsilons {
        cfg.upsilons = upsilons.clone();
    }
    cfg.trials = a.trials;
    cfg.variant = a.variant;
    cfg.gamma = a.gamma;
    cfg.epsilon = a.eps;
    cfg.max_iters = a.max_iters;
    cfg.seed = a.seed;
    let grid = run_phase_transition(&cfg)?;
    prepare_dir(&a.out_dir)?;
    write_csv(a.out_dir.join("phase.csv"), &grid.rows())?;
    print!("{grid}");
    Ok(())
}

pub fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let mut cfg = TimingConfig::new(a.dims.clone(), a.methods.clone());
    cfg.order = a.n;
    cfg.rank = a.r;
    cfg.alpha = a.alpha;
    cfg.upsilon = a.upsilon;
    cfg.max_iters = a.max_iters;
    cfg.repeats = a.repeats;
    cfg.seed = a.seed;
    cfg.timeout = match a.timeout {
        Some(t) if t.is_finite() && t > 0.0 => Some(Duration::from_secs_f64(t)),
        Some(t) => return Err(Error::Config(format!("timeout must be positive, got {t}"))),
        None => None,
    };
    let rows = run_timing(&cfg)?;
    prepare_dir(&a.out_dir)?;
    write_csv(a.out_dir.join("bench.csv"), &rows)?;
    for r in &rows {
        println!(
            "d={:<5} {:<9} {:>10.4}s ± {:.4}  iters {:>6.1}{}",
            r.d,
            r.method,
            r.mean_s,
            r.std_s,
            r.iters,
            if r.censored { "  (censored)" } else { "" }
        );
    }
    Ok(())
}

/// `(h, w, c, f)` to `(h·w, c, f)`; the column-major data needs no moving.
pub fn vectorize_frames(t: DenseTensor) -> Result<DenseTensor> {
    match t.dims() {
        &[_, _, _] => Ok(t),
        &[h, w, c, f] => t.reshape(Shape::new(vec![h * w, c, f])?),
        dims => Err(Error::Shape(format!(
            "video tensors have 3 or 4 modes, got {dims:?}"
        ))),
    }
}

pub fn cmd_video(a: &VideoArgs) -> Result<()> {
    let original = load(&a.input)?;
    let original_shape = original.shape().clone();
    check_full_output(&original_shape, a.force)?;
    let x = vectorize_frames(original)?;
    if a.ranks.len() != 3 {
        return Err(Error::Config("video separation takes three ranks".into()));
    }
    let cfg = SolverConfig::new(a.ranks.clone())
        .upsilon(a.upsilon)
        .gamma(a.gamma)
        .zeta0(a.zeta0)
        .epsilon(a.eps)
        .max_iters(a.max_iters)
        .seed(a.seed);
    let res = rtcur(&x, &cfg)?;
    report(&res);
    if res.stop != StopReason::Converged {
        eprintln!("warning: separation did not reach the requested precision");
    }
    let background = res.low_rank_full()?.reshape(original_shape.clone())?;
    let foreground = res.sparse_full(&x)?.reshape(original_shape)?;
    write_solve_outputs(
        &a.out_dir,
        &a.input,
        &x,
        &cfg,
        &res,
        "flag",
        &[("background.tnsr", &background), ("foreground.tnsr", &foreground)],
    )?;
    Ok(())
}
