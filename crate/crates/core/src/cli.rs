//! `palquant` command line: BitOps tables, accelerator simulation, the
//! property suites and two small arithmetic demos.
//!
//! Exit codes: 0 success, 1 verification or runtime failure, 2 usage error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::bitdecomp::{
    best_single_group_residual, decomposed_matmul, fit_parallel_weights, solution_similarity,
    split_limbs, LimbSet,
};
use crate::hwsim::{compare, simulate, AcceleratorConfig, ExecutionMode, SimError};
use crate::matrix::Matrix;
use crate::netmodel::{
    annotate_uniform, bitops, build_network, load_spec, palquant_transform, Arch, NetError,
    NetworkSpec,
};
use crate::quantizer::{max_code, CodeTensor, MAX_BITS};
use crate::verify::{self, Suite};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or values; exit code 2.
    Usage(String),
    /// A failed check or a runtime error; exit code 1.
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failure(m) => f.write_str(m.trim_end()),
        }
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        match e {
            NetError::Bits(_) | NetError::GroupCount(_) | NetError::UnknownArch(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Failure(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::UnknownPreset { .. } | SimError::Config(_) | SimError::Io(_) => {
                CliError::Usage(e.to_string())
            }
            SimError::Net(n) => n.into(),
            other => CliError::Failure(other.to_string()),
        }
    }
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Failure(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "palquant", version, about = "Parallel low-precision quantization toolkit")]
struct Cli {
    /// Output format on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Also write the machine-readable report to this file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeKind {
    Uniform,
    Palquant,
}

#[derive(Debug, Args)]
struct SchemeArgs {
    /// Quantization scheme; without it the network keeps 32-bit layers.
    #[arg(long, value_enum)]
    scheme: Option<SchemeKind>,
    /// Activation bits (uniform).
    #[arg(long, default_value_t = 4)]
    ba: u32,
    /// Weight bits (uniform).
    #[arg(long, default_value_t = 4)]
    bw: u32,
    /// Limb bits (palquant).
    #[arg(long = "B", default_value_t = 2)]
    limb_bits: u32,
    /// Group count (palquant).
    #[arg(long = "G", default_value_t = 2)]
    groups: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-layer BitOps and the network total.
    Bitops {
        /// resnet18, resnet34, plain18, or a network JSON file.
        #[arg(long)]
        net: String,
        #[command(flatten)]
        scheme: SchemeArgs,
    },
    /// Simulate a network and a baseline on one accelerator and compare.
    Simulate {
        #[arg(long)]
        net: String,
        #[command(flatten)]
        scheme: SchemeArgs,
        /// Preset name or accelerator JSON file.
        #[arg(long, default_value = "bitfusion-like")]
        accel: String,
        /// Baseline scheme as `uniform:A,W` or `palquant:B,G`.
        #[arg(long, default_value = "uniform:4,4")]
        baseline: String,
    },
    /// Run the seeded property suites.
    Verify {
        /// all, quantizer, decomp, shuffle, netmodel or hwsim.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Step through one limb-decomposed product.
    Decompose {
        #[arg(long = "M")]
        total_bits: u32,
        #[arg(long = "B")]
        limb_bits: u32,
        #[arg(long)]
        x: u64,
        #[arg(long)]
        w: u64,
    },
    /// Fit the parallel low-precision approximation to a random product.
    Fit {
        #[arg(long = "N", default_value_t = 64)]
        rows: usize,
        #[arg(long = "S", default_value_t = 8)]
        inner: usize,
        #[arg(long = "T", default_value_t = 4)]
        cols: usize,
        #[arg(long = "M", default_value_t = 4)]
        total_bits: u32,
        #[arg(long = "B", default_value_t = 2)]
        limb_bits: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// What a subcommand produced.
struct Output {
    text: String,
    json: serde_json::Value,
    failed: bool,
}

fn load_net(net: &str) -> Result<NetworkSpec, CliError> {
    match net.parse::<Arch>() {
        Ok(arch) => Ok(build_network(arch)),
        Err(_) if std::path::Path::new(net).is_file() => Ok(load_spec(net)?),
        Err(e) => Err(CliError::Usage(format!("{e}; no such network file either"))),
    }
}

fn apply(base: NetworkSpec, s: &SchemeArgs) -> Result<NetworkSpec, CliError> {
    Ok(match s.scheme {
        None => base,
        Some(SchemeKind::Uniform) => annotate_uniform(&base, s.ba, s.bw)?,
        Some(SchemeKind::Palquant) => palquant_transform(&base, s.limb_bits, s.groups)?,
    })
}

fn mode_for(spec: &NetworkSpec, accel: &AcceleratorConfig) -> Result<ExecutionMode, CliError> {
    ExecutionMode::for_scheme(spec.scheme, accel.native_bits).map_err(|_| {
        CliError::Usage(format!(
            "network {} is {}; simulation needs a uniform or palquant scheme",
            spec.name, spec.scheme
        ))
    })
}

fn cmd_bitops(net: &str, scheme: &SchemeArgs) -> Result<Output, CliError> {
    let spec = apply(load_net(net)?, scheme)?;
    let report = bitops(&spec)?;
    Ok(Output {
        text: report.to_table(),
        json: serde_json::to_value(&report).expect("report serializes"),
        failed: false,
    })
}

fn cmd_simulate(net: &str, scheme: &SchemeArgs, accel: &str, baseline: &str) -> Result<Output, CliError> {
    let base = load_net(net)?;
    let accel = AcceleratorConfig::resolve(accel)?;
    let proposed_spec = apply(base.clone(), scheme)?;
    let baseline_spec = verify::apply_scheme(&base, baseline).map_err(CliError::Usage)?;
    let b = simulate(&baseline_spec, &accel, mode_for(&baseline_spec, &accel)?)?;
    let p = simulate(&proposed_spec, &accel, mode_for(&proposed_spec, &accel)?)?;
    let c = compare(&b, &p)?;
    let mut text = b.to_table();
    text.push('\n');
    text.push_str(&p.to_table());
    let _ = writeln!(
        text,
        "\nspeedup {:.2}x, energy efficiency {:.2}x (DRAM energy share {:.2} -> {:.2})",
        c.speedup, c.energy_efficiency, c.baseline_dram_share, c.proposed_dram_share
    );
    Ok(Output {
        text,
        json: json!({ "baseline": b, "proposed": p, "comparison": c }),
        failed: false,
    })
}

fn cmd_verify(suite: &str, seed: u64) -> Result<Output, CliError> {
    let results = if suite == "all" {
        verify::run_all(seed)
    } else {
        let s: Suite = suite.parse().map_err(|e: String| {
            CliError::Usage(format!("{e} (expected all, quantizer, decomp, shuffle, netmodel or hwsim)"))
        })?;
        verify::run_suite(s, seed)
    };
    Ok(Output {
        text: verify::render(&results),
        failed: results.iter().any(|r| !r.passed()),
        json: json!({ "seed": seed, "results": results }),
    })
}

fn cmd_decompose(m: u32, b: u32, x: u64, w: u64) -> Result<Output, CliError> {
    if m == 0 || m > MAX_BITS || b == 0 {
        return Err(CliError::Usage(format!("need 1 <= M <= {MAX_BITS} and B >= 1")));
    }
    for (name, v) in [("x", x), ("w", w)] {
        if v > max_code(m) {
            return Err(CliError::Usage(format!("{name} = {v} does not fit in {m} bits (max {})", max_code(m))));
        }
    }
    let usage = |e: crate::bitdecomp::DecompError| CliError::Usage(e.to_string());
    let xl = split_limbs(x, m, b).map_err(usage)?;
    let wl = split_limbs(w, m, b).map_err(usage)?;
    let mut text = String::new();
    let _ = writeln!(text, "M={m} B={b}: {} limbs per operand, least significant first", xl.len());
    let _ = writeln!(text, "x = {x} -> {xl:?}");
    let _ = writeln!(text, "w = {w} -> {wl:?}");
    let mut sum = 0u64;
    let mut steps = Vec::new();
    for (i, xi) in xl.iter().enumerate() {
        for (j, wj) in wl.iter().enumerate() {
            let shift = (i + j) as u32 * b;
            let partial = (xi * wj) << shift;
            sum += partial;
            let _ = writeln!(
                text,
                "x{i}*w{j} = {xi}*{wj} = {} << {shift} = {partial:<6} sum {sum}",
                xi * wj
            );
            steps.push(json!({ "i": i, "j": j, "product": xi * wj, "shift": shift, "shifted": partial, "sum": sum }));
        }
    }
    let cx = CodeTensor::new(vec![1, 1], vec![x], m).map_err(|e| CliError::Usage(e.to_string()))?;
    let cw = CodeTensor::new(vec![1, 1], vec![w], m).map_err(|e| CliError::Usage(e.to_string()))?;
    let via_matmul = decomposed_matmul(&cx, &cw, b).map_err(usage)?.product.get(0, 0);
    let direct = x * w;
    let ok = sum == direct && via_matmul == direct;
    let _ = writeln!(text, "{sum} == {direct} {}", if ok { "OK" } else { "MISMATCH" });
    Ok(Output {
        text,
        json: json!({ "M": m, "B": b, "x": x, "w": w, "x_limbs": xl, "w_limbs": wl, "steps": steps, "sum": sum, "direct": direct, "ok": ok }),
        failed: !ok,
    })
}

fn cmd_fit(n: usize, s: usize, t: usize, m: u32, b: u32, seed: u64) -> Result<Output, CliError> {
    if n == 0 || s == 0 || t == 0 {
        return Err(CliError::Usage("N, S and T must be positive".into()));
    }
    if m == 0 || m > MAX_BITS || b == 0 {
        return Err(CliError::Usage(format!("need 1 <= M <= {MAX_BITS} and B >= 1")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut codes = |len: usize| -> Vec<u64> { (0..len).map(|_| rng.random_range(0..=max_code(m))).collect() };
    let x = CodeTensor::new(vec![n, s], codes(n * s), m).map_err(|e| CliError::Usage(e.to_string()))?;
    let w = codes(t * s);
    let target = Matrix::from_fn(n, t, |r, c| {
        (0..s).map(|k| (x.codes()[r * s + k] * w[c * s + k]) as f64).sum()
    });
    let set = LimbSet::split(&x, b).map_err(|e| CliError::Usage(e.to_string()))?;
    let limbs: Vec<Matrix<f64>> = (0..set.group_count())
        .map(|i| set.limb_matrix(i))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Failure(e.to_string()))?;
    let fit = fit_parallel_weights(&limbs, &target, b).map_err(|e| CliError::Failure(e.to_string()))?;
    let single = best_single_group_residual(&limbs, &target, b).map_err(|e| CliError::Failure(e.to_string()))?;
    let sim = solution_similarity(&fit);
    let g = limbs.len();
    let mut text = String::new();
    let _ = writeln!(text, "N={n} S={s} T={t} M={m} B={b} seed={seed}: G={g}");
    let _ = writeln!(text, "residual {:.6e} (relative {:.6e})", fit.residual, fit.relative_residual);
    let _ = writeln!(text, "best single-limb residual {single:.6e}");
    if let Some(r) = fit.ridge {
        let _ = writeln!(text, "normal equations were singular; ridge {r:.3e}");
    }
    let _ = writeln!(text, "similarity of scaled per-limb solutions:");
    for a in 0..g {
        let row: Vec<String> = (0..g).map(|c| format!("{:>7.4}", sim.matrix.get(a, c))).collect();
        let _ = writeln!(text, "  {}", row.join(" "));
    }
    Ok(Output {
        text,
        json: json!({
            "N": n, "S": s, "T": t, "M": m, "B": b, "seed": seed, "groups": g,
            "residual": fit.residual, "relative_residual": fit.relative_residual,
            "single_group_residual": single, "ridge": fit.ridge,
            "similarity": sim.matrix, "zero_norm_groups": sim.zero_norm_groups,
        }),
        failed: false,
    })
}

/// Parse `args` (including the program name) and run, writing the report
/// to `stdout`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            write!(stdout, "{e}").map_err(io_err)?;
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.render().to_string())),
    };
    let out = match &cli.command {
        Command::Bitops { net, scheme } => cmd_bitops(net, scheme)?,
        Command::Simulate { net, scheme, accel, baseline } => cmd_simulate(net, scheme, accel, baseline)?,
        Command::Verify { suite, seed } => cmd_verify(suite, *seed)?,
        Command::Decompose { total_bits, limb_bits, x, w } => cmd_decompose(*total_bits, *limb_bits, *x, *w)?,
        Command::Fit { rows, inner, cols, total_bits, limb_bits, seed } => {
            cmd_fit(*rows, *inner, *cols, *total_bits, *limb_bits, *seed)?
        }
    };
    let pretty = serde_json::to_string_pretty(&out.json).expect("json value serializes");
    match cli.format {
        Format::Text => stdout.write_all(out.text.as_bytes()),
        Format::Json => writeln!(stdout, "{pretty}"),
    }
    .map_err(io_err)?;
    if let Some(path) = &cli.out {
        std::fs::write(path, pretty + "\n").map_err(io_err)?;
    }
    if out.failed {
        return Err(CliError::Failure("verification failed".into()));
    }
    Ok(())
}

/// Entry point of the `palquant` binary.
pub fn main() -> ExitCode {
    let mut stdout = std::io::stdout().lock();
    match run(std::env::args_os(), &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = stdout.flush();
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
