use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tpcluster::dse::{self, Calibration, DseError, SweepPlan};
use tpcluster::kernels::{Benchmark, Dims, KernelSpec, Variant, DEFAULT_SEED};
use tpcluster::timing::{write_counters_csv, ClusterConfig};
use tpcluster::tpfloat::conformance::{self, Datapath, FaultInjected, Production, Report, VerifyOp};
use tpcluster::tpfloat::FpFormat;

const EXIT_VERIFY: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_MISSING: u8 = 3;

#[derive(Parser)]
#[command(name = "tpcluster", version, about = "Shared-FPU transprecision cluster simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one benchmark on one configuration and print per-core counters.
    Run(RunArgs),
    /// Run benchmarks over configurations and report calibrated metrics.
    Sweep(SweepArgs),
    /// Check the arithmetic library against the reference implementation.
    VerifyFp(VerifyArgs),
    /// Print a calibration file with a row per configuration and corner.
    CalibTemplate(OutArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Markdown,
}

#[derive(Args)]
struct OutArgs {
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DimArgs {
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    taps: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    support_vectors: Option<usize>,
}

impl DimArgs {
    fn any(&self) -> bool {
        [self.size, self.taps, self.dim, self.clusters, self.levels, self.iters, self.support_vectors]
            .iter()
            .any(Option::is_some)
    }

    fn apply(&self, b: Benchmark) -> Dims {
        let d = Dims::default_for(b);
        Dims {
            size: self.size.unwrap_or(d.size),
            taps: self.taps.unwrap_or(d.taps),
            dim: self.dim.unwrap_or(d.dim),
            clusters: self.clusters.unwrap_or(d.clusters),
            levels: self.levels.unwrap_or(d.levels),
            iters: self.iters.unwrap_or(d.iters),
            support_vectors: self.support_vectors.unwrap_or(d.support_vectors),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    benchmark: String,
    #[arg(long, default_value = "scalar")]
    variant: String,
    /// Configuration id such as 16c8f1p.
    #[arg(long, conflicts_with_all = ["cores", "fpus", "stages"])]
    config: Option<String>,
    #[arg(long, requires_all = ["fpus", "stages"])]
    cores: Option<usize>,
    #[arg(long, requires_all = ["cores", "stages"])]
    fpus: Option<usize>,
    #[arg(long, requires_all = ["cores", "fpus"])]
    stages: Option<u8>,
    #[command(flatten)]
    dims: DimArgs,
    /// List-schedule every core's instruction stream first.
    #[arg(long)]
    schedule: bool,
    /// Calibration CSV; implies --metrics.
    #[arg(long)]
    calib: Option<PathBuf>,
    /// Print the calibrated result row instead of per-core counters.
    #[arg(long)]
    metrics: bool,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated benchmarks; all by default.
    #[arg(long, value_delimiter = ',')]
    benchmark: Vec<String>,
    /// Comma-separated variants; all by default.
    #[arg(long, value_delimiter = ',')]
    variant: Vec<String>,
    /// Comma-separated configuration ids; the 18 canonical ones by default.
    #[arg(long, value_delimiter = ',')]
    config: Vec<String>,
    #[command(flatten)]
    dims: DimArgs,
    #[arg(long)]
    schedule: bool,
    /// Calibration CSV; the published design points by default.
    #[arg(long)]
    calib: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct VerifyArgs {
    /// Comma-separated subset of convert,add,sub,mul,fma,div,sqrt,widen.
    #[arg(long, value_delimiter = ',')]
    ops: Vec<String>,
    /// Only enumerate every 16-bit input (conversions and sqrt); skip the
    /// sampled checks.
    #[arg(long)]
    exhaustive: bool,
    /// Random cases per operation and format.
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, hide = true)]
    inject_fault: bool,
}

struct Failure(u8, String);

impl Failure {
    fn usage(msg: impl ToString) -> Self {
        Failure(EXIT_USAGE, msg.to_string())
    }
}

impl From<DseError> for Failure {
    fn from(e: DseError) -> Self {
        let code = match e {
            DseError::MissingCorner { .. } | DseError::Io(_) => EXIT_MISSING,
            DseError::Kernel(_) | DseError::Sim(_) | DseError::TcdmOverflow { .. } => EXIT_USAGE,
            _ => EXIT_MISSING,
        };
        Failure(code, e.to_string())
    }
}

fn output(out: &OutArgs) -> Result<Box<dyn Write>, Failure> {
    match &out.out {
        Some(p) => {
            let f = File::create(p).map_err(|e| Failure(EXIT_MISSING, format!("{}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn load_calibration(path: Option<&Path>) -> Result<Calibration, Failure> {
    let Some(p) = path else { return Ok(Calibration::paper()) };
    let f = File::open(p).map_err(|e| Failure(EXIT_MISSING, format!("{}: {e}", p.display())))?;
    Calibration::from_reader(f).map_err(|e| Failure(EXIT_MISSING, format!("{}: {e}", p.display())))
}

fn parse_benchmark(s: &str) -> Result<Benchmark, Failure> {
    s.parse().map_err(Failure::usage)
}

fn parse_variant(s: &str) -> Result<Variant, Failure> {
    Variant::ALL
        .into_iter()
        .find(|v| v.name() == s.to_ascii_lowercase())
        .ok_or_else(|| Failure::usage(format!("unknown variant `{s}` (scalar, f16 or bf16)")))
}

fn parse_config(s: &str) -> Result<ClusterConfig, Failure> {
    s.parse().map_err(|e| Failure::usage(format!("config `{s}`: {e}")))
}

fn cmd_run(a: RunArgs) -> Result<(), Failure> {
    let benchmark = parse_benchmark(&a.benchmark)?;
    let variant = parse_variant(&a.variant)?;
    let cfg = match (&a.config, a.cores, a.fpus, a.stages) {
        (Some(id), ..) => parse_config(id)?,
        (None, Some(c), Some(f), Some(p)) => ClusterConfig::new(c, f, p).map_err(Failure::usage)?,
        _ => return Err(Failure::usage("give --config or all of --cores, --fpus and --stages")),
    };
    let metrics = a.metrics || a.calib.is_some();
    if !metrics && matches!(a.format, Format::Markdown) {
        return Err(Failure::usage("--format markdown needs --metrics"));
    }
    let calib = if metrics { Some(load_calibration(a.calib.as_deref())?) } else { None };
    let spec = KernelSpec::new(benchmark, variant, cfg.n_cores).with_dims(a.dims.apply(benchmark)).with_seed(a.seed);
    let (build, sim) = dse::run_kernel(&spec, &cfg, a.schedule)?;
    eprintln!("{} {} {}: {} cycles, {} flops", benchmark, variant, cfg.id(), sim.elapsed_cycles, build.flops);
    let mut out = output(&a.out)?;
    let io_err = |e: io::Error| Failure(EXIT_MISSING, e.to_string());
    match calib {
        None => write_counters_csv(&mut out, &sim.per_core).map_err(|e| Failure(EXIT_MISSING, e.to_string()))?,
        Some(calib) => {
            if calib.for_config(&cfg.id()).is_empty() {
                return Err(Failure(EXIT_MISSING, format!("no calibration rows for {}", cfg.id())));
            }
            let row = dse::metric_row(&build, &sim, &cfg.id(), &calib);
            match a.format {
                Format::Csv => dse::write_csv(&mut out, &[row], false)?,
                Format::Markdown => dse::write_markdown(&mut out, &[row])?,
            }
        }
    }
    out.flush().map_err(io_err)
}

fn cmd_sweep(a: SweepArgs) -> Result<(), Failure> {
    let mut plan = SweepPlan::full();
    if !a.benchmark.is_empty() {
        plan.benchmarks = a.benchmark.iter().map(|s| parse_benchmark(s)).collect::<Result<_, _>>()?;
    }
    if !a.variant.is_empty() {
        plan.variants = a.variant.iter().map(|s| parse_variant(s)).collect::<Result<_, _>>()?;
    }
    if !a.config.is_empty() {
        plan.configs = a.config.iter().map(|s| parse_config(s)).collect::<Result<_, _>>()?;
    }
    if a.dims.any() {
        plan.dims = plan.benchmarks.iter().map(|&b| (b, a.dims.apply(b))).collect();
    }
    plan.seed = a.seed;
    plan.schedule = a.schedule;
    let calib = load_calibration(a.calib.as_deref())?;
    let rows = dse::sweep(&plan, &calib);
    let mut out = output(&a.out)?;
    match a.format {
        Format::Csv => dse::write_csv(&mut out, &rows, true)?,
        Format::Markdown => dse::write_markdown(&mut out, &rows)?,
    }
    out.flush().map_err(|e| Failure(EXIT_MISSING, e.to_string()))?;
    let failed = rows.iter().filter(|r| r.status.starts_with("error")).count();
    eprintln!("{} cells, {} failed", rows.len(), failed);
    if !rows.is_empty() && failed == rows.len() {
        return Err(Failure(EXIT_VERIFY, format!("every cell failed; first: {}", rows[0].status)));
    }
    Ok(())
}

enum Check {
    Op(VerifyOp),
    Widen,
}

fn cmd_verify(a: VerifyArgs) -> Result<(), Failure> {
    let mut checks = Vec::new();
    if a.ops.is_empty() {
        checks.extend([Check::Op(VerifyOp::Convert)]);
        checks.extend(VerifyOp::ARITH.map(Check::Op));
        checks.push(Check::Widen);
    }
    for s in &a.ops {
        checks.push(match s.as_str() {
            "widen" => Check::Widen,
            _ => Check::Op(VerifyOp::parse(s).ok_or_else(|| Failure::usage(format!("unknown op `{s}`")))?),
        });
    }
    let dp: &dyn Datapath = if a.inject_fault { &FaultInjected } else { &Production };
    let mut all = Report::default();
    println!("check,format,cases,mismatches");
    let mut line = |name: &str, fmt: FpFormat, rep: Report| {
        println!("{name},{fmt},{},{}", rep.checked, rep.mismatches);
        all = std::mem::take(&mut all).merge(rep);
    };
    for check in &checks {
        for fmt in FpFormat::ALL {
            match *check {
                Check::Op(VerifyOp::Convert) => {
                    if fmt.is_16bit() {
                        line("convert-exhaustive", fmt, conformance::check_conversions_exhaustive(dp, fmt));
                    }
                    if !a.exhaustive {
                        line("convert", fmt, conformance::check_sampled(dp, VerifyOp::Convert, fmt, a.samples, a.seed));
                    }
                }
                Check::Op(VerifyOp::Sqrt) if a.exhaustive => {
                    if fmt.is_16bit() {
                        line("sqrt-exhaustive", fmt, conformance::check_sqrt_exhaustive(dp, fmt));
                    }
                }
                Check::Op(op) if !a.exhaustive => line(op.name(), fmt, conformance::check_sampled(dp, op, fmt, a.samples, a.seed)),
                Check::Widen if !a.exhaustive && fmt.is_16bit() => {
                    line("widen", fmt, conformance::check_widening(fmt, a.samples, a.seed));
                }
                _ => {}
            }
        }
    }
    eprintln!("{} cases checked, {} mismatches", all.checked, all.mismatches);
    match all.first {
        Some(m) => Err(Failure(EXIT_VERIFY, format!("first mismatch: {m}"))),
        None => Ok(()),
    }
}

fn cmd_template(a: OutArgs) -> Result<(), Failure> {
    let mut out = output(&a)?;
    Calibration::template().write(&mut out)?;
    out.flush().map_err(|e| Failure(EXIT_MISSING, e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.cmd {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Sweep(a) => cmd_sweep(a),
        Cmd::VerifyFp(a) => cmd_verify(a),
        Cmd::CalibTemplate(a) => cmd_template(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            if code == EXIT_USAGE {
                eprintln!("run `tpcluster help` for usage");
            }
            ExitCode::from(code)
        }
    }
}
