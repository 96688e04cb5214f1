use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use reset_verdict::hbeta::{self, CrossCheck};
use reset_verdict::nsv::{self, NsvError};
use reset_verdict::report::{self, sig6, DemoSummary};
use reset_verdict::sim::{self, SimError};
use reset_verdict::{
    DemoSystem, Error, FrequencyGrid, ScanSpec, Signal, SimOptions, SystemDescription, Verdict,
};

const THREADS_VAR: &str = "RESET_VERDICT_THREADS";

#[derive(Parser)]
#[command(name = "reset-verdict", version, about = "UBIBS stability verdicts for GFORE/PCI reset control loops")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify a loop from its Nyquist Stability Vector.
    Analyze {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        format: Format,
        /// Write the (omega, theta_deg) curve as CSV.
        #[arg(long, value_name = "FILE")]
        emit_angles: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Brute-force scan of the H_β condition over (β, ρ').
    HbetaScan {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        scan: ScanArgs,
        #[command(flatten)]
        format: Format,
        /// Write PREFIX.json and PREFIX.csv.
        #[arg(long, value_name = "PREFIX")]
        out: Option<PathBuf>,
    },
    /// Simulate the hybrid closed loop.
    Simulate {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 0.5, value_name = "T")]
        horizon: f64,
        /// Never reset (base linear loop).
        #[arg(long)]
        linear: bool,
        #[command(flatten)]
        format: Format,
        /// Trace output; CSV unless --json or --md is given.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Classify and scan the five benchmark loops.
    Demo {
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        scan: ScanArgs,
        #[command(flatten)]
        format: Format,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct SourceSel {
    #[arg(long, value_name = "C1..C5")]
    demo: Option<DemoSystem>,
    /// System description JSON; `-` reads stdin.
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
}

#[derive(Args)]
struct Source {
    #[command(flatten)]
    sel: SourceSel,
    /// Override the reset coefficient γ.
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    wmin: Option<f64>,
    #[arg(long)]
    wmax: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long, allow_hyphen_values = true)]
    beta_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta_max: Option<f64>,
    #[arg(long)]
    rho_max: Option<f64>,
    #[arg(long)]
    res: Option<usize>,
}

#[derive(Args)]
#[group(multiple = false)]
struct InputArgs {
    /// Unit step reference (default).
    #[arg(long)]
    step: bool,
    /// Unit-amplitude sine reference at F Hz.
    #[arg(long, value_name = "F")]
    sine: Option<f64>,
    /// Unit-slope ramp reference.
    #[arg(long)]
    ramp: bool,
}

#[derive(Args)]
#[group(multiple = false)]
struct Format {
    #[arg(long)]
    json: bool,
    #[arg(long)]
    csv: bool,
    #[arg(long)]
    md: bool,
}

#[derive(Clone, Copy, PartialEq)]
enum Fmt {
    Json,
    Csv,
    Md,
}

impl Format {
    fn get(&self, default: Fmt) -> Fmt {
        if self.json {
            Fmt::Json
        } else if self.csv {
            Fmt::Csv
        } else if self.md {
            Fmt::Md
        } else {
            default
        }
    }
}

/// Bad input or flags; exits with 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    match e.downcast_ref::<Error>() {
        Some(Error::Nsv(NsvError::LinearEquivalentReset | NsvError::InvalidGrid(_)))
        | Some(Error::Sim(SimError::InvalidOptions(_)))
        | Some(Error::Reset(_))
        | Some(Error::System(_)) => 2,
        Some(Error::HBeta(hbeta::HBetaError::InvalidRange(_))) => 2,
        _ => 1,
    }
}

fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::UbibsStable => 0,
        Verdict::NotQuadraticallyStable => 3,
        Verdict::HypothesisFailed => 4,
    }
}

fn run(cli: Cli) -> Result<u8> {
    configure_threads()?;
    match cli.cmd {
        Command::Analyze {
            source,
            grid,
            format,
            emit_angles,
            out,
        } => analyze(&source, &grid, format.get(Fmt::Md), emit_angles.as_deref(), out.as_deref()),
        Command::HbetaScan {
            source,
            scan,
            format,
            out,
        } => hbeta_scan(&source, &scan, format.get(Fmt::Md), out.as_deref()),
        Command::Simulate {
            source,
            input,
            horizon,
            linear,
            format,
            out,
        } => {
            let default = if out.is_some() { Fmt::Csv } else { Fmt::Md };
            simulate(&source, &input, horizon, linear, format.get(default), out.as_deref())
        }
        Command::Demo {
            grid,
            scan,
            format,
            out,
        } => demo(&grid, &scan, format.get(Fmt::Md), out.as_deref()),
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("{THREADS_VAR} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn load(source: &Source) -> Result<SystemDescription> {
    let mut sys = match (&source.sel.demo, &source.sel.input) {
        (Some(d), _) => d.system(),
        (None, Some(path)) => parse_system(path)?,
        (None, None) => unreachable!("clap enforces one source"),
    };
    if let Some(g) = source.gamma {
        let reset = sys.reset().with_gamma(g).map_err(Error::from)?;
        sys = sys.with_reset(reset);
    }
    Ok(sys)
}

fn parse_system(path: &Path) -> Result<SystemDescription> {
    let text = if path == Path::new("-") {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        s
    } else {
        fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?
    };
    let de = &mut serde_json::Deserializer::from_str(&text);
    let mut sys: SystemDescription = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        if field == "." {
            usage(format!("{}: {}", path.display(), e.inner()))
        } else {
            usage(format!("{}: field `{field}`: {}", path.display(), e.inner()))
        }
    })?;
    if sys.label.is_empty() {
        sys.label = path.file_stem().map_or("input".into(), |s| s.to_string_lossy().into_owned());
    }
    Ok(sys)
}

fn grid(args: &GridArgs) -> Result<FrequencyGrid> {
    let d = FrequencyGrid::default();
    FrequencyGrid::new(
        args.wmin.unwrap_or(d.w_min),
        args.wmax.unwrap_or(d.w_max),
        args.points.unwrap_or(d.points),
    )
    .map_err(|e| usage(e.to_string()))
}

fn scan_spec(args: &ScanArgs) -> Result<ScanSpec> {
    let d = ScanSpec::default();
    let spec = ScanSpec {
        beta_min: args.beta_min.unwrap_or(d.beta_min),
        beta_max: args.beta_max.unwrap_or(d.beta_max),
        rho_max: args.rho_max.unwrap_or(d.rho_max),
        resolution: args.res.unwrap_or(d.resolution),
        ..d
    };
    spec.validate().map_err(|e| usage(e.to_string()))?;
    Ok(spec)
}

/// JSON with every float rounded to six significant digits.
fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut value = serde_json::to_value(v)?;
    round_floats(&mut value);
    Ok(serde_json::to_string_pretty(&value)? + "\n")
}

fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(0.0);
            let r: f64 = format!("{x:.5e}").parse().unwrap_or(x);
            if let Some(num) = serde_json::Number::from_f64(r) {
                *n = num;
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_floats),
        Value::Object(o) => o.values_mut().for_each(round_floats),
        _ => {}
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn analyze(source: &Source, grid_args: &GridArgs, fmt: Fmt, angles: Option<&Path>, out: Option<&Path>) -> Result<u8> {
    let sys = load(source)?;
    let g = grid(grid_args)?;
    let analysis = nsv::analyze(&sys, &g).map_err(Error::from)?;
    if let Some(path) = angles {
        match &analysis.curve {
            Some(curve) => report::write_angle_csv(curve, create(path)?)?,
            None => eprintln!("warning: hypotheses failed, no angle curve written"),
        }
    }
    let rep = &analysis.report;
    let text = match fmt {
        Fmt::Json => to_json(rep)?,
        Fmt::Md => report::analysis_markdown(rep),
        Fmt::Csv => {
            let curve = analysis
                .curve
                .as_ref()
                .ok_or_else(|| anyhow!("hypotheses failed, no angle curve to print"))?;
            let mut buf = Vec::new();
            report::write_angle_csv(curve, &mut buf)?;
            String::from_utf8(buf)?
        }
    };
    emit(out, &text)?;
    Ok(verdict_code(rep.verdict))
}

fn hbeta_scan(source: &Source, scan: &ScanArgs, fmt: Fmt, out: Option<&Path>) -> Result<u8> {
    let sys = load(source)?;
    let spec = scan_spec(scan)?;
    let region = hbeta::scan_system(&sys, &spec).map_err(Error::from)?;
    let g = FrequencyGrid::default();
    let check = nsv::theorem1_verdict(&sys, &g)
        .ok()
        .map(|rep| hbeta::cross_check(&rep, &region));
    if check == Some(CrossCheck::Skipped) {
        eprintln!("warning: {}: hypotheses failed, feasible region is empty", region.label);
    }
    if let Some(prefix) = out {
        let json_path = with_suffix(prefix, "json");
        let csv_path = with_suffix(prefix, "csv");
        fs::write(&json_path, to_json(&region)?).with_context(|| format!("writing {}", json_path.display()))?;
        region.write_csv(create(&csv_path)?)?;
    }
    let text = match fmt {
        Fmt::Json => to_json(&region)?,
        Fmt::Md => report::region_markdown(&region, check),
        Fmt::Csv => {
            let mut buf = Vec::new();
            region.write_csv(&mut buf)?;
            String::from_utf8(buf)?
        }
    };
    if out.is_none() || fmt != Fmt::Csv {
        emit(None, &text)?;
    }
    Ok(0)
}

fn with_suffix(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn simulate(source: &Source, input: &InputArgs, horizon: f64, linear: bool, fmt: Fmt, out: Option<&Path>) -> Result<u8> {
    let sys = load(source)?;
    let cl = sim::assemble(&sys).map_err(Error::from)?;
    let r = if let Some(f) = input.sine {
        Signal::Sine {
            amplitude: 1.0,
            freq_hz: f,
        }
    } else if input.ramp {
        Signal::Ramp { slope: 1.0, t0: 0.0 }
    } else {
        Signal::unit_step()
    };
    r.validate().map_err(usage)?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(usage("--horizon must be positive"));
    }
    let mut opts = SimOptions::for_horizon(horizon);
    opts.linear = linear;
    let trace = sim::simulate(&cl, &r, &Signal::Zero, horizon, &opts).map_err(Error::from)?;
    let text = match fmt {
        Fmt::Json => to_json(&trace)?,
        Fmt::Md => report::trace_markdown(&sys.label, &trace),
        Fmt::Csv => {
            let mut buf = Vec::new();
            trace.write_csv(&mut buf)?;
            String::from_utf8(buf)?
        }
    };
    emit(out, &text)?;
    if out.is_some() {
        eprintln!(
            "{}: {} resets, final y = {}",
            sys.label,
            trace.resets.len(),
            sig6(*trace.y.last().unwrap_or(&0.0))
        );
    }
    Ok(0)
}

fn demo(grid_args: &GridArgs, scan: &ScanArgs, fmt: Fmt, out: Option<&Path>) -> Result<u8> {
    let g = grid(grid_args)?;
    let spec = scan_spec(scan)?;
    let summary = report::run_demo_all(&g, &spec)?;
    let text = match fmt {
        Fmt::Json => to_json(&summary)?,
        Fmt::Md => report::demo_markdown(&summary),
        Fmt::Csv => demo_csv(&summary)?,
    };
    emit(out, &text)?;
    Ok(summary
        .rows
        .iter()
        .map(|r| verdict_code(r.report.verdict))
        .max()
        .unwrap_or(0))
}

fn demo_csv(summary: &DemoSummary) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "system", "m_min", "m_max", "q_min", "q_max", "delta1", "psi1", "theta1_deg", "theta2_deg", "type_i",
        "type_ii", "verdict", "ratio_min", "ratio_max",
    ])?;
    let opt = |v: Option<f64>| v.map(sig6).unwrap_or_default();
    for r in &summary.rows {
        let sets = r.report.sets.as_ref();
        let ends = |f: fn(&nsv::SetReport) -> &Vec<f64>| {
            let v = sets.map(f);
            (
                opt(v.and_then(|v| v.first().copied())),
                opt(v.and_then(|v| v.last().copied())),
            )
        };
        let (m0, m1) = ends(|s| &s.m_set);
        let (q0, q1) = ends(|s| &s.q_set);
        w.write_record([
            r.system.to_string(),
            m0,
            m1,
            q0,
            q1,
            opt(sets.and_then(|s| s.delta1)),
            opt(sets.and_then(|s| s.psi1)),
            opt(sets.map(|s| s.theta1.to_degrees())),
            opt(sets.map(|s| s.theta2.to_degrees())),
            r.report.type_i().to_string(),
            r.report.type_ii().to_string(),
            r.report.verdict.to_string(),
            opt(r.region.ratio_interval.map(|i| i.min)),
            opt(r.region.ratio_interval.map(|i| i.max)),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}
