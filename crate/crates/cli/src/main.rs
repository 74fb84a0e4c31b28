use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hwknit::bench::{self, BenchError, BenchKind};
use hwknit::cost::{gate_density, Partition};
use hwknit::cutter::{cut_circuit, CutError, CutterConfig, Iterations};
use hwknit::knit::{reconstruct, reconstruct_with_partition, KnitError, Observable};
use hwknit::plan::CutPlan;
use hwknit::qasm::{emit_qasm, parse_qasm};
use hwknit::router::{route, LayoutMode, RoutedCircuit};
use hwknit::sim::SimError;
use hwknit::topo::{topology, HardwareTopology};

const VERIFY_TOLERANCE: f64 = 1e-6;

#[derive(Parser)]
#[command(
    name = "hwknit",
    version,
    about = "Hardware-aware circuit cutting and knitting"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Partition a circuit into device-sized subcircuits and write a cut plan.
    Cut(CutArgs),
    /// Map a circuit, or every subcircuit of a plan, onto a device.
    Route(RouteArgs),
    /// Cut, evaluate and knit an observable back together.
    Knit(KnitArgs),
    /// Experiment drivers.
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Args)]
struct CutterArgs {
    #[arg(long, default_value = "lagos")]
    topology: String,
    /// `autoF` for F times the two-qubit gate density, or a number.
    #[arg(long, default_value = "auto0.2")]
    alpha: String,
    /// Subcircuit size bound (default: device size).
    #[arg(long)]
    max_qubits: Option<usize>,
    /// `auto` or a trial count.
    #[arg(long, default_value = "auto")]
    iterations: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CutArgs {
    #[arg(long)]
    qasm: PathBuf,
    #[command(flatten)]
    cutter: CutterArgs,
    /// Plan destination (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RouteArgs {
    #[arg(long, conflicts_with = "plan", required_unless_present = "plan")]
    qasm: Option<PathBuf>,
    /// Route the subcircuits of this plan onto its topology.
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long)]
    topology: Option<String>,
    /// `sabre` or `identity`.
    #[arg(long, default_value = "sabre")]
    layout: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory receiving the routed QASM files.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct KnitArgs {
    #[arg(long)]
    qasm: PathBuf,
    /// `dist`, or a string over I/Z with one character per qubit (optionally `zstring SPEC`).
    #[arg(long)]
    observable: String,
    /// Compare against a full statevector simulation.
    #[arg(long)]
    verify: bool,
    /// Reuse the partition of an existing plan instead of cutting.
    #[arg(long)]
    plan: Option<PathBuf>,
    #[command(flatten)]
    cutter: CutterArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Edit-distance cost against SWAP count for sampled AQFT_16 subcircuits on lagos.
    Correlate {
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
    },
    /// Cuts, depth and swaps across alpha factors and seeds.
    Sweep {
        #[arg(long, default_value = "aqft")]
        bench: String,
        #[arg(long, default_value_t = 16)]
        qubits: usize,
        #[arg(long, default_value = "lagos")]
        topology: String,
        /// Comma-separated multiples of the gate density.
        #[arg(long, default_value = "0,0.2,0.5", value_delimiter = ',')]
        alphas: Vec<f64>,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
    },
    /// Planted-optimum instances: found against planted cuts and routing overhead.
    Queko {
        /// Planted instance (1, 2 or 3).
        #[arg(long, default_value_t = 2)]
        chips: usize,
        #[arg(long, default_value_t = 20)]
        runs: u64,
        #[arg(long, default_value_t = 10)]
        depth: usize,
        #[arg(long, default_value_t = 0.2)]
        alpha_factor: f64,
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
    },
    /// Cut-only run on a large generated circuit.
    Scale {
        #[arg(long, default_value_t = 1000)]
        qubits: usize,
        #[arg(long, default_value = "ising")]
        bench: String,
        #[arg(long, default_value = "brisbane")]
        topology: String,
        #[arg(long, default_value_t = 0.2)]
        alpha_factor: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
    },
}

/// Error carrying the process exit code.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let err = e.into();
        Failure {
            code: exit_code(&err),
            err,
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let capacity = |c: &CutError| {
        matches!(
            c,
            CutError::Infeasible { .. } | CutError::BoundExceedsDevice { .. }
        )
    };
    for cause in err.chain() {
        if let Some(c) = cause.downcast_ref::<CutError>() {
            if capacity(c) {
                return 2;
            }
        }
        if let Some(SimError::TooLarge(_)) = cause.downcast_ref::<SimError>() {
            return 2;
        }
        match cause.downcast_ref::<KnitError>() {
            Some(KnitError::Sim(SimError::TooLarge(_))) => return 2,
            Some(KnitError::Cut(c)) if capacity(c) => return 2,
            _ => {}
        }
        if let Some(BenchError::Cut(c)) = cause.downcast_ref::<BenchError>() {
            if capacity(c) {
                return 2;
            }
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Cut(a) => cmd_cut(a),
        Command::Route(a) => cmd_route(a),
        Command::Knit(a) => cmd_knit(a),
        Command::Bench(b) => cmd_bench(b),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

fn write_atomic(path: &Path, contents: &[u8]) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    write_atomic(path, &w.into_inner().map_err(|e| anyhow!("{e}"))?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn read_circuit(path: &Path) -> Result<hwknit::circuit::Circuit, Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_qasm(&text).with_context(|| format!("parsing {}", path.display()))?)
}

fn read_plan(path: &Path) -> Result<CutPlan, Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(CutPlan::from_json(&text).with_context(|| format!("loading plan {}", path.display()))?)
}

fn parse_alpha(spec: &str, c: &hwknit::circuit::Circuit) -> anyhow::Result<f64> {
    let s = spec.trim();
    let alpha = match s.strip_prefix("auto") {
        Some(f) => {
            let factor: f64 = f
                .parse()
                .with_context(|| format!("bad alpha factor in '{s}'"))?;
            factor * gate_density(c)?
        }
        None => s.parse().with_context(|| format!("bad alpha '{s}'"))?,
    };
    if !alpha.is_finite() || alpha < 0.0 {
        bail!("alpha must be a non-negative number, got {alpha}");
    }
    Ok(alpha)
}

fn parse_iterations(spec: &str) -> anyhow::Result<Iterations> {
    if spec.eq_ignore_ascii_case("auto") {
        return Ok(Iterations::Auto);
    }
    let n: usize = spec
        .parse()
        .with_context(|| format!("bad iteration count '{spec}'"))?;
    Ok(Iterations::Fixed(n))
}

fn cutter_config(
    a: &CutterArgs,
    c: &hwknit::circuit::Circuit,
) -> Result<(HardwareTopology, CutterConfig), Failure> {
    let t = topology(&a.topology)?;
    let cfg = CutterConfig::new(
        parse_alpha(&a.alpha, c)?,
        a.max_qubits.unwrap_or(t.num_qubits()),
    )
    .with_seed(a.seed)
    .with_iterations(parse_iterations(&a.iterations)?);
    Ok((t, cfg))
}

fn cmd_cut(a: CutArgs) -> Result<(), Failure> {
    let c = read_circuit(&a.qasm)?;
    let (t, cfg) = cutter_config(&a.cutter, &c)?;
    let sol = cut_circuit(&c, &t, &cfg)?;
    let plan = CutPlan::new(&c, &t, &cfg, &sol)?;
    match &a.out {
        Some(path) => {
            write_atomic(path, plan.to_json().as_bytes())?;
            print_json(&plan.metrics)?;
        }
        None => println!("{}", plan.to_json()),
    }
    Ok(())
}

#[derive(Serialize)]
struct RouteReport {
    subcircuit: usize,
    swap_count: usize,
    depth: usize,
    depth_swaps_as_3cx: usize,
    initial_layout: Vec<usize>,
    final_layout: Vec<usize>,
}

fn route_one(
    i: usize,
    c: &hwknit::circuit::Circuit,
    t: &HardwareTopology,
    a: &RouteArgs,
) -> Result<(RouteReport, RoutedCircuit), Failure> {
    let mode = match a.layout.as_str() {
        "sabre" => LayoutMode::SabreLayout,
        "identity" => LayoutMode::identity(c.num_qubits),
        other => return Err(anyhow!("unknown layout mode '{other}'").into()),
    };
    let r = route(c, t, hwknit::seed::derive(a.seed, i as u64), &mode)?;
    let rep = RouteReport {
        subcircuit: i,
        swap_count: r.swap_count,
        depth: r.depth,
        depth_swaps_as_3cx: r.depth_swaps_as_3cx(),
        initial_layout: r.initial_layout.clone(),
        final_layout: r.final_layout.clone(),
    };
    Ok((rep, r))
}

fn cmd_route(a: RouteArgs) -> Result<(), Failure> {
    let (circuits, topo_name) = match (&a.qasm, &a.plan) {
        (Some(q), _) => (
            vec![read_circuit(q)?],
            a.topology.clone().unwrap_or_else(|| "lagos".into()),
        ),
        (None, Some(p)) => {
            let plan = read_plan(p)?;
            let subs = plan
                .subcircuits
                .iter()
                .map(|s| parse_qasm(&s.qasm))
                .collect::<Result<Vec<_>, _>>()?;
            (subs, a.topology.clone().unwrap_or(plan.topology))
        }
        (None, None) => return Err(anyhow!("one of --qasm or --plan is required").into()),
    };
    let t = topology(&topo_name)?;
    let mut reports = Vec::new();
    for (i, c) in circuits.iter().enumerate() {
        let (rep, routed) = route_one(i, c, &t, &a)?;
        if let Some(dir) = &a.out {
            write_atomic(
                &dir.join(format!("routed_{i}.qasm")),
                emit_qasm(&routed.physical_circuit).as_bytes(),
            )?;
        }
        reports.push(rep);
    }
    print_json(&reports)?;
    Ok(())
}

fn cmd_knit(a: KnitArgs) -> Result<(), Failure> {
    let c = read_circuit(&a.qasm)?;
    let spec = a.observable.trim();
    let spec = spec.strip_prefix("zstring").map(str::trim).unwrap_or(spec);
    let obs = Observable::parse(spec, c.num_qubits)?;
    let (report, partition): (_, Partition) = match &a.plan {
        Some(p) => {
            let plan = read_plan(p)?;
            if plan.num_qubits != c.num_qubits {
                return Err(anyhow!(
                    "plan covers {} qubits but the circuit has {}",
                    plan.num_qubits,
                    c.num_qubits
                )
                .into());
            }
            (
                reconstruct_with_partition(&c, &plan.partition, &obs, a.verify)?,
                plan.partition,
            )
        }
        None => {
            let (t, cfg) = cutter_config(&a.cutter, &c)?;
            reconstruct(&c, &t, &cfg, &obs, a.verify)?
        }
    };
    #[derive(Serialize)]
    struct Out<'a> {
        partition: &'a Partition,
        #[serde(flatten)]
        report: &'a hwknit::knit::KnitReport,
    }
    let out = Out {
        partition: &partition,
        report: &report,
    };
    match &a.out {
        Some(path) => write_json(path, &out)?,
        None => print_json(&out)?,
    }
    if let Some(d) = report.deviation {
        if d > VERIFY_TOLERANCE {
            return Err(Failure {
                code: 3,
                err: anyhow!("reconstruction deviates from the oracle by {d:e}"),
            });
        }
    }
    Ok(())
}

fn cmd_bench(b: BenchCommand) -> Result<(), Failure> {
    match b {
        BenchCommand::Correlate { samples, seed, out } => {
            let res = bench::run_correlation(samples, seed)?;
            #[derive(Serialize)]
            struct Row {
                qubits: String,
                ged_cost: u64,
                swap_count: usize,
            }
            let rows: Vec<Row> = res
                .samples
                .iter()
                .map(|s| Row {
                    qubits: s
                        .qubits
                        .iter()
                        .map(|q| q.to_string())
                        .collect::<Vec<_>>()
                        .join(";"),
                    ged_cost: s.ged_cost,
                    swap_count: s.swap_count,
                })
                .collect();
            write_csv(&out.join("correlation.csv"), &rows)?;
            let summary = serde_json::json!({ "samples": samples, "seed": seed, "r": res.r });
            write_json(&out.join("correlation.json"), &summary)?;
            print_json(&summary)?;
        }
        BenchCommand::Sweep {
            bench,
            qubits,
            topology: topo,
            alphas,
            seeds,
            out,
        } => {
            let kind: BenchKind = bench.parse()?;
            let t = topology(&topo)?;
            let seed_list: Vec<u64> = (0..seeds).collect();
            let rows = bench::run_alpha_sweep(kind, qubits, &t, &alphas, &seed_list)?;
            write_csv(&out.join("sweep.csv"), &rows)?;
            let summary = bench::summarize(&rows);
            write_json(&out.join("sweep_summary.json"), &summary)?;
            print_json(&summary)?;
        }
        BenchCommand::Queko {
            chips,
            runs,
            depth,
            alpha_factor,
            out,
        } => {
            let rows = (0..runs)
                .map(|s| bench::run_planted(chips, depth, s, alpha_factor))
                .collect::<Result<Vec<_>, _>>()?;
            write_csv(&out.join("queko.csv"), &rows)?;
            let hits = rows
                .iter()
                .filter(|r| r.found_cuts == r.planted_cuts)
                .count();
            let summary = serde_json::json!({
                "variant": chips,
                "runs": runs,
                "planted_cuts": rows.first().map(|r| r.planted_cuts),
                "median_found_cuts": bench::median(rows.iter().map(|r| r.found_cuts as f64).collect()),
                "optimal_hits": hits,
                "max_planted_swaps": rows.iter().map(|r| r.planted_swaps).max(),
                "max_added_depth_percent": rows.iter().map(|r| 100.0 * r.added_depth).fold(0.0, f64::max),
            });
            write_json(&out.join("queko_summary.json"), &summary)?;
            print_json(&summary)?;
        }
        BenchCommand::Scale {
            qubits,
            bench,
            topology: topo,
            alpha_factor,
            seed,
            out,
        } => {
            let kind: BenchKind = bench.parse()?;
            let t = topology(&topo)?;
            let row = bench::run_scale(kind, qubits, &t, alpha_factor, seed)?;
            write_csv(&out.join("scale.csv"), std::slice::from_ref(&row))?;
            write_json(&out.join("scale.json"), &row)?;
            print_json(&row)?;
        }
    }
    Ok(())
}
