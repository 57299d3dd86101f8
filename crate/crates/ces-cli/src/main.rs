//! `ces` — drive the pipeline end to end: analyze a mini-OpenMP program,
//! transform it, and simulate it on a configurable big.LITTLE machine.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ces_core::frontend::{parse, SourceProgram};
use ces_core::machine::MachineConfig;
use ces_core::plan::{analyze_program, Analysis};
use ces_core::sim::{self, Policy, SimOptions};
use ces_core::transform;
use ces_core::workload::CoreType;

const EXIT_INPUT: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

/// Paper-documented frequency bands for the two core types, Hz.
const BIG_BAND: (f64, f64) = (0.8e9, 1.9e9);
const LITTLE_BAND: (f64, f64) = (0.6e9, 1.3e9);

#[derive(Parser)]
#[command(
    name = "ces",
    about = "Compiler-enhanced scheduling for mini-OpenMP programs on big.LITTLE machines",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Machine description JSON (defaults to the built-in 4 big + 4 LITTLE
    /// machine)
    #[arg(long)]
    machine: Option<PathBuf>,
    /// Override the team size (defaults to the machine's core count)
    #[arg(long)]
    threads: Option<usize>,
    /// Frequency overrides, e.g. `big=1.9e9,little=1.0e9`
    #[arg(long)]
    freq: Option<String>,
    /// Output directory (defaults to the source file's directory)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, validate and plan a program; write the plan JSON
    Analyze {
        source: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Rewrite the program per its plan into `<name>.ces.c`
    Transform {
        source: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
        /// Also write the plan JSON beside the transformed source
        #[arg(long)]
        emit_plan: bool,
    },
    /// Simulate under one or more policies and write report JSON
    Simulate {
        source: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
        /// hmp or ces; repeat for several runs
        #[arg(long, default_values = ["ces"])]
        policy: Vec<String>,
        /// Also write the event trace as CSV
        #[arg(long)]
        trace_csv: bool,
    },
    /// Simulate under hmp and ces and print the normalized table
    Compare {
        source: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long, default_values = ["hmp", "ces"])]
        policy: Vec<String>,
        #[arg(long)]
        trace_csv: bool,
    },
    /// Run the bundled corpus through the whole pipeline
    CorpusTest {
        #[command(flatten)]
        common: CommonOpts,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
        Err(_) => {
            eprintln!("internal invariant violation");
            ExitCode::from(EXIT_INTERNAL)
        }
    }
}

enum CliError {
    Input(String),
    Usage(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Usage(_) => EXIT_USAGE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) | CliError::Usage(m) => write!(f, "{m}"),
        }
    }
}

fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Analyze { source, common } => cmd_analyze(&source, &common),
        Command::Transform {
            source,
            common,
            emit_plan,
        } => cmd_transform(&source, &common, emit_plan),
        Command::Simulate {
            source,
            common,
            policy,
            trace_csv,
        } => cmd_simulate(&source, &common, &policy, trace_csv),
        Command::Compare {
            source,
            common,
            policy,
            trace_csv,
        } => cmd_compare(&source, &common, &policy, trace_csv),
        Command::CorpusTest { common } => cmd_corpus_test(&common),
    }
}

// ---- shared plumbing ------------------------------------------------------

fn load_machine(common: &CommonOpts) -> Result<MachineConfig, CliError> {
    let mut machine = match &common.machine {
        Some(path) => MachineConfig::from_file(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?,
        None => MachineConfig::default(),
    };
    if let Some(freq) = &common.freq {
        apply_freq(&mut machine, freq)?;
    }
    Ok(machine)
}

/// `--freq big=<Hz>,little=<Hz>`; overrides stay inside the documented
/// hardware bands.
fn apply_freq(machine: &mut MachineConfig, spec: &str) -> Result<(), CliError> {
    for part in spec.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("bad --freq component `{part}`")))?;
        let hz: f64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("bad frequency `{value}`")))?;
        let (band, ct) = match key.trim() {
            "big" => (BIG_BAND, CoreType::Big),
            "little" => (LITTLE_BAND, CoreType::Little),
            other => return Err(CliError::Usage(format!("unknown core type `{other}`"))),
        };
        if !(band.0..=band.1).contains(&hz) {
            return Err(CliError::Usage(format!(
                "{key} frequency {hz} outside the supported band {:.1e}..{:.1e} Hz",
                band.0, band.1
            )));
        }
        match ct {
            CoreType::Big => machine.calibration.big.frequency_hz = hz,
            CoreType::Little => machine.calibration.little.frequency_hz = hz,
        }
    }
    Ok(())
}

fn load_source(path: &Path) -> Result<SourceProgram, CliError> {
    SourceProgram::from_file(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn parse_source(sp: &SourceProgram) -> Result<ces_core::frontend::Ast, CliError> {
    parse(sp).map_err(|d| CliError::Input(d.render()))
}

fn analyze(
    sp: &SourceProgram,
    machine: &MachineConfig,
    common: &CommonOpts,
) -> Result<Analysis, CliError> {
    let ast = parse_source(sp)?;
    analyze_program(&ast, machine, common.threads).map_err(input_err)
}

fn parse_policies(names: &[String]) -> Result<Vec<Policy>, CliError> {
    names
        .iter()
        .map(|n| n.parse::<Policy>().map_err(CliError::Usage))
        .collect()
}

fn stem(path: &Path) -> String {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    name.strip_suffix(".comp.c")
        .or_else(|| name.strip_suffix(".c"))
        .unwrap_or(name)
        .to_string()
}

fn out_dir(source: &Path, common: &CommonOpts) -> Result<PathBuf, CliError> {
    let dir = common
        .out
        .clone()
        .unwrap_or_else(|| source.parent().unwrap_or(Path::new(".")).to_path_buf());
    if !dir.as_os_str().is_empty() {
        std::fs::create_dir_all(&dir).map_err(input_err)?;
    }
    Ok(dir)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

// ---- subcommands ------------------------------------------------------------

fn cmd_analyze(source: &Path, common: &CommonOpts) -> Result<(), CliError> {
    let machine = load_machine(common)?;
    let sp = load_source(source)?;
    let analysis = analyze(&sp, &machine, common)?;
    let dir = out_dir(source, common)?;
    let plan_path = dir.join(format!("{}.plan.json", stem(source)));
    let json = serde_json::to_string_pretty(&analysis.to_plan_json(&machine)).map_err(input_err)?;
    write_file(&plan_path, &json)?;
    println!("{}", summarize(&analysis));
    println!("plan: {}", plan_path.display());
    Ok(())
}

fn summarize(analysis: &Analysis) -> String {
    use ces_core::plan::SegmentPlan;
    let mut out = String::new();
    if analysis.regions.is_empty() {
        out.push_str("no parallel regions\n");
    }
    for r in &analysis.regions {
        out.push_str(&format!(
            "region {} in {}: {} threads, {} segment(s){}\n",
            r.region_ordinal,
            r.function,
            r.n_threads,
            r.segments.len(),
            if r.reentrant { ", re-entrant" } else { "" }
        ));
        for s in &r.segments {
            match &s.plan {
                SegmentPlan::For(p) => {
                    let n = match &p.n_itrs {
                        ces_core::scheduler::NItrs::Const(n) => n.to_string(),
                        ces_core::scheduler::NItrs::Symbolic(e) => e.clone(),
                    };
                    out.push_str(&format!(
                        "  segment {}: omp for, N_ITRS = {}, chunk = {}, {}\n",
                        s.segment.id,
                        n,
                        p.chunk,
                        if p.fixed_size {
                            "fixed-size (static worklist)"
                        } else {
                            "stealing enabled"
                        }
                    ));
                }
                SegmentPlan::Sections(a) => out.push_str(&format!(
                    "  segment {}: sections, {} section(s), rewritten N_ITRS = {}\n",
                    s.segment.id,
                    a.assignment.len(),
                    a.n_itrs()
                )),
                SegmentPlan::Single(_) => out.push_str(&format!(
                    "  segment {}: single (one-section dispatch)\n",
                    s.segment.id
                )),
                SegmentPlan::Block(p) => out.push_str(&format!(
                    "  segment {}: plain block, {} migration pair(s)\n",
                    s.segment.id,
                    p.pairs.len()
                )),
            }
        }
    }
    out.trim_end().to_string()
}

fn cmd_transform(source: &Path, common: &CommonOpts, emit_plan: bool) -> Result<(), CliError> {
    let machine = load_machine(common)?;
    let sp = load_source(source)?;
    let analysis = analyze(&sp, &machine, common)?;
    let text = transform::transform_program(&analysis).map_err(input_err)?;

    // the output must stay inside the dialect
    parse(&SourceProgram::new("transformed", &text)).map_err(|d| {
        CliError::Input(format!(
            "internal: output failed to re-parse\n{}",
            d.render()
        ))
    })?;

    let dir = out_dir(source, common)?;
    let out_path = dir.join(format!("{}.ces.c", stem(source)));
    write_file(&out_path, &text)?;
    println!("transformed: {}", out_path.display());
    if emit_plan {
        let plan_path = dir.join(format!("{}.plan.json", stem(source)));
        let json =
            serde_json::to_string_pretty(&analysis.to_plan_json(&machine)).map_err(input_err)?;
        write_file(&plan_path, &json)?;
        println!("plan: {}", plan_path.display());
    }
    Ok(())
}

/// Analysis for simulation: transformed inputs are recognized structurally,
/// anything else goes through the normal planner.
fn analysis_for_sim(
    sp: &SourceProgram,
    machine: &MachineConfig,
    common: &CommonOpts,
) -> Result<Analysis, CliError> {
    let ast = parse_source(sp)?;
    match sim::recognize_transformed(&ast, machine).map_err(input_err)? {
        Some(a) => Ok(a),
        None => analyze_program(&ast, machine, common.threads).map_err(input_err),
    }
}

fn cmd_simulate(
    source: &Path,
    common: &CommonOpts,
    policies: &[String],
    trace_csv: bool,
) -> Result<(), CliError> {
    let policies = parse_policies(policies)?;
    let machine = load_machine(common)?;
    let sp = load_source(source)?;
    let analysis = analysis_for_sim(&sp, &machine, common)?;
    let dir = out_dir(source, common)?;
    for policy in policies {
        let opts = SimOptions {
            policy,
            ..SimOptions::default()
        };
        let report = sim::simulate(&analysis, &machine, &opts).map_err(input_err)?;
        let base = format!("{}.{}", stem(source), policy.name());
        let report_path = dir.join(format!("{base}.report.json"));
        // traces are bulky; persist them only to CSV
        let mut slim = report.clone();
        slim.trace.clear();
        write_file(
            &report_path,
            &serde_json::to_string_pretty(&slim).map_err(input_err)?,
        )?;
        if trace_csv {
            let trace_path = dir.join(format!("{base}.trace.csv"));
            write_file(&trace_path, &report.trace_csv())?;
        }
        println!(
            "{}: makespan {:.9}s energy {:.9}J steals {} migrations {} ({})",
            policy.name(),
            report.makespan_s,
            report.energy_j,
            report.steal_stats.steals_succeeded,
            report.counts.migrations,
            report_path.display()
        );
    }
    Ok(())
}

fn cmd_compare(
    source: &Path,
    common: &CommonOpts,
    policies: &[String],
    trace_csv: bool,
) -> Result<(), CliError> {
    let policies = parse_policies(policies)?;
    if policies.len() < 2 {
        return Err(CliError::Usage(
            "compare needs at least two policies".into(),
        ));
    }
    let machine = load_machine(common)?;
    let sp = load_source(source)?;
    let analysis = analysis_for_sim(&sp, &machine, common)?;
    let benchmark = stem(source);
    let (reports, comparison) =
        sim::compare(&analysis, &machine, &benchmark, &policies).map_err(input_err)?;
    print!("{}", comparison.render_table());
    let dir = out_dir(source, common)?;
    let csv_path = dir.join(format!("{benchmark}.compare.csv"));
    write_file(&csv_path, &comparison.normalized_csv())?;
    if trace_csv {
        for r in &reports {
            let trace_path = dir.join(format!("{benchmark}.{}.trace.csv", r.policy));
            write_file(&trace_path, &r.trace_csv())?;
        }
    }
    println!("normalized: {}", csv_path.display());
    Ok(())
}

fn cmd_corpus_test(common: &CommonOpts) -> Result<(), CliError> {
    let machine = load_machine(common)?;
    let mut failures = 0usize;
    for entry in &ces_core::corpus::CORPUS {
        match corpus_one(entry, &machine, common) {
            Ok(summary) => println!("PASS {:<10} {summary}", entry.name),
            Err(e) => {
                failures += 1;
                println!("FAIL {:<10} {e}", entry.name);
            }
        }
    }
    if failures > 0 {
        Err(CliError::Input(format!(
            "{failures} corpus kernel(s) failed"
        )))
    } else {
        Ok(())
    }
}

fn corpus_one(
    entry: &ces_core::corpus::CorpusEntry,
    machine: &MachineConfig,
    common: &CommonOpts,
) -> Result<String, CliError> {
    let sp = SourceProgram::new(format!("{}.comp.c", entry.name), entry.source);
    let ast = parse_source(&sp)?;

    // round-trip law
    let printed = ces_core::frontend::emit_source(&ast);
    let reparsed = parse(&SourceProgram::new("roundtrip", &printed))
        .map_err(|d| CliError::Input(format!("round-trip re-parse failed:\n{}", d.render())))?;
    if reparsed != ast {
        return Err(CliError::Input("round-trip mismatch".into()));
    }

    let analysis = analyze_program(&ast, machine, common.threads).map_err(input_err)?;
    let transformed = transform::transform_program(&analysis).map_err(input_err)?;
    parse(&SourceProgram::new("transformed", &transformed)).map_err(|d| {
        CliError::Input(format!(
            "transformed output failed to parse:\n{}",
            d.render()
        ))
    })?;

    let hmp = sim::simulate(
        &analysis,
        machine,
        &SimOptions {
            policy: Policy::Hmp,
            ..SimOptions::default()
        },
    )
    .map_err(input_err)?;
    let ces = sim::simulate(
        &analysis,
        machine,
        &SimOptions {
            policy: Policy::Ces,
            ..SimOptions::default()
        },
    )
    .map_err(input_err)?;
    Ok(format!(
        "hmp {:.6}s / ces {:.6}s ({} steals, {} exchanges)",
        hmp.makespan_s, ces.makespan_s, ces.steal_stats.steals_succeeded, ces.counts.exchanges
    ))
}
