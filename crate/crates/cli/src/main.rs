//! Command-line front end for the boundary analysis.
//!
//! `boundary analyze <INPUT>` parses a `.mir` program, locates the single
//! block separating configuration parsing from main computation, and prints
//! a report. Exit codes: 0 boundary found, 1 none found, 2 input or usage
//! error, 3 the optional oracle cross-check disagreed with the pipeline.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use boundary_analysis::ir::INTRINSICS;
use boundary_analysis::{
    identify_boundary, oracle_boundary, parse_with_entry, Analysis, BlockRef, BoundaryReport,
    Program, TaintSourceSpec, Verdict,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(
    name = "boundary",
    version,
    about = "Locates the block that separates configuration parsing from main computation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a `.mir` program and report the boundary.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Path to the `.mir` program.
    input: PathBuf,

    /// Name of the entry procedure.
    #[arg(long, default_value = "main")]
    entry: String,

    /// Entry parameter to treat as a configuration source (repeatable).
    /// When omitted, every entry parameter is a source.
    #[arg(long = "taint-param", value_name = "NAME")]
    taint_param: Vec<String>,

    /// Intrinsic whose call results carry configuration data (repeatable).
    /// When omitted, `readcfg` is the only source intrinsic.
    #[arg(long = "taint-intrinsic", value_name = "NAME")]
    taint_intrinsic: Vec<String>,

    /// Report format.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Write `<input>.annotated.mir` with a `# BOUNDARY` marker before the
    /// boundary block's label (only when a boundary is found).
    #[arg(long)]
    annotate: bool,

    /// Re-derive the verdict with the exhaustive reference implementation
    /// and exit 3 on disagreement. Only small programs are accepted.
    #[arg(long)]
    oracle_check: bool,

    /// Write the interprocedural flow graph in DOT form to this path.
    #[arg(long, value_name = "PATH")]
    dot: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Analyze(args) => ExitCode::from(analyze(&args)),
    }
}

fn analyze(args: &AnalyzeArgs) -> u8 {
    match try_analyze(args) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            2
        }
    }
}

fn try_analyze(args: &AnalyzeArgs) -> Result<u8, String> {
    let source = fs::read_to_string(&args.input)
        .map_err(|e| format!("cannot read {}: {e}", args.input.display()))?;
    let program = parse_with_entry(&source, &args.entry).map_err(|e| e.to_string())?;
    let spec = taint_spec(&program, args)?;

    let started = Instant::now();
    let analysis = Analysis::new(&program, spec);
    let report = identify_boundary(&analysis);
    let timing_ms = started.elapsed().as_millis() as u64;

    let oracle_agrees = if args.oracle_check {
        let oracle = oracle_boundary(&program, &analysis.spec).map_err(|e| e.to_string())?;
        let agrees = oracle.verdict == report.verdict && oracle.boundary == report.boundary;
        if !agrees {
            eprintln!(
                "oracle disagreement: pipeline found {} but the reference found {}",
                describe_outcome(report.verdict, report.boundary.as_ref()),
                describe_outcome(oracle.verdict, oracle.boundary.as_ref()),
            );
        }
        Some(agrees)
    } else {
        None
    };

    if let Some(path) = &args.dot {
        fs::write(path, analysis.icfg.to_dot())
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }

    if args.annotate {
        match &report.boundary {
            Some(boundary) => {
                let path = annotated_path(&args.input);
                fs::write(&path, annotate_source(&source, boundary))
                    .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            }
            None => eprintln!("note: no boundary found, annotated file not written"),
        }
    }

    let rendered = match args.format {
        Format::Text => render_text(&report, timing_ms),
        Format::Json => {
            let mut json = render_json(&report, timing_ms);
            json.push('\n');
            json
        }
    };
    write_stdout(&rendered)?;

    Ok(exit_code_for(&report, oracle_agrees))
}

/// Writes the report to stdout. A closed pipe (`boundary ... | head`) is a
/// normal end of output, not an error; anything else (e.g. a full disk)
/// reports as a usage-level failure instead of a panic.
fn write_stdout(text: &str) -> Result<(), String> {
    use std::io::{ErrorKind, Write};
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == ErrorKind::BrokenPipe => Ok(()),
        Err(e) => Err(format!("cannot write report: {e}")),
    }
}

fn describe_outcome(verdict: Verdict, boundary: Option<&BlockRef>) -> String {
    match boundary {
        Some(b) => format!("{verdict} at {b}"),
        None => verdict.to_string(),
    }
}

/// Maps the analysis outcome (and the oracle comparison, when requested)
/// to the process exit code.
fn exit_code_for(report: &BoundaryReport, oracle_agrees: Option<bool>) -> u8 {
    if oracle_agrees == Some(false) {
        return 3;
    }
    match report.verdict {
        Verdict::SingleElementFound => 0,
        Verdict::NoneFound => 1,
    }
}

/// Builds the taint-source specification from the flags, rejecting names
/// that do not exist so a typo cannot silently change the analysis.
fn taint_spec(program: &Program, args: &AnalyzeArgs) -> Result<TaintSourceSpec, String> {
    let mut spec = TaintSourceSpec::default();
    if !args.taint_param.is_empty() {
        let entry = program
            .entry_procedure()
            .expect("validated program has an entry procedure");
        for name in &args.taint_param {
            if !entry.params.contains(name) {
                return Err(format!(
                    "--taint-param {name}: entry procedure `{}` has no such parameter",
                    entry.name
                ));
            }
        }
        spec.entry_params = Some(args.taint_param.iter().cloned().collect());
    }
    if !args.taint_intrinsic.is_empty() {
        for name in &args.taint_intrinsic {
            if !INTRINSICS.contains(&name.as_str()) {
                return Err(format!(
                    "--taint-intrinsic {name}: unknown intrinsic (known: {})",
                    INTRINSICS.join(", ")
                ));
            }
        }
        spec.source_intrinsics = args.taint_intrinsic.iter().cloned().collect();
    }
    Ok(spec)
}

fn annotated_path(input: &Path) -> PathBuf {
    let mut name = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "program".to_string());
    name.push_str(".annotated.mir");
    input.with_file_name(name)
}

/// Copies the source, inserting a `# BOUNDARY` comment line directly above
/// the boundary block's label. Tracks the enclosing procedure so an equally
/// named label in another procedure is left alone.
fn annotate_source(source: &str, boundary: &BlockRef) -> String {
    let label_line = format!("{}:", boundary.block);
    let mut current_proc = String::new();
    let mut out = String::with_capacity(source.len() + 16);
    for line in source.lines() {
        let code = line.split('#').next().unwrap_or("").trim();
        if let Some(rest) = code.strip_prefix("proc ") {
            if let Some(name) = rest.split('(').next() {
                current_proc = name.trim().to_string();
            }
        }
        if current_proc == boundary.procedure && code == label_line {
            let indent: String = line.chars().take_while(|c| c.is_whitespace()).collect();
            out.push_str(&indent);
            out.push_str("# BOUNDARY\n");
        }
        out.push_str(line);
        out.push('\n');
    }
    out
}

fn render_text(report: &BoundaryReport, timing_ms: u64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "verdict: {}", report.verdict);
    match &report.boundary {
        Some(b) => {
            let _ = writeln!(s, "boundary: {b}");
        }
        None => {
            let _ = writeln!(s, "boundary: none");
        }
    }
    if report.c_host.is_empty() {
        let _ = writeln!(s, "c_host: (empty)");
    } else {
        let vars: Vec<String> = report.c_host.iter().map(ToString::to_string).collect();
        let _ = writeln!(s, "c_host: {}", vars.join(", "));
    }
    if report.candidates.is_empty() {
        let _ = writeln!(s, "candidates: (none)");
    } else {
        let _ = writeln!(s, "candidates:");
        for c in &report.candidates {
            let fate = match &c.eliminated_by {
                None => "kept".to_string(),
                Some(reason) => format!("eliminated ({reason})"),
            };
            let origins: Vec<String> = c.origins.iter().map(ToString::to_string).collect();
            let _ = writeln!(s, "  {} - {fate}; origins: {}", c.block, origins.join(", "));
        }
    }
    if !report.warnings.is_empty() {
        let _ = writeln!(s, "warnings:");
        for w in &report.warnings {
            let _ = writeln!(s, "  {w}");
        }
    }
    let _ = writeln!(s, "timing: {timing_ms} ms");
    s
}

/// Renders the report as pretty-printed JSON. `serde_json` keeps object
/// keys in a sorted map, so the output is byte-stable for a given report
/// apart from the `timing_ms` value.
fn render_json(report: &BoundaryReport, timing_ms: u64) -> String {
    let boundary = match &report.boundary {
        Some(b) => json!({ "proc": b.procedure, "block": b.block }),
        None => Value::Null,
    };
    let candidates: Vec<Value> = report
        .candidates
        .iter()
        .map(|c| {
            let origins: Vec<String> = c.origins.iter().map(ToString::to_string).collect();
            json!({
                "proc": c.block.procedure,
                "block": c.block.block,
                "origins": origins,
                "eliminated_by": match &c.eliminated_by {
                    Some(reason) => json!(reason.as_str()),
                    None => Value::Null,
                },
            })
        })
        .collect();
    let c_host: Vec<String> = report.c_host.iter().map(ToString::to_string).collect();
    let value = json!({
        "verdict": report.verdict.as_str(),
        "boundary": boundary,
        "c_host": c_host,
        "candidates": candidates,
        "warnings": report.warnings,
        "timing_ms": timing_ms,
    });
    serde_json::to_string_pretty(&value).expect("report serializes")
}
