//! `phasebound`: batch driver for the stability suites.
//!
//! Exit codes: 0 all checks passed, 1 at least one violation, 2 config,
//! parameter, format or domain error, 3 I/O error.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use phasebound::conditional::MaskPolicy;
use phasebound::fld;
use phasebound::gen::{overlap_pair, AmplitudeLaw, Family, GenSpec};
use phasebound::suite::{
    run_scan, run_verify, Command, Record, RunOutput, ScanRow, Summary, Sweep,
};
use phasebound::{
    quotient_conditional_bound, stability_bound, Check, ConstantMode, Error, GridSpec, GroupSpec,
    MaskProvenance, RunConfig, SampledField, StabilityParams,
};
use serde::Serialize;
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "phasebound",
    version,
    about = "Stability estimates for the Fourier phase problem on discrete grids"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a seeded verification suite for one statement.
    Verify {
        #[arg(value_parser = parse_check)]
        check: Check,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Evaluate the main or the conditional estimate for two FLD-JSON fields.
    Certify(CertifyArgs),
    /// Sweep one or two axes over an overlap pair and tabulate every term.
    Scan {
        /// `axis=v1,v2,...` with axis one of overlap_fraction, s, t, p, L.
        #[arg(long = "sweep")]
        sweeps: Vec<String>,
        #[arg(long)]
        overlap_fraction: Option<f64>,
        /// Bins per mask.
        #[arg(long)]
        bins: Option<usize>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Write generated fields as FLD-JSON.
    Gen(GenArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Jsonl,
    Csv,
}

#[derive(Args)]
struct GridArgs {
    /// Points per axis.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, requires = "grid")]
    spacing: Option<f64>,
    #[arg(long, requires = "grid")]
    dim: Option<usize>,
}

impl GridArgs {
    fn build(&self) -> Result<Option<GridSpec>, Error> {
        self.grid
            .map(|n| GridSpec::new(vec![n; self.dim.unwrap_or(1)], self.spacing.unwrap_or(0.25)))
            .transpose()
    }
}

#[derive(Args)]
struct RunArgs {
    /// RunConfig JSON; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    suite: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    s: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    t: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    /// id, phase, phase+shift or phase+shift+reflect.
    #[arg(long)]
    group: Option<String>,
    /// Replace the sharp Hausdorff–Young constant by 1.
    #[arg(long)]
    constant_one: bool,
    /// Relative tolerance for violations.
    #[arg(long)]
    tol: Option<f64>,
    #[command(flatten)]
    grid: GridArgs,
    /// Let the conditional checks use thresholded supports.
    #[arg(long)]
    allow_detected: bool,
    /// Worker threads (all cores by default).
    #[arg(long)]
    threads: Option<usize>,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Estimate {
    Theorem,
    AppendixA,
}

#[derive(Args)]
struct CertifyArgs {
    f: PathBuf,
    g: PathBuf,
    #[arg(long, value_enum, default_value = "theorem")]
    check: Estimate,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    s: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    t: f64,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[arg(long, default_value = "id")]
    group: String,
    #[arg(long)]
    constant_one: bool,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    allow_detected: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// GenSpec JSON for a single field.
    #[arg(long, conflicts_with_all = ["overlap_fraction", "bins"])]
    spec: Option<PathBuf>,
    /// Generate an overlap pair with this intersection-over-union.
    #[arg(long)]
    overlap_fraction: Option<f64>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Real-valued spectra instead of complex ones.
    #[arg(long)]
    real: bool,
    /// Drop the declared masks from the written files.
    #[arg(long)]
    undeclared: bool,
    #[command(flatten)]
    grid: GridArgs,
    /// Output file for `--spec`, output directory for pairs.
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Config(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) => Failure::Io(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn config_err(msg: impl Into<String>) -> Failure {
    Failure::Config(msg.into())
}

fn parse_check(s: &str) -> Result<Check, String> {
    s.parse::<Check>().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Verify { check, run } => cmd_verify(check, &run),
        Cmd::Certify(args) => cmd_certify(&args),
        Cmd::Scan {
            sweeps,
            overlap_fraction,
            bins,
            run,
        } => cmd_scan(&sweeps, overlap_fraction, bins, &run),
        Cmd::Gen(args) => cmd_gen(&args).map(|()| false),
    };
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(1),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("I/O error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn load_config(args: &RunArgs, command: Command) -> Result<RunConfig, Failure> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            let mut config = RunConfig::from_json(&text)
                .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
            match (&config.command, &command) {
                (Command::Scan { .. }, Command::Scan { sweeps }) if sweeps.is_empty() => {}
                _ => config.command = command,
            }
            config
        }
        None => RunConfig {
            command,
            ..RunConfig::verify(Check::Theorem)
        },
    };
    if let Some(suite) = &args.suite {
        config.suite = suite.clone();
    }
    if let Some(trials) = args.trials {
        config.trials = trials;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(s) = &args.s {
        config.params.s = s.clone();
    }
    if let Some(t) = &args.t {
        config.params.t = t.clone();
    }
    if let Some(p) = &args.p {
        config.params.p = p.clone();
    }
    if let Some(group) = &args.group {
        config.group = group.parse()?;
    }
    if args.constant_one {
        config.constant = ConstantMode::One;
    }
    if args.tol.is_some() {
        config.tolerance = args.tol;
    }
    if let Some(grid) = args.grid.build()? {
        config.grids = vec![grid];
    }
    if args.allow_detected {
        config.allow_detected = true;
    }
    config.validate()?;
    Ok(config)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn write_output(out: Option<&Path>, body: &[u8]) -> Result<(), Failure> {
    match out {
        Some(path) => {
            fs::write(path, body).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
        }
        None => Ok(io::stdout().write_all(body)?),
    }
}

fn jsonl<T: Serialize>(
    config: &RunConfig,
    rows: &[T],
    summary: Option<&Summary>,
) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    serde_json::to_writer(&mut buf, &json!({ "config": config }))?;
    buf.push(b'\n');
    for row in rows {
        serde_json::to_writer(&mut buf, row)?;
        buf.push(b'\n');
    }
    if let Some(summary) = summary {
        serde_json::to_writer(&mut buf, &json!({ "summary": summary }))?;
        buf.push(b'\n');
    }
    Ok(buf)
}

fn csv_bytes<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| Failure::Io(e.to_string()))
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    check: Check,
    family: &'a str,
    records: usize,
    violations: usize,
    worst_relative_margin: f64,
}

fn summary_rows(output: &RunOutput) -> Vec<SummaryRow<'static>> {
    let mut by_family: BTreeMap<&'static str, Vec<&Record>> = BTreeMap::new();
    for r in &output.records {
        by_family.entry(r.family.name()).or_default().push(r);
    }
    let row = |family, records: &[&Record]| SummaryRow {
        check: output.summary.check,
        family,
        records: records.len(),
        violations: records.iter().filter(|r| r.violation).count(),
        worst_relative_margin: records
            .iter()
            .map(|r| r.relative_margin)
            .fold(f64::INFINITY, f64::min),
    };
    let mut rows: Vec<_> = by_family
        .iter()
        .map(|(fam, recs)| row(*fam, recs))
        .collect();
    let all: Vec<&Record> = output.records.iter().collect();
    rows.push(row("all", &all));
    rows
}

fn dump_violations(out: &Path, records: &[Record]) -> Result<Option<PathBuf>, Failure> {
    let bad: Vec<&Record> = records.iter().filter(|r| r.violation).collect();
    if bad.is_empty() {
        return Ok(None);
    }
    let dir = sibling(out, ".violations");
    fs::create_dir_all(&dir)?;
    for r in bad {
        for (name, spec) in [("f", &r.f), ("g", &r.g)] {
            let field = spec.generate()?;
            fld::write_field(
                dir.join(format!("trial{}_{}_{name}.fld.json", r.trial, r.index)),
                &field,
            )?;
        }
    }
    Ok(Some(dir))
}

fn cmd_verify(check: Check, args: &RunArgs) -> Result<bool, Failure> {
    let config = load_config(args, Command::Verify { check })?;
    let output = run_verify(&config, args.threads)?;
    let body = match args.format.unwrap_or(Format::Jsonl) {
        Format::Jsonl => jsonl(&config, &output.records, Some(&output.summary))?,
        Format::Csv => csv_bytes(output.records.iter().map(Record::csv_row))?,
    };
    write_output(args.out.as_deref(), &body)?;
    if let Some(out) = &args.out {
        fs::write(
            sibling(out, ".summary.csv"),
            csv_bytes(summary_rows(&output))?,
        )?;
        if let Some(dir) = dump_violations(out, &output.records)? {
            eprintln!("violating pairs written to {}", dir.display());
        }
    }
    let s = &output.summary;
    eprintln!(
        "{}: {} trials, {} records, {} violations, worst relative margin {:.3e}",
        s.check, s.trials, s.records, s.violations, s.worst_relative_margin
    );
    Ok(s.violations > 0)
}

fn cmd_scan(
    sweeps: &[String],
    fraction: Option<f64>,
    bins: Option<usize>,
    args: &RunArgs,
) -> Result<bool, Failure> {
    let sweeps = sweeps
        .iter()
        .map(|s| s.parse::<Sweep>())
        .collect::<Result<Vec<_>, _>>()?;
    if sweeps.is_empty() && args.config.is_none() {
        return Err(config_err("scan needs at least one --sweep axis=v1,v2"));
    }
    let mut config = load_config(args, Command::Scan { sweeps })?;
    if let Some(fraction) = fraction {
        config.overlap_fraction = fraction;
    }
    if bins.is_some() {
        config.bins = bins;
    }
    config.validate()?;
    let rows = run_scan(&config, args.threads)?;
    let body = match args.format.unwrap_or(Format::Csv) {
        Format::Jsonl => jsonl::<ScanRow>(&config, &rows, None)?,
        Format::Csv => csv_bytes(&rows)?,
    };
    write_output(args.out.as_deref(), &body)?;
    Ok(rows.iter().any(|r| r.violation))
}

fn read_field(path: &Path) -> Result<SampledField, Failure> {
    fld::read_field(path).map_err(|e| match e {
        Error::Io(e) => Failure::Io(format!("{}: {e}", path.display())),
        other => config_err(format!("{}: {other}", path.display())),
    })
}

fn provenance(f: &SampledField) -> MaskProvenance {
    if f.mask().is_some() {
        MaskProvenance::Declared
    } else {
        MaskProvenance::Detected
    }
}

fn cmd_certify(args: &CertifyArgs) -> Result<bool, Failure> {
    let group: GroupSpec = args.group.parse()?;
    let params = StabilityParams::new(args.s, args.t, args.p)?;
    let f = read_field(&args.f)?;
    let g = read_field(&args.g)?;
    let masks = json!({ "f": provenance(&f), "g": provenance(&g) });
    let inputs = json!({ "f": args.f, "g": args.g });
    let (certificate, violation) = match args.check {
        Estimate::Theorem => {
            let mut config = RunConfig::verify(Check::Theorem);
            config.constant = if args.constant_one {
                ConstantMode::One
            } else {
                ConstantMode::Beckner
            };
            config.tolerance = args.tol;
            config.validate()?;
            let report = stability_bound(&f, &g, &params, group, &config.options(Check::Theorem))?;
            let certified = report.conditions.certified();
            let cert = json!({
                "check": Check::Theorem,
                "inputs": inputs,
                "masks": masks,
                "tolerance": config.tolerance_for(Check::Theorem),
                "certified": certified,
                "lhs": report.lhs,
                "rhs": report.rhs,
                "relative_margin": report.relative_margin(),
                "violation": report.violation,
                "report": report,
            });
            (cert, report.violation)
        }
        Estimate::AppendixA => {
            let policy = if args.allow_detected {
                MaskPolicy::AllowDetected
            } else {
                MaskPolicy::DeclaredOnly
            };
            let report = quotient_conditional_bound(&f, &g, params.s, group, policy)?;
            let tol = args.tol.unwrap_or(Check::AppendixA.default_tolerance());
            let violation = report.relative_margin() < -tol;
            let cert = json!({
                "check": Check::AppendixA,
                "inputs": inputs,
                "masks": masks,
                "tolerance": tol,
                "s": params.s,
                "lhs": report.lhs,
                "rhs": report.rhs,
                "relative_margin": report.relative_margin(),
                "violation": violation,
                "report": report,
            });
            (cert, violation)
        }
    };
    let mut body = serde_json::to_vec_pretty(&certificate)?;
    body.push(b'\n');
    write_output(args.out.as_deref(), &body)?;
    Ok(violation)
}

fn cmd_gen(args: &GenArgs) -> Result<(), Failure> {
    let strip = |f: SampledField| if args.undeclared { f.without_mask() } else { f };
    if let Some(path) = &args.spec {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        let spec: GenSpec = serde_json::from_str(&text)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let field = strip(spec.generate()?);
        fld::write_field(&args.out, &field)?;
        return Ok(());
    }
    let fraction = args
        .overlap_fraction
        .ok_or_else(|| config_err("gen needs --spec FILE or --overlap-fraction"))?;
    let grid = args.grid.build()?.unwrap_or(GridSpec::line(128, 0.25)?);
    let bins = args.bins.unwrap_or((grid.dims()[0] / 4).max(1));
    let law = if args.real {
        AmplitudeLaw::RealGaussian
    } else {
        AmplitudeLaw::ComplexGaussian
    };
    let (mut fs_spec, mut gs_spec) = overlap_pair(args.seed, &grid, fraction, bins, law)?;
    if args.undeclared {
        for spec in [&mut fs_spec, &mut gs_spec] {
            spec.family = Family::Undeclared {
                base: Box::new(spec.family.clone()),
            };
        }
    }
    let f = fs_spec.generate()?;
    let g = gs_spec.generate()?;
    fs::create_dir_all(&args.out)?;
    for (name, spec, field) in [("f", &fs_spec, &f), ("g", &gs_spec, &g)] {
        fld::write_field(args.out.join(format!("{name}.fld.json")), field)?;
        fs::write(
            args.out.join(format!("{name}.gen.json")),
            serde_json::to_vec_pretty(spec)?,
        )?;
    }
    Ok(())
}
