//! The `winnow` command-line front end.
//!
//! Exit codes: 0 success, 2 usage error, 3 infeasible optimization,
//! 4 internal invariant violation. All randomness comes from `--seed`, so a
//! repeated command writes identical bytes.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{fraction_string, to_f64, transition_table};
use crate::efficiency::figure_rows;
use crate::hamming::HammingParams;
use crate::planner::{
    binary_max_p0, max_correctable_p0, optimize_schedule, optimize_with, render_optimization,
    BinaryEvaluator, EveModel, MaxP0, Optimization, SearchBounds, BINARY_BOUNDS,
};
use crate::schedule::{Schedule, BLOCK_SIZES};
use crate::simulator::{run_trials, ErrorKind, ProtocolChoice, TrialConfig, TrialReport};
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "winnow",
    version,
    about = "Winnow error reconciliation: tables, curves, schedule planning and simulation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-block error transition table for one block size.
    Tables(TablesArgs),
    /// p_N / p0 curves over a p0 grid.
    Figure(FigureArgs),
    /// Schedule search for one p0, or the largest correctable p0.
    Optimize(OptimizeArgs),
    /// Monte Carlo sessions over planted-error keys.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Txt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Bb84,
    Generic,
    Worst,
}

impl From<ModelArg> for EveModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Bb84 => EveModel::Bb84Breidbart,
            ModelArg::Generic => EveModel::Generic,
            ModelArg::Worst => EveModel::WorstCase,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    Winnow,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct BlockArgs {
    /// Syndrome bits; the block size is 2^m.
    #[arg(long, conflicts_with = "n")]
    pub m: Option<u32>,
    /// Block size.
    #[arg(long = "N", id = "n")]
    pub n: Option<usize>,
}

impl BlockArgs {
    fn params(&self) -> crate::Result<Option<HammingParams>> {
        match (self.m, self.n) {
            (Some(m), _) => HammingParams::new(m).map(Some),
            (None, Some(n)) => HammingParams::from_block_size(n).map(Some),
            (None, None) => Ok(None),
        }
    }
}

#[derive(Debug, Args)]
pub struct TablesArgs {
    #[command(flatten)]
    pub block: BlockArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct FigureArgs {
    /// Block sizes to include.
    #[arg(long = "N", value_delimiter = ',', default_values_t = BLOCK_SIZES.to_vec())]
    pub sizes: Vec<usize>,
    /// p0 grid spacing.
    #[arg(long, default_value_t = 0.005)]
    pub step: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long, value_enum, default_value_t = ModelArg::Bb84)]
    pub model: ModelArg,
    #[arg(
        long,
        required_unless_present = "find_max",
        conflicts_with = "find_max"
    )]
    pub p0: Option<f64>,
    /// Search for the largest p0 with a feasible schedule.
    #[arg(long)]
    pub find_max: bool,
    #[arg(long, default_value_t = 1e-6)]
    pub target_error: f64,
    #[arg(long, value_enum, default_value_t = ProtocolArg::Winnow)]
    pub protocol: ProtocolArg,
    /// Largest pass count tried per block size (default 6 for Winnow, 3 for BINARY).
    #[arg(long)]
    pub max_passes: Option<u32>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub block: BlockArgs,
    /// Independent per-bit error probability (the burst rate with --burst).
    #[arg(long, conflicts_with = "exact_errors")]
    pub p0: Option<f64>,
    /// Exactly this many errors in every block of the first pass.
    #[arg(long)]
    pub exact_errors: Option<usize>,
    /// Plant errors in runs of this length, at overall rate --p0.
    #[arg(long, requires = "p0")]
    pub burst: Option<usize>,
    /// Pass counts j8,j16,j32,j64,j128.
    #[arg(long, conflicts_with = "passes")]
    pub schedule: Option<String>,
    /// Number of passes at the block size given by --m / --N.
    #[arg(long)]
    pub passes: Option<u32>,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    /// Key length in bits.
    #[arg(long, default_value_t = 1 << 20)]
    pub length: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ProtocolArg::Winnow)]
    pub protocol: ProtocolArg,
    /// BINARY only: discard one bit per revealed parity.
    #[arg(long, value_enum, default_value_t = Switch::Off)]
    pub privacy_maintenance: Switch,
    /// Permute both keys between passes.
    #[arg(long, value_enum, default_value_t = Switch::On)]
    pub shuffle: Switch,
    /// Write one transcript file per trial into this directory.
    #[arg(long)]
    pub capture_transcripts: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// A finished command: its rendered output and exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub text: String,
    pub code: i32,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvariantViolation(_)
        | Error::Wire(_)
        | Error::ProtocolAbort(_)
        | Error::EnumerationCapExceeded { .. } => EXIT_INVARIANT,
        _ => EXIT_USAGE,
    }
}

fn tables(args: &TablesArgs) -> crate::Result<Outcome> {
    let params = args
        .block
        .params()?
        .ok_or_else(|| usage("tables needs --m or --N"))?;
    let table = transition_table(params)?;
    let mut s = String::new();
    match args.output.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            s.push_str("n_i,nf_p,nf_ph,nf,n_f,pf_p,pf_ph,p_f,nf_p_exact,nf_ph_exact,nf_exact,pf_p_exact,pf_ph_exact,p_f_exact\n");
            for r in &table.rows {
                let _ = writeln!(
                    s,
                    "{},{:.6},{:.6},{:.6},{},{:.6},{:.6},{:.6},{},{},{},{},{},{}",
                    r.n_i,
                    to_f64(&r.nf_p),
                    to_f64(&r.nf_ph),
                    to_f64(&r.nf_final),
                    r.n_f,
                    to_f64(&r.pf_p),
                    to_f64(&r.pf_ph),
                    to_f64(&r.p_f),
                    fraction_string(&r.nf_p),
                    fraction_string(&r.nf_ph),
                    fraction_string(&r.nf_final),
                    fraction_string(&r.pf_p),
                    fraction_string(&r.pf_ph),
                    fraction_string(&r.p_f),
                );
            }
        }
        Format::Txt => {
            let _ = writeln!(s, "N = {}, m = {}", params.n(), params.m());
            let _ = writeln!(
                s,
                "{:>4} {:>10} {:>10} {:>10} {:>4} {:>10} {:>10} {:>10}",
                "n_i", "nf_p", "nf_ph", "nf", "n_f", "pf_p", "pf_ph", "p_f"
            );
            for r in &table.rows {
                let _ = writeln!(
                    s,
                    "{:>4} {:>10.4} {:>10.4} {:>10.4} {:>4} {:>10.4} {:>10.4} {:>10.4}",
                    r.n_i,
                    to_f64(&r.nf_p),
                    to_f64(&r.nf_ph),
                    to_f64(&r.nf_final),
                    r.n_f,
                    to_f64(&r.pf_p),
                    to_f64(&r.pf_ph),
                    to_f64(&r.p_f)
                );
            }
        }
    }
    Ok(Outcome {
        text: s,
        code: EXIT_OK,
    })
}

fn figure(args: &FigureArgs) -> crate::Result<Outcome> {
    let rows = figure_rows(&args.sizes, args.step)?;
    let sep = match args.output.format.unwrap_or(Format::Csv) {
        Format::Csv => ",",
        Format::Txt => " ",
    };
    let mut s = String::from("p0");
    for n in &args.sizes {
        let _ = write!(s, "{sep}p{n}_over_p0");
    }
    s.push('\n');
    for row in rows {
        let _ = write!(s, "{:.4}", row.p0);
        for r in row.ratios {
            let _ = write!(s, "{sep}{r:.9}");
        }
        s.push('\n');
    }
    Ok(Outcome {
        text: s,
        code: EXIT_OK,
    })
}

fn key_value_csv(text: &str) -> String {
    let mut s = String::from("field,value\n");
    for line in text.lines() {
        if let Some((k, v)) = line.split_once(": ") {
            let v = if v.contains(',') {
                format!("\"{v}\"")
            } else {
                v.to_string()
            };
            let _ = writeln!(s, "{k},{v}");
        }
    }
    s
}

fn render_kv(text: String, format: Option<Format>) -> String {
    match format.unwrap_or(Format::Txt) {
        Format::Txt => text,
        Format::Csv => key_value_csv(&text),
    }
}

fn optimize(args: &OptimizeArgs) -> crate::Result<Outcome> {
    let model = EveModel::from(args.model);
    let binary = args.protocol == ProtocolArg::Binary;
    let bounds = match (args.max_passes, binary) {
        (Some(j), _) => SearchBounds::uniform(j),
        (None, true) => BINARY_BOUNDS,
        (None, false) => SearchBounds::default(),
    };
    if args.find_max {
        let result: MaxP0 = match (binary, args.max_passes) {
            (false, None) => max_correctable_p0(model, args.target_error)?,
            (true, None) => binary_max_p0(model, args.target_error)?,
            (false, Some(_)) => crate::planner::max_p0_with(
                &crate::planner::WinnowEvaluator,
                "winnow",
                model,
                args.target_error,
                bounds,
                crate::planner::MAX_P0_TOLERANCE,
            )?,
            (true, Some(_)) => crate::planner::max_p0_with(
                &BinaryEvaluator::default(),
                "binary",
                model,
                args.target_error,
                bounds,
                crate::planner::BINARY_TOLERANCE,
            )?,
        };
        return Ok(Outcome {
            text: render_kv(result.render(), args.output.format),
            code: EXIT_OK,
        });
    }
    let p0 = args
        .p0
        .ok_or_else(|| usage("optimize needs --p0 or --find-max"))?;
    let result = if binary {
        optimize_with(
            &BinaryEvaluator::default(),
            p0,
            model,
            args.target_error,
            bounds,
        )?
    } else {
        optimize_schedule(p0, model, args.target_error, bounds)?
    };
    let mut text = format!("protocol: {}\n", if binary { "binary" } else { "winnow" });
    text.push_str(&render_optimization(
        p0,
        model,
        args.target_error,
        bounds,
        &result,
    ));
    Ok(Outcome {
        text: render_kv(text, args.output.format),
        code: if result == Optimization::Infeasible {
            EXIT_INFEASIBLE
        } else {
            EXIT_OK
        },
    })
}

fn simulation_config(args: &SimulateArgs) -> crate::Result<TrialConfig> {
    let params = args.block.params()?;
    let schedule = match (&args.schedule, args.passes) {
        (Some(text), _) => text.parse::<Schedule>()?,
        (None, Some(j)) => {
            let params = params.ok_or_else(|| usage("--passes needs --m or --N"))?;
            let mut counts = [0; 5];
            let idx = BLOCK_SIZES
                .iter()
                .position(|&b| b == params.n())
                .expect("valid block size");
            counts[idx] = j;
            Schedule::new(counts)
        }
        (None, None) => return Err(usage("simulate needs --schedule or --passes")),
    };
    let errors = match (args.exact_errors, args.p0, args.burst) {
        (Some(n), _, _) => {
            let block_size = params
                .or_else(|| schedule.passes().first().copied())
                .ok_or_else(|| usage("--exact-errors needs a block size"))?
                .n();
            ErrorKind::ExactCount {
                per_block: n,
                block_size,
            }
        }
        (None, Some(rate), Some(length)) => ErrorKind::Burst { length, rate },
        (None, Some(p0), None) => ErrorKind::Binomial { p0 },
        (None, None, _) => return Err(usage("simulate needs --p0 or --exact-errors")),
    };
    let protocol = match args.protocol {
        ProtocolArg::Winnow => {
            if args.privacy_maintenance == Switch::On {
                return Err(usage(
                    "--privacy-maintenance applies to --protocol binary only",
                ));
            }
            ProtocolChoice::Winnow
        }
        ProtocolArg::Binary => ProtocolChoice::Binary {
            privacy_maintenance: args.privacy_maintenance == Switch::On,
        },
    };
    let mut config = TrialConfig::new(args.length, errors, schedule);
    config.protocol = protocol;
    config.trials = args.trials;
    config.master_seed = args.seed;
    config.shuffle = args.shuffle == Switch::On;
    config.capture_transcripts = args.capture_transcripts.is_some();
    Ok(config)
}

fn write_transcripts(dir: &Path, report: &TrialReport) -> crate::Result<()> {
    let io = |e: std::io::Error| {
        usage(format!(
            "cannot write transcripts to {}: {e}",
            dir.display()
        ))
    };
    fs::create_dir_all(dir).map_err(io)?;
    for (i, t) in report.transcripts.iter().enumerate() {
        fs::write(dir.join(format!("trial-{i:05}.txt")), t.to_string()).map_err(io)?;
    }
    Ok(())
}

fn simulate(args: &SimulateArgs) -> crate::Result<Outcome> {
    let config = simulation_config(args)?;
    let report = run_trials(&config)?;
    if let Some(dir) = &args.capture_transcripts {
        write_transcripts(dir, &report)?;
    }
    Ok(Outcome {
        text: render_kv(report.render(), args.output.format),
        code: EXIT_OK,
    })
}

fn output_of(command: &Command) -> &OutputArgs {
    match command {
        Command::Tables(a) => &a.output,
        Command::Figure(a) => &a.output,
        Command::Optimize(a) => &a.output,
        Command::Simulate(a) => &a.output,
    }
}

/// Runs a parsed command, writing its output to `--out` or `stdout`.
pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> crate::Result<i32> {
    let outcome = match &cli.command {
        Command::Tables(a) => tables(a)?,
        Command::Figure(a) => figure(a)?,
        Command::Optimize(a) => optimize(a)?,
        Command::Simulate(a) => simulate(a)?,
    };
    match &output_of(&cli.command).out {
        Some(path) => fs::write(path, &outcome.text)
            .map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?,
        None => stdout
            .write_all(outcome.text.as_bytes())
            .map_err(|e| usage(format!("cannot write output: {e}")))?,
    }
    Ok(outcome.code)
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            if code == EXIT_OK {
                let _ = stdout.write_all(rendered.as_bytes());
            } else {
                let _ = stderr.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}
