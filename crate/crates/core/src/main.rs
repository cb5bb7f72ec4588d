use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use nmsim::harness::output::{self, Files};
use nmsim::harness::{self, ExperimentKind, ExperimentSpec, Format, ResourceModel};
use nmsim::Error;

#[derive(Parser)]
#[command(
    name = "nmsim",
    version,
    about = "Event-driven neuromorphic core simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synaptic and membrane traces for one input train
    Trace(Common),
    /// Output rate against input rate
    FfCurve(Common),
    /// ReLU transfer curve with linear fit and gain sweep
    Relu(Common),
    /// Leak-cancellation residuals over mismatch instances
    Montecarlo(Common),
    /// Area and capacitance totals
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        neurons: Option<u64>,
        #[arg(long)]
        blocks: Option<u64>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Csv => Format::Csv,
            OutFormat::Json => Format::Json,
        }
    }
}

fn load(common: &Common, kind: ExperimentKind) -> nmsim::Result<ExperimentSpec> {
    let mut spec = match &common.config {
        Some(path) => {
            let src = std::fs::read_to_string(path).map_err(|e| Error::Config {
                line: None,
                msg: format!("{}: {e}", path.display()),
            })?;
            let mut spec = harness::parse_config(&src, kind)?;
            // stimulus files are relative to the config file
            if let Some(file) = &spec.stimulus.file {
                let base = path.parent().unwrap_or(Path::new("."));
                spec.stimulus.file = Some(base.join(file).to_string_lossy().into_owned());
            }
            spec
        }
        None => ExperimentSpec::defaults(kind),
    };
    if let Some(seed) = common.seed {
        spec.seed = seed;
    }
    Ok(spec)
}

fn execute(cmd: Command) -> nmsim::Result<(PathBuf, Files)> {
    match cmd {
        Command::Trace(c) => {
            let spec = load(&c, ExperimentKind::Trace)?;
            let res = harness::run_trace(&spec)?;
            Ok((c.out, output::trace_files(&spec, &res, c.format.into())))
        }
        Command::FfCurve(c) => {
            let spec = load(&c, ExperimentKind::FfCurve)?;
            let pts = harness::run_ff_curve(&spec)?;
            Ok((c.out, output::ff_files(&spec, &pts, c.format.into())))
        }
        Command::Relu(c) => {
            let spec = load(&c, ExperimentKind::ReluCurve)?;
            let res = harness::run_relu_curve(&spec)?;
            Ok((c.out, output::relu_files(&spec, &res, c.format.into())))
        }
        Command::Montecarlo(c) => {
            let spec = load(&c, ExperimentKind::Montecarlo)?;
            let stats = harness::run_montecarlo(&spec)?;
            let files = output::montecarlo_files(&spec, &stats, c.format.into());
            if !stats.passed {
                output::write_files(&c.out, &files)?;
                return Err(Error::Assertion(format!(
                    "residual std {} exceeds {}",
                    stats.residual.std, stats.max_residual_std
                )));
            }
            Ok((c.out, files))
        }
        Command::Report {
            common,
            neurons,
            blocks,
        } => {
            let mut spec = load(&common, ExperimentKind::ResourceReport)?;
            if let Some(n) = neurons {
                spec.report.n_neurons = n;
            }
            if let Some(b) = blocks {
                spec.report.n_blocks = b;
            }
            let r = harness::resource_report(
                spec.report.n_neurons,
                spec.report.n_blocks,
                &ResourceModel::default(),
            );
            Ok((
                common.out,
                output::report_files(&spec, &r, common.format.into()),
            ))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. }
        | Error::InvalidArgument(_)
        | Error::MalformedEvent(_)
        | Error::Io(_) => 2,
        Error::NumericFault { .. }
        | Error::TimeReversal { .. }
        | Error::InfiniteTimeConstant
        | Error::ContractViolation(_) => 3,
        Error::Assertion(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = execute(cli.command).and_then(|(dir, files)| output::write_files(&dir, &files));
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("nmsim: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
