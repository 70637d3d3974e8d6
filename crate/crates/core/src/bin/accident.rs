use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use accident_core::eval::{parse_truth, run_bench, BenchError, EvaluationReport, StreamOutcome};
use accident_core::pipeline::{run_reader, PipelineError};
use accident_core::sim::{builtin_suite, generate, ScenarioSpec, SpecError};
use accident_core::EngineConfig;

#[derive(Parser)]
#[command(name = "accident", version, about = "Collision detection on vehicle detection streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect collisions on a detection stream.
    Run {
        #[command(flatten)]
        engine: EngineArgs,
        /// Detection stream (stdin when omitted).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Event output (stdout when omitted).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Per-frame trace output.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Generate synthetic scenarios.
    Simulate {
        /// Scenario spec file.
        #[arg(long, conflicts_with = "builtin", required_unless_present = "builtin")]
        input: Option<PathBuf>,
        /// Generate the builtin suite instead.
        #[arg(long)]
        builtin: bool,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output directory; receives `<name>.jsonl` and `<name>.truth`.
        #[arg(long)]
        output: PathBuf,
    },
    /// Run a stream and score its events against ground truth.
    Eval {
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        truth: PathBuf,
        /// Event output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the builtin suite end to end and print the report.
    Bench {
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Event output, tagged by scenario.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print configuration.
    Config {
        /// Print the embedded defaults.
        #[arg(long, required = true)]
        defaults: bool,
    },
}

#[derive(Args)]
struct EngineArgs {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use the legacy overlap rule (vertical term `|a.y + b.y|`).
    #[arg(long)]
    strict_paper_mode: bool,
    /// Override `kinematics.fps`.
    #[arg(long)]
    fps: Option<f64>,
}

impl EngineArgs {
    fn load(&self) -> Result<EngineConfig, Failure> {
        let mut cfg = match &self.config {
            Some(path) => EngineConfig::load(path).map_err(|e| Failure::Config(e.to_string()))?,
            None => EngineConfig::default(),
        };
        if self.strict_paper_mode {
            cfg.strict_paper_mode = true;
        }
        if let Some(fps) = self.fps {
            cfg.kinematics.fps = fps;
        }
        cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
        Ok(cfg)
    }
}

enum Failure {
    Input(String),
    Config(String),
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(e) => Failure::Config(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

impl From<SpecError> for Failure {
    fn from(e: SpecError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Pipeline(p) => p.into(),
            BenchError::Spec(s) => s.into(),
        }
    }
}

fn open_input(path: Option<&Path>) -> Result<Box<dyn BufRead>, Failure> {
    Ok(match path {
        Some(p) => {
            Box::new(BufReader::new(File::open(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?))
        }
        None => Box::new(io::stdin().lock()),
    })
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => {
            Box::new(BufWriter::new(File::create(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?))
        }
        None => Box::new(io::stdout().lock()),
    })
}

/// Writes the table and the JSON record to stdout. A closed pipe is not an error.
fn print_report(report: &EvaluationReport) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    match writeln!(out, "{}{}", report.to_table(), report.to_json()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { engine, input, output, trace } => {
            let cfg = engine.load()?;
            let reader = open_input(input.as_deref())?;
            let mut trace_out = match &trace {
                Some(p) => Some(open_output(Some(p))?),
                None => None,
            };
            let summary = run_reader(reader, &cfg, trace_out.as_deref_mut().map(|w| w as &mut dyn Write))?;
            if let Some(mut w) = trace_out {
                w.flush()?;
            }
            let mut out = open_output(output.as_deref())?;
            out.write_all(summary.events_text().as_bytes())?;
            out.flush()?;
            log::info!(
                "{} frames, {} episodes scored, {} events",
                summary.frames,
                summary.scored.len(),
                summary.events.len()
            );
        }
        Command::Simulate { input, builtin, seed, output } => {
            let specs = if builtin {
                builtin_suite(seed)
            } else {
                let path = input.expect("clap requires --input without --builtin");
                let text = fs::read_to_string(&path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
                vec![ScenarioSpec::from_toml_str(&text)?]
            };
            fs::create_dir_all(&output)?;
            for spec in &specs {
                let scenario = generate(spec)?;
                fs::write(output.join(format!("{}.jsonl", scenario.name)), scenario.stream_text())?;
                fs::write(output.join(format!("{}.truth", scenario.name)), scenario.truth_text())?;
            }
            log::info!("wrote {} scenarios to {}", specs.len(), output.display());
        }
        Command::Eval { engine, input, truth, output } => {
            let cfg = engine.load()?;
            let truth_text =
                fs::read_to_string(&truth).map_err(|e| Failure::Input(format!("{}: {e}", truth.display())))?;
            let truth_records = parse_truth(&truth_text).map_err(|e| Failure::Input(e.to_string()))?;
            let summary = run_reader(open_input(input.as_deref())?, &cfg, None)?;
            if let Some(p) = &output {
                fs::write(p, summary.events_text())?;
            }
            let name = input
                .as_deref()
                .and_then(Path::file_stem)
                .map_or_else(|| "stdin".to_string(), |s| s.to_string_lossy().into_owned());
            let outcome = StreamOutcome::from_run(&name, &summary, &truth_records, cfg.eval.truth_window);
            print_report(&EvaluationReport::from_outcomes(vec![outcome]))?;
        }
        Command::Bench { engine, seed, output } => {
            let cfg = engine.load()?;
            let bench = run_bench(&cfg, seed)?;
            if let Some(p) = &output {
                fs::write(p, bench.events_text())?;
            }
            print_report(&bench.report)?;
        }
        Command::Config { .. } => print!("{}", EngineConfig::default().to_toml_string()),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
    }
}
