use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use elpower::config::{load_params, read_file, CircuitKind, ConfigError, LoadedParams, RunConfig, Scenario};
use elpower::derive::{build_switched_model, format_mode, format_model, DeriveError};
use elpower::elcore::ModeVector;
use elpower::sim::{simulate, steady_state_metrics, SimError};
use elpower::validate::{balance_error, Suite, CHECKS};

#[derive(Parser)]
#[command(
    name = "elpower",
    version,
    about = "Euler-Lagrange models of switched power converters"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the state-space (or descriptor) model of every mode.
    Derive {
        /// ideal-diode, two-source, lc, hf-rectifier or hf-boost
        circuit: String,
        /// JSON parameter file
        #[arg(long)]
        params: Option<PathBuf>,
        /// Only this mode, e.g. `u_m=1,u_d=0`
        #[arg(long)]
        mode: Option<String>,
    },
    /// Simulate a circuit and write its trajectory as CSV.
    Simulate {
        /// Circuit to run with default settings (instead of --config)
        circuit: Option<String>,
        /// JSON run configuration
        #[arg(long)]
        config: Option<PathBuf>,
        /// JSON parameter file (overrides the one named in the config)
        #[arg(long)]
        params: Option<PathBuf>,
        /// CSV output path; without it the CSV goes to stdout and the
        /// summary to stderr
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the fixture suite against the engine.
    Validate {
        /// Checks to run (default: all)
        checks: Vec<String>,
        /// JSON object of per-circuit parameter overrides for the engine side
        #[arg(long)]
        params: Option<PathBuf>,
        /// List the checks without running them
        #[arg(long)]
        list: bool,
    },
}

/// Failure with its exit status.
enum Failure {
    Config(String),
    Derive(String),
    Simulation(String),
    Validation,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation => 1,
            Failure::Config(_) => 2,
            Failure::Derive(_) => 3,
            Failure::Simulation(_) => 4,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Sim(s) => s.into(),
            ConfigError::Derive(d) => d.into(),
            e => Failure::Config(e.to_string()),
        }
    }
}

impl From<DeriveError> for Failure {
    fn from(e: DeriveError) -> Self {
        Failure::Derive(e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(_)
            | SimError::Scheduler(_)
            | SimError::MissingLabel(_)
            | SimError::InputMismatch { .. } => Failure::Config(e.to_string()),
            SimError::Derive(d) => d.into(),
            e => Failure::Simulation(e.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::Config(format!("cannot write `{}`: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Derive { circuit, params, mode } => derive(&circuit, params.as_deref(), mode.as_deref()),
        Command::Simulate {
            circuit,
            config,
            params,
            out,
        } => run_simulation(circuit.as_deref(), config.as_deref(), params.as_deref(), out.as_deref()),
        Command::Validate { checks, params, list } => validate(&checks, params.as_deref(), list),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(m) | Failure::Derive(m) | Failure::Simulation(m) => eprintln!("error: {m}"),
                Failure::Validation => {}
            }
            ExitCode::from(f.code())
        }
    }
}

fn load(circuit: &str, params: Option<&Path>) -> Result<LoadedParams, Failure> {
    let kind: CircuitKind = circuit.parse()?;
    let text = params.map(read_file).transpose()?;
    Ok(load_params(kind, text.as_deref())?)
}

fn report_parameters(p: &LoadedParams, out: &mut dyn Write) -> io::Result<()> {
    if let Some(c) = &p.calibration {
        writeln!(
            out,
            "R_o = {} ohm (fitted: mean v_c {:.4} V, mean i {:.4} A on the periodic orbit)",
            c.r_o, c.v_out, c.i_l
        )?;
    }
    for (key, value, origin) in p.ambiguous() {
        if key != "R_o" || p.calibration.is_none() {
            writeln!(out, "{key} = {value:e} ({origin})")?;
        }
    }
    Ok(())
}

fn derive(circuit: &str, params: Option<&Path>, mode: Option<&str>) -> Result<(), Failure> {
    let p = load(circuit, params)?;
    let model = build_switched_model(&p.circuit()?)?;
    report_parameters(&p, &mut io::stderr()).ok();
    let text = match mode {
        None => format_model(&model),
        Some(m) => {
            let m: ModeVector = m.parse().map_err(|e| Failure::Config(format!("invalid mode: {e}")))?;
            let reduced = model
                .mode(&m)
                .ok_or_else(|| Failure::Config(format!("{} has no mode {m}", p.kind())))?;
            format_mode(&m, reduced)
        }
    };
    print!("{text}");
    Ok(())
}

fn run_simulation(
    circuit: Option<&str>,
    config: Option<&Path>,
    params: Option<&Path>,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let (mut run, base) = match (circuit, config) {
        (Some(_), Some(_)) => return Err(Failure::Config("give either a circuit or --config, not both".into())),
        (None, None) => {
            return Err(Failure::Config(
                "nothing to simulate: give a circuit or --config".into(),
            ))
        }
        (Some(c), None) => (RunConfig::for_circuit(c), PathBuf::from(".")),
        (None, Some(path)) => {
            let base = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
            (RunConfig::from_json(&read_file(path)?)?, base)
        }
    };
    if let Some(p) = params {
        run.params = Some(std::env::current_dir().map_or_else(|_| p.to_path_buf(), |d| d.join(p)));
    }
    let out = out
        .map(Path::to_path_buf)
        .or_else(|| run.out.as_ref().map(|o| base.join(o)));
    let scenario: Scenario = run.scenario(&base)?;
    let model = scenario.model()?;
    let tr = simulate(&model, &scenario.scheduler, &scenario.inputs, &scenario.config)?;

    let mut summary: Box<dyn Write> = match &out {
        Some(path) => {
            let file = File::create(path).map_err(|e| io_failure(path, e))?;
            let mut w = BufWriter::new(file);
            tr.write_csv(&mut w)
                .and_then(|()| w.flush())
                .map_err(|e| io_failure(path, e))?;
            Box::new(io::stdout())
        }
        None => {
            let mut w = BufWriter::new(io::stdout().lock());
            tr.write_csv(&mut w)
                .and_then(|()| w.flush())
                .map_err(|e| io_failure(Path::new("<stdout>"), e))?;
            Box::new(io::stderr())
        }
    };
    let cfg = &scenario.config;
    let write = |w: &mut dyn Write| -> io::Result<()> {
        writeln!(w, "circuit {}", scenario.params.kind())?;
        report_parameters(&scenario.params, w)?;
        writeln!(
            w,
            "{} integrator, h = {:e} s, t_end = {:e} s, {} steps, {} samples, {} switching events",
            cfg.integrator,
            cfg.h,
            cfg.t_end,
            cfg.n_steps(),
            tr.len(),
            tr.events.len()
        )?;
        match steady_state_metrics(&tr, scenario.window) {
            Ok(m) => {
                writeln!(w, "window {:e} .. {:e} s ({} samples)", m.start, m.end, m.samples)?;
                writeln!(w, "{:<8} {:>16} {:>16}", "state", "mean", "ripple p-p")?;
                for ((label, mean), (_, ripple)) in m.means.iter().zip(&m.ripple) {
                    writeln!(w, "{label:<8} {mean:>16.6} {ripple:>16.6}")?;
                }
                for (mode, fraction) in &m.dwell {
                    writeln!(w, "dwell {mode} {fraction:.4}")?;
                }
            }
            Err(e) => writeln!(w, "no steady-state summary: {e}")?,
        }
        writeln!(
            w,
            "energy balance: max residual / peak stored {:.3e}",
            balance_error(&tr)
        )
    };
    write(summary.as_mut()).map_err(|e| io_failure(Path::new("<summary>"), e))?;
    Ok(())
}

fn validate(checks: &[String], params: Option<&Path>, list: bool) -> Result<(), Failure> {
    if list {
        for c in &CHECKS {
            println!("{:<24} {}", c.name, c.description);
        }
        return Ok(());
    }
    let overrides = params.map(read_file).transpose()?;
    let suite = Suite::with_overrides(overrides.as_deref())?;
    let names: Vec<&str> = checks.iter().map(String::as_str).collect();
    let reports = suite.run(&names).map_err(Failure::Config)?;
    let passed = reports.iter().filter(|r| r.outcome.passed).count();
    for r in &reports {
        println!(
            "{} {:<24} {:>8.2} s  {}",
            if r.outcome.passed { "PASS" } else { "FAIL" },
            r.name,
            r.elapsed.as_secs_f64(),
            r.outcome.summary
        );
        for n in &r.outcome.notes {
            println!("     {:<24}            {n}", "");
        }
    }
    println!("{passed}/{} checks passed", reports.len());
    if passed == reports.len() {
        Ok(())
    } else {
        Err(Failure::Validation)
    }
}
