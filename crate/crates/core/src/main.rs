use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use bohmlab::config::{parse_config, ConstantsConfig, ExperimentConfig, NamedMass};
use bohmlab::grid::Grid;
use bohmlab::interference::{pattern_table, SlitModel};
use bohmlab::io::{write_convergence_csv, write_pattern_csv};
use bohmlab::potential::PotentialSpec;
use bohmlab::propagator::{convergence_study, LatticeSpec, Rule};
use bohmlab::run::{constants_report, run, Stages};
use bohmlab::Error;

#[derive(Parser)]
#[command(name = "bohmlab", version, about = "Quantum hydrodynamics workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the configured state and write snapshots.
    Evolve(RunArgs),
    /// Evolve and advect Bohmian particles.
    Trajectories {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        particles: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evolve and run the field diagnostics.
    Diagnostics(RunArgs),
    /// Analytic two-slit pattern as CSV.
    Interfere {
        #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
        x1: f64,
        #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
        x2: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        sigma: f64,
        #[arg(long, default_value_t = std::f64::consts::TAU)]
        k: f64,
        #[arg(long, default_value_t = -5.0, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
        to: f64,
        #[arg(long, default_value_t = 1001)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lattice path-integral convergence table as CSV.
    Propagator {
        #[arg(long, value_enum, default_value_t = System::Free)]
        system: System,
        /// Comma-separated slice counts.
        #[arg(long = "M", value_delimiter = ',', default_values_t = [8usize, 16, 32, 64])]
        slices: Vec<usize>,
        #[arg(long, default_value_t = 0.02)]
        theta: f64,
        #[arg(long = "T", default_value_t = 1.0)]
        total_time: f64,
        #[arg(long, default_value_t = 1.0)]
        omega: f64,
        #[arg(long, default_value_t = 0.3, allow_hyphen_values = true)]
        x_start: f64,
        #[arg(long, default_value_t = -0.2, allow_hyphen_values = true)]
        x_end: f64,
        #[arg(long, default_value_t = 30.0)]
        half_width: f64,
        #[arg(long, default_value_t = 0.01)]
        dx: f64,
        #[arg(long, default_value = "endpoint")]
        rule: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reverse-velocity constant and imaginary radii in SI.
    Constants {
        /// Extra masses as name=kg.
        #[arg(long = "mass")]
        masses: Vec<String>,
    },
    /// Full pipeline from a config file.
    Run(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides output.dir from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum System {
    Free,
    Harmonic,
}

const CONFIG_ERROR: u8 = 1;
const NUMERIC_ERROR: u8 = 2;

fn fail(code: u8, e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(code)
}

fn classify(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::InvalidParameter { .. } | Error::InvalidGrid(_) | Error::TooFewPoints { .. } => {
            CONFIG_ERROR
        }
        _ => NUMERIC_ERROR,
    }
}

fn load(args: &RunArgs) -> Result<(ExperimentConfig, PathBuf), ExitCode> {
    let text = fs::read_to_string(&args.config).map_err(|e| fail(CONFIG_ERROR, format!("{}: {e}", args.config.display())))?;
    let cfg = parse_config(&text).map_err(|e| fail(CONFIG_ERROR, e))?;
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    Ok((cfg, out))
}

fn execute(cfg: &ExperimentConfig, stages: Stages, out: &Path) -> ExitCode {
    match run(cfg, stages, out) {
        Ok(report) => {
            print!("{}", report.render());
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => fail(classify(&e), e),
    }
}

fn sink(out: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(v) = std::env::var("BOHMLAB_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    return fail(CONFIG_ERROR, e);
                }
            }
            _ => return fail(CONFIG_ERROR, format!("BOHMLAB_THREADS must be a positive integer, got '{v}'")),
        }
    }
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    match cli.command {
        Command::Run(args) => match load(&args) {
            Ok((cfg, out)) => execute(&cfg, Stages::all(), &out),
            Err(code) => code,
        },
        Command::Evolve(args) => match load(&args) {
            Ok((cfg, out)) => execute(&cfg, Stages::evolve_only(), &out),
            Err(code) => code,
        },
        Command::Diagnostics(args) => match load(&args) {
            Ok((cfg, out)) => execute(
                &cfg,
                Stages {
                    diagnostics: true,
                    ..Stages::evolve_only()
                },
                &out,
            ),
            Err(code) => code,
        },
        Command::Trajectories { run: args, particles, seed } => match load(&args) {
            Ok((mut cfg, out)) => {
                if let Some(n) = particles {
                    cfg.trajectories.particles = n;
                }
                if let Some(s) = seed {
                    cfg.trajectories.seed = s;
                }
                if cfg.trajectories.particles == 0 {
                    return fail(CONFIG_ERROR, "trajectories.particles must be at least 1");
                }
                if let Err(e) = cfg.validate() {
                    return fail(CONFIG_ERROR, e);
                }
                execute(
                    &cfg,
                    Stages {
                        trajectories: true,
                        ..Stages::evolve_only()
                    },
                    &out,
                )
            }
            Err(code) => code,
        },
        Command::Interfere {
            x1,
            x2,
            sigma,
            k,
            from,
            to,
            points,
            out,
        } => {
            let rows = SlitModel::new(x1, x2, sigma, k).and_then(|m| pattern_table(&m, from, to, points));
            match rows {
                Ok(rows) => match sink(&out).map_err(Error::from).and_then(|w| write_pattern_csv(w, &rows)) {
                    Ok(()) => ExitCode::SUCCESS,
                    Err(e) => fail(NUMERIC_ERROR, e),
                },
                Err(e) => fail(CONFIG_ERROR, e),
            }
        }
        Command::Propagator {
            system,
            slices,
            theta,
            total_time,
            omega,
            x_start,
            x_end,
            half_width,
            dx,
            rule,
            out,
        } => {
            let potential = match system {
                System::Free => PotentialSpec::Free,
                System::Harmonic => PotentialSpec::Harmonic {
                    omega,
                    mass: 1.0,
                    center: vec![0.0],
                },
            };
            let points = (2.0 * half_width / dx).round() as usize + 1;
            let setup = rule.parse::<Rule>().and_then(|rule| {
                let grid = Grid::uniform_1d(-half_width, half_width, points)?;
                let first = *slices.first().ok_or_else(|| Error::Config {
                    key: "M".into(),
                    message: "empty list".into(),
                })?;
                Ok(LatticeSpec::new(first, total_time, grid, theta)?.with_rule(rule))
            });
            let base = match setup {
                Ok(b) => b,
                Err(e) => return fail(CONFIG_ERROR, e),
            };
            match convergence_study(&base, &potential, x_start, x_end, total_time, &slices) {
                Ok(table) => match sink(&out).map_err(Error::from).and_then(|w| write_convergence_csv(w, &table)) {
                    Ok(()) => ExitCode::SUCCESS,
                    Err(e) => fail(NUMERIC_ERROR, e),
                },
                Err(e) => fail(classify(&e), e),
            }
        }
        Command::Constants { masses } => {
            let mut cfg = ConstantsConfig::default();
            for m in masses {
                let Some((name, kg)) = m.split_once('=') else {
                    return fail(CONFIG_ERROR, format!("--mass expects name=kg, got '{m}'"));
                };
                match kg.parse::<f64>() {
                    Ok(kg) => cfg.masses.push(NamedMass { name: name.into(), kg }),
                    Err(e) => return fail(CONFIG_ERROR, format!("--mass {name}: {e}")),
                }
            }
            match constants_report(&cfg) {
                Ok(text) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => fail(CONFIG_ERROR, e),
            }
        }
    }
}
