use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fraccons::scenario::{parse_config, reports_csv, run_catalog, run_solve, run_verify, Kind, ScenarioConfig};
use fraccons::selftest;
use fraccons::tfde::Diffusivity;
use fraccons::Error;

const EXIT_VALIDATION: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_CHECK: u8 = 4;

#[derive(Parser)]
#[command(name = "fraccons", version, about = "Conservation laws of time-fractional diffusion equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the scenario on its finest grid and write the field as CSV.
    Solve(Common),
    /// Check the selected conserved vectors on every grid; CSV report.
    Verify(Common),
    /// List admitted symmetries, substitutions and the vector table.
    Catalog {
        /// Read kind, alpha and diffusivity from a scenario file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = parse_kind)]
        kind: Option<Kind>,
        #[arg(long)]
        alpha: Option<f64>,
        /// `constant:K0`, `power:BETA` or `exponential`.
        #[arg(long, value_parser = parse_diffusivity)]
        diffusivity: Option<Diffusivity>,
    },
    /// Run the acceptance matrix.
    Selftest {
        /// Only this criterion (1-12).
        #[arg(long)]
        criterion: Option<u8>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output path; stdout when absent (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated grid sizes, e.g. 64,128,256.
    #[arg(long, value_delimiter = ',')]
    grids: Option<Vec<usize>>,
    #[arg(long)]
    exclude_frac: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
}

fn parse_kind(s: &str) -> Result<Kind, String> {
    match s {
        "RL" | "rl" => Ok(Kind::RL),
        "Caputo" | "caputo" => Ok(Kind::Caputo),
        _ => Err(format!("unknown kind {s:?} (RL or Caputo)")),
    }
}

fn parse_diffusivity(s: &str) -> Result<Diffusivity, String> {
    let (family, arg) = s.split_once(':').unwrap_or((s, ""));
    let num = || arg.parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
    match family {
        "constant" => Ok(Diffusivity::Constant { k0: num()? }),
        "power" => Ok(Diffusivity::Power { beta: num()? }),
        "exponential" => Ok(Diffusivity::Exponential),
        _ => Err(format!("unknown diffusivity {s:?}")),
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::Parameter(_) | Error::Domain { .. } | Error::Inadmissible { .. } => {
                EXIT_VALIDATION
            }
            _ => EXIT_SOLVER,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn load(common: &Common) -> Result<ScenarioConfig, Failure> {
    let text = fs::read_to_string(&common.config).map_err(|e| Failure {
        code: EXIT_VALIDATION,
        message: format!("{}: {e}", common.config.display()),
    })?;
    let mut cfg = parse_config(&text)?;
    if let Some(g) = &common.grids {
        cfg.grids = g.clone();
    }
    if let Some(f) = common.exclude_frac {
        cfg.tolerances.exclude_frac = f;
    }
    if let Some(t) = common.threshold {
        cfg.tolerances.threshold = t;
    }
    if let Some(out) = &common.out {
        cfg.output = Some(out.display().to_string());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(path: Option<&str>, body: &[u8]) -> Result<(), Failure> {
    let res = match path {
        Some(p) => fs::write(p, body),
        None => io::stdout().write_all(body),
    };
    res.map_err(|e| Failure {
        code: EXIT_SOLVER,
        message: format!("writing output: {e}"),
    })
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Solve(common) => {
            let cfg = load(&common)?;
            let mut buf = Vec::new();
            run_solve(&cfg, &mut buf)?;
            emit(cfg.output.as_deref(), &buf)
        }
        Command::Verify(common) => {
            let cfg = load(&common)?;
            let outcome = run_verify(&cfg)?;
            emit(cfg.output.as_deref(), reports_csv(&outcome.reports)?.as_bytes())?;
            if outcome.failures.is_empty() {
                Ok(())
            } else {
                Err(Failure {
                    code: EXIT_CHECK,
                    message: format!("below threshold: {}", outcome.failures.join(", ")),
                })
            }
        }
        Command::Catalog {
            config,
            kind,
            alpha,
            diffusivity,
        } => {
            let base = match config {
                Some(path) => Some(load(&Common {
                    config: path,
                    out: None,
                    grids: None,
                    exclude_frac: None,
                    threshold: None,
                })?),
                None => None,
            };
            let missing = |what: &str| Failure {
                code: EXIT_VALIDATION,
                message: format!("catalog needs --{what} (or --config)"),
            };
            let kind = kind.or(base.as_ref().map(|c| c.kind)).ok_or_else(|| missing("kind"))?;
            let alpha = alpha.or(base.as_ref().map(|c| c.alpha)).ok_or_else(|| missing("alpha"))?;
            let d = diffusivity
                .or(base.as_ref().map(|c| c.diffusivity))
                .ok_or_else(|| missing("diffusivity"))?;
            print!("{}", run_catalog(kind, alpha, &d)?);
            Ok(())
        }
        Command::Selftest { criterion } => {
            let results = match criterion {
                Some(n) => vec![selftest::run_criterion(n)?],
                None => selftest::run_all(),
            };
            for r in &results {
                println!("{r}");
            }
            let failed: Vec<String> = results.iter().filter(|r| !r.passed).map(|r| r.number.to_string()).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure {
                    code: EXIT_CHECK,
                    message: format!("failing criteria: {}", failed.join(", ")),
                })
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("fraccons: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
