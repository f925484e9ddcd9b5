use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wavesplit::driver::{self, selftest::selftest, SimulationConfig};
use wavesplit::farhist::decay_report;
use wavesplit::oracle::{direct_u_many, OracleConfig};
use wavesplit::Result;

#[derive(Parser)]
#[command(name = "wavesplit", version, about = "2D wave fields from point sources")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time-step a configuration and write field frames plus a timing report.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write `x,y,u` text instead of binary frames.
        #[arg(long)]
        csv: bool,
    },
    /// Final-time relative error against the direct evaluation for each (p, Δt).
    Convergence {
        #[arg(long)]
        config: PathBuf,
        /// Space or comma separated time steps.
        #[arg(long)]
        dts: String,
        #[arg(long)]
        orders: String,
        /// Errors at or below this count as plateau (default 100 ε).
        #[arg(long)]
        plateau: Option<f64>,
    },
    /// Direct evaluation at the points of a file (`x y` per line).
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        probes: PathBuf,
        #[arg(long)]
        time: f64,
    },
    /// Run the built-in property suites.
    Selftest {
        #[arg(long)]
        suite: Option<String>,
    },
    /// max_l |H_l| at κ = K_f.
    DecayReport {
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        kf: f64,
    },
}

fn list<T: std::str::FromStr>(s: &str) -> std::result::Result<Vec<T>, String> {
    s.split([',', ' '])
        .filter(|v| !v.is_empty())
        .map(|v| v.parse::<T>().map_err(|_| format!("cannot parse `{v}`")))
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Run { config, out, csv } => {
            let cfg = SimulationConfig::from_file(&config)?;
            let res = driver::run(&cfg)?;
            let dir = out.or_else(|| cfg.out_dir.clone());
            match dir {
                Some(d) => {
                    driver::write_outputs(&res, &cfg.targets.points(), &d, csv)?;
                    println!("wrote {} frame(s) to {}", res.frames.len(), d.display());
                }
                None => {
                    for f in &res.frames {
                        let max = f.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                        println!("t = {:.6}: max |u| = {:.6e}", f.t, max);
                    }
                }
            }
            print!("{}", res.report);
            Ok(ExitCode::SUCCESS)
        }
        Command::Convergence { config, dts, orders, plateau } => {
            let cfg = SimulationConfig::from_file(&config)?;
            let dts: Vec<f64> = list(&dts).map_err(wavesplit::Error::Config)?;
            let orders: Vec<usize> = list(&orders).map_err(wavesplit::Error::Config)?;
            let table = driver::convergence(&cfg, &dts, &orders, plateau.unwrap_or(100.0 * cfg.eps))?;
            print!("{}", table.to_text());
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle { config, probes, time } => {
            let cfg = SimulationConfig::from_file(&config)?;
            let sources = cfg.load_sources()?;
            let pts = driver::read_points(&probes)?;
            let ocfg = OracleConfig::for_sources(&sources, time)?;
            println!("x,y,u");
            for (p, u) in pts.iter().zip(direct_u_many(&pts, time, &sources, &ocfg)) {
                println!("{:e},{:e},{:e}", p[0], p[1], u);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Selftest { suite } => {
            let results = selftest(suite.as_deref())?;
            let mut ok = true;
            for r in &results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
                ok &= r.passed;
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::DecayReport { delta, kf } => {
            println!("{:.4e}", decay_report(delta, kf)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}
