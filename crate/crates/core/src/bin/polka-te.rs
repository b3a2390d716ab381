use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context;
use clap::{Parser, Subcommand};

use polka_te::api::{self, Gateway};
use polka_te::bundled;
use polka_te::controller::{Controller, ControllerConfig};
use polka_te::predictor::PERSISTENCE;
use polka_te::scenario::{self, ScenarioScript, TrainOptions};

#[derive(Parser)]
#[command(name = "polka-te", version, about = "PolKA traffic-engineering controller and tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the controller behind the HTTP gateway.
    Serve {
        /// Bundled topology name or a file path.
        #[arg(long, default_value = "p4lab.topo")]
        topo: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Wall-clock milliseconds between telemetry ticks.
        #[arg(long, default_value_t = 1000)]
        tick_ms: u64,
        #[arg(long, env = "POLKA_TE_SEED", default_value_t = 42)]
        seed: u64,
    },
    /// Run a scripted experiment headlessly.
    Scenario {
        /// Bundled scenario name or a script path.
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, env = "POLKA_TE_SEED", default_value_t = 42)]
        seed: u64,
    },
    /// Train and score every regressor on a two-path dataset.
    Train {
        /// `synthetic:<seed>` or a CSV path.
        #[arg(long, default_value = "synthetic")]
        dataset: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        lags: usize,
        #[arg(long, env = "POLKA_TE_SEED", default_value_t = 42)]
        seed: u64,
    },
    /// PolKA route identifiers.
    Route {
        #[command(subcommand)]
        op: RouteOp,
    },
}

#[derive(Subcommand)]
enum RouteOp {
    /// Route identifier for `node:port,...`.
    Encode {
        #[arg(long)]
        topo: String,
        #[arg(long)]
        path: String,
    },
    /// Output port a node computes for a route identifier.
    Forward {
        #[arg(long)]
        topo: String,
        /// Binary, most significant bit first.
        #[arg(long)]
        route: String,
        #[arg(long)]
        node: String,
    },
}

const EXIT_USAGE: u8 = 1;
const EXIT_ASSERTION: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn run(cmd: Command) -> anyhow::Result<ExitCode> {
    match cmd {
        Command::Serve {
            topo,
            port,
            host,
            tick_ms,
            seed,
        } => {
            let topology = bundled::load_topology(&topo)?;
            let config = ControllerConfig {
                seed,
                ..ControllerConfig::default()
            };
            let mut gateway = Gateway::new(Controller::new(topology, config));
            gateway.control_mut().start_ticker(Duration::from_millis(tick_ms));
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port))
                    .await
                    .with_context(|| format!("binding {host}:{port}"))?;
                eprintln!("gateway listening on http://{}", listener.local_addr()?);
                api::serve(listener, gateway.router()).await?;
                anyhow::Ok(())
            })?;
            drop(rt);
            gateway.shutdown();
            Ok(ExitCode::SUCCESS)
        }
        Command::Scenario { name, out, seed } => {
            let script = ScenarioScript::load(&name)?;
            let run = scenario::run_scenario(&script, seed)?;
            print!("{}", scenario::describe(&run.report));
            if let Some(dir) = out {
                scenario::write_scenario_outputs(&run, &dir)?;
                println!("wrote {}", dir.display());
            }
            if !run.report.passed {
                eprintln!("scenario assertions failed:");
                for c in run.report.failures() {
                    eprintln!("  {}: expected {}, got {}", c.name, c.expected, c.actual);
                }
                return Ok(ExitCode::from(EXIT_ASSERTION));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Train {
            dataset,
            out,
            lags,
            seed,
        } => {
            let data = scenario::load_dataset(&dataset, seed)?;
            let opts = TrainOptions {
                n_lags: lags,
                seed,
                ..TrainOptions::default()
            };
            let report = scenario::train_eval(&data, &opts)?;
            println!("dataset {} ({} lags, seed {})", data.name, lags, seed);
            print!("{:<12}", "model");
            for p in &report.paths {
                print!("{p:>14}");
            }
            println!();
            let rows = report.models.iter().map(|r| (r.model.as_str(), &r.rmse));
            for (name, rmse) in rows.chain(std::iter::once((PERSISTENCE, &report.persistence))) {
                print!("{name:<12}");
                for v in rmse {
                    print!("{v:>14.4}");
                }
                println!();
            }
            println!("chosen model: {}", report.chosen_model.name());
            if let Some(dir) = out {
                scenario::write_train_outputs(&report, &data, &dir)?;
                println!("wrote {}", dir.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Route { op } => {
            match op {
                RouteOp::Encode { topo, path } => {
                    let topology = bundled::load_topology(&topo)?;
                    println!("{}", scenario::encode_route(&topology, &path)?);
                }
                RouteOp::Forward { topo, route, node } => {
                    let topology = bundled::load_topology(&topo)?;
                    println!("{}", scenario::forward_step(&topology, &route, &node)?.number());
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
