// SPDX-License-Identifier: Apache-2.0

use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ifusion_client::{Client, ClientError};
use ifusion_core::model::{Identifier, ServiceIntent};
use ifusion_core::scenario::ScenarioFile;
use ifusion_core::system::{FaultKind, FaultSpec};
use ifusion_core::topofile::{parse_topology, REFNET};
use ifusion_core::System;
use ifusion_service::AppState;

#[derive(Parser)]
#[command(name = "ifusion", version, about = "Hierarchical transport SDN orchestrator")]
struct Cli {
    /// Base URL of a running service.
    #[arg(long, global = true, env = "IFUSION_URL", default_value = "http://127.0.0.1:7878")]
    url: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 7878)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Topology file to boot with. Defaults to the bundled reference network.
        #[arg(long)]
        topology: Option<PathBuf>,
        /// Audit every ledger after each mutation.
        #[arg(long)]
        audit: bool,
    },
    /// Validate a topology file and load it into the service.
    Load { file: PathBuf },
    /// Request an end-to-end service.
    Provision {
        #[arg(long)]
        from: Identifier,
        #[arg(long)]
        to: Identifier,
        #[arg(long)]
        mbps: u64,
        #[arg(long = "exclude")]
        excludes: Vec<Identifier>,
    },
    /// Tear down a service by id.
    Teardown { id: Identifier },
    /// List services, or show one.
    Services { id: Option<Identifier> },
    /// Show the global topology.
    Topology {
        #[arg(long, default_value = "full")]
        level: String,
        #[arg(long)]
        domain: Option<String>,
    },
    /// Inject a fault into a device, link or domain.
    Inject {
        #[arg(long)]
        kind: FaultKind,
        #[arg(long)]
        target: String,
        #[arg(long)]
        value: Option<String>,
    },
    /// Run a scenario file. Exits 1 if a step fails.
    Scenario { file: PathBuf },
    /// Audit every ledger. Exits 1 on any violation.
    Audit,
    /// Show run metrics.
    Metrics,
}

fn print(v: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn read(path: &PathBuf) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

async fn serve(host: IpAddr, port: u16, topology: Option<PathBuf>, audit: bool) -> Result<(), String> {
    let text = match &topology {
        Some(p) => read(p)?,
        None => REFNET.to_string(),
    };
    let system = System::from_json(&text).map_err(|e| e.to_string())?;
    let listener = tokio::net::TcpListener::bind(SocketAddr::new(host, port))
        .await
        .map_err(|e| e.to_string())?;
    ifusion_service::serve(listener, AppState::with_audit(system, audit))
        .await
        .map_err(|e| e.to_string())
}

async fn run(cli: Cli) -> Result<ExitCode, String> {
    let client = Client::new(&cli.url);
    let api = |e: ClientError| e.to_string();
    match cli.command {
        Command::Serve { port, host, topology, audit } => {
            serve(host, port, topology, audit).await?;
        }
        Command::Load { file } => {
            let topo = parse_topology(&read(&file)?).map_err(|e| e.to_string())?;
            let problems = topo.validate();
            if !problems.is_empty() {
                return Err(format!("invalid topology: {}", problems.join("; ")));
            }
            print(&client.load_topology(&topo).await.map_err(api)?);
        }
        Command::Provision { from, to, mbps, excludes } => {
            let mut intent = ServiceIntent::new(from, to, mbps);
            intent.excludes = excludes.into_iter().collect();
            print(&client.provision(&intent).await.map_err(api)?);
        }
        Command::Teardown { id } => print(&client.teardown(&id).await.map_err(api)?),
        Command::Services { id: Some(id) } => print(&client.service(&id).await.map_err(api)?),
        Command::Services { id: None } => print(&client.services().await.map_err(api)?),
        Command::Topology { level, domain } => {
            print(&client.topology(&level, domain.as_deref()).await.map_err(api)?.value);
        }
        Command::Inject { kind, target, value } => {
            let fault = FaultSpec { kind, target, value };
            client.inject(&fault).await.map_err(api)?;
            print(&fault);
        }
        Command::Scenario { file } => {
            let scenario = ScenarioFile::parse(&read(&file)?).map_err(|e| e.to_string())?;
            let report = client.scenario(&scenario).await.map_err(api)?;
            print(&report);
            if !report.passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Audit => {
            let report = client.audit().await.map_err(api)?;
            print(&report);
            if !report.is_clean() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Metrics => print(&client.metrics().await.map_err(api)?),
    }
    Ok(ExitCode::SUCCESS)
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    match run(Cli::parse()).await {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
