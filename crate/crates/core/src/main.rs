use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use stepwise::command::ExportFormat;
use stepwise::engine::{export_session, Engine};
use stepwise::model::{load_script_file, Backend, HttpBackend, HttpConfig};
use stepwise::repl::{run_repl, ReplOptions};
use stepwise::scenario::{record, run_scenario, Scenario};
use stepwise::server::{serve, AppState};
use stepwise::session::SessionConfig;
use stepwise::store::SessionStore;

#[derive(Parser)]
#[command(name = "stepwise", version, about = "Interactive, editable reasoning chains")]
struct Cli {
    /// Chat-completion endpoint URL.
    #[arg(long, global = true, env = "STEPWISE_ENDPOINT", conflicts_with = "script")]
    endpoint: Option<String>,
    /// Scripted model fixture (JSON) used instead of a live endpoint.
    #[arg(long, global = true)]
    script: Option<PathBuf>,
    #[arg(long, global = true, default_value = "sessions")]
    session_dir: PathBuf,
    #[arg(long, global = true)]
    candidates: Option<u32>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    model: Option<String>,
    /// Name of the environment variable holding the endpoint's bearer token.
    #[arg(long, global = true)]
    token_env: Option<String>,
    /// Persist learned preferences under this profile name.
    #[arg(long, global = true)]
    profile: Option<String>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Interactive session on stdin/stdout.
    Repl,
    /// HTTP API with a server-sent event stream.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
    /// Replay a scenario file and compare every message.
    RunScenario {
        path: PathBuf,
        /// Overwrite the file's expectations with the current output.
        #[arg(long)]
        record: bool,
    },
    /// Print a stored session.
    Export {
        session_id: String,
        #[arg(long, default_value = "markdown")]
        format: String,
    },
}

impl Cli {
    fn config(&self) -> SessionConfig {
        let mut config = SessionConfig::default();
        if let Some(n) = self.candidates {
            config.candidates = n;
        }
        if let Some(a) = self.alpha {
            config.alpha = a;
        }
        if self.seed.is_some() {
            config.seed = self.seed;
        }
        if let Some(m) = &self.model {
            config.model = m.clone();
        }
        config.endpoint = self.endpoint.clone();
        config.auth_env = self.token_env.clone();
        config
    }

    fn backend(&self, config: &SessionConfig) -> Result<Arc<dyn Backend>> {
        if let Some(path) = &self.script {
            let backend = load_script_file(path).with_context(|| format!("loading {}", path.display()))?;
            return Ok(Arc::new(backend));
        }
        let Some(endpoint) = &self.endpoint else {
            bail!("no model configured: pass --endpoint or --script");
        };
        let token = match &self.token_env {
            Some(var) => Some(std::env::var(var).with_context(|| format!("reading ${var}"))?),
            None => None,
        };
        Ok(Arc::new(HttpBackend::new(HttpConfig {
            endpoint: endpoint.clone(),
            model: config.model.clone(),
            token,
            timeout: Duration::from_secs(config.timeout_secs),
            retries: 1,
        })))
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match &cli.command {
        Cmd::Repl => {
            let config = cli.config();
            let backend = cli.backend(&config)?;
            let options = ReplOptions {
                config,
                store: Some(SessionStore::new(&cli.session_dir)),
                profile: cli.profile.clone(),
            };
            let engine = Engine::new(backend.as_ref());
            let stdin = std::io::stdin();
            run_repl(&engine, &options, stdin.lock(), std::io::stdout())?;
        }
        Cmd::Serve { addr } => {
            let config = cli.config();
            let backend = cli.backend(&config)?;
            let state = AppState::new(backend, SessionStore::new(&cli.session_dir), config);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(serve(state, *addr))?;
        }
        Cmd::RunScenario { path, record: rec } => {
            let scenario = Scenario::load(path)?;
            if *rec {
                let updated = record(&scenario)?;
                let text = serde_json::to_string_pretty(&updated)? + "\n";
                std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
                println!("recorded {}", path.display());
                return Ok(ExitCode::SUCCESS);
            }
            match run_scenario(&scenario) {
                Ok(run) => {
                    let mut out = std::io::stdout().lock();
                    for line in &run.lines {
                        writeln!(out, "{}: {}\n", line.speaker, line.text)?;
                    }
                    writeln!(out, "scenario passed ({:?})", run.session.state())?;
                }
                Err(e) => {
                    eprintln!("scenario failed: {e}");
                    return Ok(ExitCode::FAILURE);
                }
            }
        }
        Cmd::Export { session_id, format } => {
            let format: ExportFormat = format.parse().map_err(anyhow::Error::msg)?;
            let session = SessionStore::new(&cli.session_dir).load(session_id)?;
            print!("{}", export_session(&session, format));
        }
    }
    Ok(ExitCode::SUCCESS)
}
