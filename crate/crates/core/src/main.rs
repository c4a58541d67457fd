use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;
use zelig::runtime::{parse_trace, render_log, RuntimeError};
use zelig::script::{load_script, validate_script, ScriptDoc};
use zelig::service::{Service, ServiceConfig};
use zelig::RuntimeConfig;

const EXIT_INVALID: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_RUNTIME: u8 = 3;
const EXIT_GOLDEN: u8 = 4;

/// Fuzzy interactive-drama engine.
///
/// Set RUST_LOG (e.g. RUST_LOG=zelig=debug) for diagnostics on stderr.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a script. Prints a readable report on stderr and one
    /// tab-separated finding per line on stdout.
    ///
    /// Exit status: 0 valid, 1 validation errors, 2 unreadable or unparsable.
    Validate { file: PathBuf },
    /// Replay a trace and print the action log as JSON Lines.
    ///
    /// Exit status: 0 ok, 1 validation errors, 2 unreadable input,
    /// 3 runtime failure, 4 golden mismatch.
    Run {
        file: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Firing threshold for rules and matrix cells.
        #[arg(long)]
        theta: Option<f64>,
        /// Quiet ticks before a NOTP rule fires.
        #[arg(long)]
        tau: Option<u64>,
        #[arg(long)]
        max_ticks: Option<u64>,
        /// Log idle behavior chosen by character agents.
        #[arg(long)]
        agent_idle: bool,
        /// Compare the log against this file instead of printing it.
        #[arg(long)]
        golden: Option<PathBuf>,
    },
    /// Host live sessions over HTTP and WebSocket.
    Serve {
        file: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Milliseconds per tick; 0 disables the ticker.
        #[arg(long, default_value_t = 1000)]
        tick_ms: u64,
        /// Seconds a session survives without a connected client.
        #[arg(long, default_value_t = 60)]
        grace_secs: u64,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        tau: Option<u64>,
        /// Write each session's received events to <dir>/<id>.trace.jsonl.
        #[arg(long)]
        log_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let code = match Cli::parse().command {
        Command::Validate { file } => validate(&file),
        Command::Run { file, trace, seed, theta, tau, max_ticks, agent_idle, golden } => {
            let mut config = RuntimeConfig { agent_idle, ..RuntimeConfig::default() };
            apply_overrides(&mut config, theta, tau);
            if let Some(m) = max_ticks {
                config.max_ticks = m;
            }
            run(&file, &trace, config, seed, golden.as_deref())
        }
        Command::Serve { file, port, host, tick_ms, grace_secs, theta, tau, log_dir } => {
            let mut runtime = RuntimeConfig::default();
            apply_overrides(&mut runtime, theta, tau);
            let config = ServiceConfig {
                runtime,
                tick: (tick_ms > 0).then(|| Duration::from_millis(tick_ms)),
                grace: Duration::from_secs(grace_secs),
                log_dir,
                ..ServiceConfig::default()
            };
            serve(&file, &host, port, config)
        }
    };
    ExitCode::from(code)
}

fn apply_overrides(config: &mut RuntimeConfig, theta: Option<f64>, tau: Option<u64>) {
    if let Some(t) = theta {
        config.theta_fire = t;
    }
    if let Some(t) = tau {
        config.tau_notp = t;
    }
}

fn load(file: &Path) -> Result<ScriptDoc, u8> {
    load_script(file).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_PARSE
    })
}

fn validate(file: &Path) -> u8 {
    let doc = match load(file) {
        Ok(d) => d,
        Err(c) => return c,
    };
    let report = validate_script(&doc);
    eprintln!("{report}");
    print!("{}", report.to_records());
    if report.is_valid() {
        0
    } else {
        EXIT_INVALID
    }
}

fn run(file: &Path, trace: &Path, config: RuntimeConfig, seed: u64, golden: Option<&Path>) -> u8 {
    let doc = match load(file) {
        Ok(d) => d,
        Err(c) => return c,
    };
    let events = match std::fs::read_to_string(trace) {
        Ok(text) => match parse_trace(&text) {
            Ok(ev) => ev,
            Err(e) => {
                eprintln!("error: {}: line {}: {}", trace.display(), e.line, e.message);
                return EXIT_PARSE;
            }
        },
        Err(e) => {
            eprintln!("error: {}: {e}", trace.display());
            return EXIT_PARSE;
        }
    };
    let state = match zelig::run_trace(&doc, &events, config, seed) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return match e.runtime() {
                RuntimeError::InvalidScript(_) => EXIT_INVALID,
                RuntimeError::InvalidConfig(_) => EXIT_PARSE,
                _ => EXIT_RUNTIME,
            };
        }
    };
    let out = render_log(&state.log_header(), &state.log);
    let Some(golden) = golden else {
        print!("{out}");
        return 0;
    };
    let expected = match std::fs::read_to_string(golden) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", golden.display());
            return EXIT_PARSE;
        }
    };
    if expected == out {
        eprintln!("log matches {}", golden.display());
        return 0;
    }
    let (a, b): (Vec<_>, Vec<_>) = (expected.lines().collect(), out.lines().collect());
    let i = a.iter().zip(&b).position(|(x, y)| x != y).unwrap_or(a.len().min(b.len()));
    eprintln!("log differs from {} at line {}", golden.display(), i + 1);
    eprintln!("- {}", a.get(i).unwrap_or(&"<end of file>"));
    eprintln!("+ {}", b.get(i).unwrap_or(&"<end of file>"));
    EXIT_GOLDEN
}

fn serve(file: &Path, host: &str, port: u16, config: ServiceConfig) -> u8 {
    let doc = match load(file) {
        Ok(d) => d,
        Err(c) => return c,
    };
    let svc: Arc<Service> = match Service::new(doc, config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
    };
    rt.block_on(async move {
        let listener = match tokio::net::TcpListener::bind((host, port)).await {
            Ok(l) => l,
            Err(e) => {
                eprintln!("error: cannot bind {host}:{port}: {e}");
                return EXIT_RUNTIME;
            }
        };
        if let Ok(addr) = listener.local_addr() {
            tracing::info!("listening on {addr}");
            eprintln!("listening on http://{addr}");
        }
        match zelig::service::serve(listener, svc).await {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_RUNTIME
            }
        }
    })
}
