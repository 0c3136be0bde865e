use std::io::Write;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand};

use sphere_stage::audio::tones::generate_bank;
use sphere_stage::lights::{NodeBank, DEFAULT_LIGHT_PORT};
use sphere_stage::runtime::{
    load_config, run_session, IngestConfig, InstallationConfig, SessionError, SessionOptions, SessionReport,
    CONFIG_ENV,
};

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "sphere-stage", version, about = "Sound and light engine for tracked floating spheres")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run live from the source named in the config.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Append engine events to this JSON-lines file.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        wav: Option<PathBuf>,
    },
    /// Replay a recorded `.sjl` session.
    Replay {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        /// Playback speed; 0 runs as fast as possible.
        #[arg(long, default_value_t = 0.0)]
        speed: f64,
        #[arg(long)]
        wav: Option<PathBuf>,
        #[arg(long)]
        log: Option<PathBuf>,
        /// Write the session report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Capture frames from the live source into a `.sjl` file while running.
    Record {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Simulate the light boards and print every accepted frame.
    Nodes {
        #[arg(long, default_value_t = 2)]
        count: u16,
        #[arg(long, default_value_t = DEFAULT_LIGHT_PORT)]
        port: u16,
        #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::UNSPECIFIED))]
        bind: IpAddr,
    },
    /// Write the placeholder sample bank and its manifest.
    GenSamples {
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    let stop = Arc::new(AtomicBool::new(false));
    {
        let stop = Arc::clone(&stop);
        if let Err(e) = ctrlc::set_handler(move || stop.store(true, Ordering::Relaxed)) {
            log::warn!("no Ctrl-C handler: {e}");
        }
    }
    match cli.command {
        Command::Run { config, log, wav } => {
            session(config.as_deref(), SessionOptions { wav, event_log: log, stop, ..Default::default() }, None, |_| {})
        }
        Command::Replay { config, input, speed, wav, log, report } => session(
            config.as_deref(),
            SessionOptions { wav, event_log: log, stop, ..Default::default() },
            report,
            |cfg| cfg.ingest = IngestConfig::Replay { path: input, speed },
        ),
        Command::Record { config, output } => session(
            config.as_deref(),
            SessionOptions { record: Some(output), stop, ..Default::default() },
            None,
            |_| {},
        ),
        Command::Nodes { count, port, bind } => nodes(count, SocketAddr::new(bind, port), &stop),
        Command::GenSamples { out } => match generate_bank(&out) {
            Ok(manifest) => {
                println!("{}", manifest.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                log::error!("{}: {e}", out.display());
                ExitCode::from(EXIT_RUNTIME)
            }
        },
    }
}

fn config_or_default(path: Option<&Path>) -> Result<InstallationConfig, SessionError> {
    if path.is_none() && std::env::var_os(CONFIG_ENV).is_none() {
        log::info!("no config given, using defaults");
        return Ok(InstallationConfig::default());
    }
    Ok(load_config(path)?)
}

fn session(
    config: Option<&Path>,
    opts: SessionOptions,
    report_path: Option<PathBuf>,
    adjust: impl FnOnce(&mut InstallationConfig),
) -> ExitCode {
    let result = config_or_default(config).and_then(|mut cfg| {
        adjust(&mut cfg);
        let pcm_on_stdout = cfg.audio.raw_pcm_out.as_deref() == Some(Path::new("-"));
        run_session(&cfg, &opts).map(|report| (report, pcm_on_stdout))
    });
    match result {
        Ok((report, pcm_on_stdout)) => match emit_report(&report, report_path.as_deref(), pcm_on_stdout) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                log::error!("report: {e}");
                ExitCode::from(EXIT_RUNTIME)
            }
        },
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn emit_report(report: &SessionReport, path: Option<&Path>, pcm_on_stdout: bool) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(std::io::Error::other)? + "\n";
    match path {
        Some(p) => std::fs::write(p, text),
        None if pcm_on_stdout => std::io::stderr().write_all(text.as_bytes()),
        None => std::io::stdout().write_all(text.as_bytes()),
    }
}

fn nodes(count: u16, addr: SocketAddr, stop: &AtomicBool) -> ExitCode {
    if count == 0 || count > 256 {
        log::error!("--count must lie in 1..=256");
        return ExitCode::from(EXIT_CONFIG);
    }
    let ids = (0..count).map(|i| i as u8);
    let bank = NodeBank::spawn(addr, ids, |entry| {
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "{}", serde_json::to_string(entry).expect("log entries serialize"));
        let _ = out.flush();
    });
    let bank = match bank {
        Ok(b) => b,
        Err(e) => {
            log::error!("{addr}: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    log::info!("{count} light nodes listening on {}", bank.local_addr());
    while !stop.load(Ordering::Relaxed) {
        std::thread::sleep(Duration::from_millis(100));
    }
    for node in bank.stop() {
        log::info!("node {}: {} accepted, {} dropped", node.sphere_id, node.log.len(), node.dropped);
    }
    ExitCode::SUCCESS
}
