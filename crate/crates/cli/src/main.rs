use std::fmt::Display;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use serde::Serialize;
use teleop_client::{run_latency_bench, BridgeClient, ClientError, HttpClient};
use teleop_core::accuracy::{run_accuracy_bench, AccuracyBenchConfig};
use teleop_core::bench::run_grasp_bench;
use teleop_core::replay::{parse_script, run_replay};
use teleop_core::report::{write_report, ReportKind};
use teleop_core::scenario::Scenario;
use teleop_core::wire::{tag_table_markdown, ScaleConfig, WireFrame};
use teleop_service::{Bridge, BridgeConfig};
use tracing_subscriber::EnvFilter;

/// Thresholds behind the benchmark exit codes.
const MIN_GRASP_SUCCESS: f64 = 0.45;
const MAX_ONE_WAY_MS: f64 = 16.4;
const MAX_PROCESSING_MS: f64 = 2.0;
const MAX_JOINT_MAE: f64 = 1e-4;

#[derive(Parser)]
#[command(name = "teleop", version, about = "Teleoperation bridge for simulated UR5 and Panda arms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the bridge until interrupted.
    Serve {
        #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
        bind: IpAddr,
        /// Wire protocol port; 0 picks a free one.
        #[arg(long, default_value_t = 5005)]
        port: u16,
        /// HTTP and websocket port.
        #[arg(long, default_value_t = 8080)]
        http_port: u16,
        #[arg(long)]
        no_http: bool,
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Fixed-point scale of pose components, 100 or 1000.
        #[arg(long, default_value_t = 100)]
        scale: u32,
        /// Replace the scenario objects with seeded random ones.
        #[arg(long)]
        seed: Option<u64>,
        /// Simulated seconds between telemetry frames.
        #[arg(long)]
        telemetry_period: Option<f64>,
        /// Write the final metrics here instead of stdout.
        #[arg(long)]
        metrics_out: Option<PathBuf>,
    },
    /// Play a script of timed frames against an in-process world.
    Replay {
        script: PathBuf,
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        scale: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Joint, tilt and pose mode sweeps.
    BenchAccuracy {
        #[arg(long, default_value_t = 20)]
        samples: u32,
        #[arg(long, default_value_t = 2)]
        repetitions: u32,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        scale: u32,
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded autonomous pick-and-place trials.
    BenchGrasp {
        #[arg(long, default_value_t = 40)]
        trials: u32,
        #[arg(long)]
        seed: Option<u64>,
        /// Joint travel in degrees above which a carried object slips; `inf` disables drops.
        #[arg(long)]
        theta_drop: Option<f64>,
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Echo round trips against a bridge; starts one in-process when no address is given.
    BenchLatency {
        #[arg(long)]
        addr: Option<SocketAddr>,
        /// HTTP address of the bridge, for its processing time.
        #[arg(long)]
        http: Option<SocketAddr>,
        #[arg(short, long, default_value_t = 1000)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Send frames such as "5001 1" and print what comes back.
    Send {
        #[arg(long, default_value = "127.0.0.1:5005")]
        addr: SocketAddr,
        frames: Vec<String>,
        /// How long to keep printing replies.
        #[arg(long, default_value_t = 500)]
        wait_ms: u64,
    },
    /// Print the built-in scenario as TOML, a starting point for `--scenario` files.
    Scenario {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the tag table as markdown.
    Tags {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    /// Bad arguments, files or ports.
    Config(String),
    /// A benchmark missed its threshold or a run failed.
    Run(String),
}

fn config(e: impl Display) -> Failure {
    Failure::Config(e.to_string())
}

fn run_err(e: impl Display) -> Failure {
    Failure::Run(e.to_string())
}

fn load_scenario(path: Option<&Path>) -> Result<Scenario, Failure> {
    match path {
        Some(p) => Scenario::from_file(p).map_err(|e| config(format!("{}: {e}", p.display()))),
        None => Ok(Scenario::default()),
    }
}

fn scale(value: u32) -> Result<ScaleConfig, Failure> {
    ScaleConfig::new(value).map_err(config)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| config(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn report<T: Serialize>(kind: ReportKind, value: &T, out: Option<&Path>) -> Result<(), Failure> {
    emit(out, &write_report(kind, value).map_err(run_err)?)
}

async fn serve(
    addr: SocketAddr,
    http: Option<SocketAddr>,
    scenario: Scenario,
    scale: ScaleConfig,
    seed: Option<u64>,
    metrics_out: Option<&Path>,
) -> Result<(), Failure> {
    let bridge = Bridge::start(BridgeConfig {
        wire_addr: addr,
        http_addr: http,
        scenario,
        scale,
        seed,
    })
    .await
    .map_err(config)?;
    println!("wire listening on {}", bridge.wire_addr());
    if let Some(a) = bridge.http_addr() {
        println!("http listening on {a}");
    }
    shutdown_signal().await;
    let metrics = bridge.shutdown().await;
    report(ReportKind::Metrics, &metrics, metrics_out)
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        let mut term = signal(SignalKind::terminate()).expect("install SIGTERM handler");
        tokio::select! {
            _ = tokio::signal::ctrl_c() => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    let _ = tokio::signal::ctrl_c().await;
}

async fn send(addr: SocketAddr, frames: &[String], wait: Duration) -> Result<(), Failure> {
    let frames: Vec<WireFrame> = frames
        .iter()
        .map(|f| WireFrame::parse_line(f.trim()).map_err(|e| config(format!("'{f}': {e}"))))
        .collect::<Result<_, _>>()?;
    let mut client = BridgeClient::connect(addr).await.map_err(config)?;
    client.send_all(&frames).await.map_err(run_err)?;
    loop {
        match client.recv_matching(wait, |_| true).await {
            Ok(f) => println!("{f}"),
            Err(ClientError::Timeout(_)) => return Ok(()),
            Err(e) => return Err(run_err(e)),
        }
    }
}

async fn bench_latency(addr: Option<SocketAddr>, http: Option<SocketAddr>, n: usize, out: Option<&Path>) -> Result<(), Failure> {
    if n == 0 {
        return Err(config("n must be at least 1"));
    }
    let local = match addr {
        Some(_) => None,
        None => Some(
            Bridge::start(BridgeConfig::loopback(Scenario::default()))
                .await
                .map_err(config)?,
        ),
    };
    let wire = addr.or(local.as_ref().map(Bridge::wire_addr)).expect("one of them is set");
    let http = http.or(local.as_ref().and_then(Bridge::http_addr)).map(HttpClient::for_addr);
    let result = run_latency_bench(wire, http.as_ref(), n).await;
    if let Some(b) = local {
        b.shutdown().await;
    }
    let r = result.map_err(run_err)?;
    report(ReportKind::Latency, &r, out)?;
    eprintln!(
        "rtt mean {:.4} ms, one-way {:.4} ms, p99 {:.4} ms, bridge processing {}",
        r.rtt_mean,
        r.one_way,
        r.rtt_p99,
        r.bridge_processing.map_or("n/a".into(), |p| format!("{p:.4} ms"))
    );
    if r.one_way > MAX_ONE_WAY_MS || r.bridge_processing.is_some_and(|p| p > MAX_PROCESSING_MS) {
        return Err(run_err(format!(
            "latency above {MAX_ONE_WAY_MS} ms one-way or {MAX_PROCESSING_MS} ms processing"
        )));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let runtime = || {
        tokio::runtime::Builder::new_multi_thread()
            .enable_all()
            .build()
            .map_err(run_err)
    };
    match cli.command {
        Command::Serve {
            bind,
            port,
            http_port,
            no_http,
            scenario,
            scale: s,
            seed,
            telemetry_period,
            metrics_out,
        } => {
            let mut scenario = load_scenario(scenario.as_deref())?;
            if let Some(p) = telemetry_period {
                scenario.telemetry_period = p;
                scenario.validate().map_err(config)?;
            }
            let http = (!no_http).then_some(SocketAddr::new(bind, http_port));
            runtime()?.block_on(serve(
                SocketAddr::new(bind, port),
                http,
                scenario,
                scale(s)?,
                seed,
                metrics_out.as_deref(),
            ))
        }
        Command::Replay {
            script,
            scenario,
            scale: s,
            out,
        } => {
            let scenario = load_scenario(scenario.as_deref())?;
            let text = std::fs::read_to_string(&script).map_err(|e| config(format!("{}: {e}", script.display())))?;
            let lines = parse_script(&text).map_err(|e| config(format!("{}: {e}", script.display())))?;
            let r = run_replay(&scenario, &lines, scale(s)?).map_err(run_err)?;
            for m in &r.accuracy {
                eprintln!(
                    "{:?}: {} samples, MAE {:.3e} {u}, std {:.3e} {u}",
                    m.mode,
                    m.accuracy.samples,
                    m.accuracy.mae,
                    m.accuracy.std_dev,
                    u = m.unit
                );
            }
            report(ReportKind::Replay, &r, out.as_deref())
        }
        Command::BenchAccuracy {
            samples,
            repetitions,
            seed,
            scale: s,
            scenario,
            out,
        } => {
            let scenario = load_scenario(scenario.as_deref())?;
            let cfg = AccuracyBenchConfig {
                samples,
                repetitions,
                seed,
                scale: scale(s)?,
            };
            if samples == 0 || repetitions == 0 {
                return Err(config("samples and repetitions must be at least 1"));
            }
            let r = run_accuracy_bench(&scenario, &cfg).map_err(run_err)?;
            report(ReportKind::Accuracy, &r, out.as_deref())?;
            let mut ok = true;
            for m in &r.joint_modes {
                eprintln!("{:?}: MAE {:.3e} rad, std {:.3e} rad", m.mode, m.accuracy.mae, m.accuracy.std_dev);
                ok &= m.accuracy.mae <= MAX_JOINT_MAE && m.accuracy.std_dev <= MAX_JOINT_MAE;
            }
            let pose_limit = 1.0 / f64::from(s);
            eprintln!(
                "Pose: max position error {:.3e} m (limit {pose_limit}), {} unreachable",
                r.pose_max_error, r.pose_unreachable
            );
            ok &= r.pose_max_error <= pose_limit;
            if ok {
                Ok(())
            } else {
                Err(run_err("accuracy outside its limits"))
            }
        }
        Command::BenchGrasp {
            trials,
            seed,
            theta_drop,
            scenario,
            out,
        } => {
            let mut scenario = load_scenario(scenario.as_deref())?;
            if trials == 0 {
                return Err(config("trials must be at least 1"));
            }
            if let Some(t) = theta_drop {
                scenario.world.grasp.theta_drop_deg = t;
                scenario.validate().map_err(config)?;
            }
            let seed = seed.unwrap_or(scenario.seed);
            let r = run_grasp_bench(&scenario, trials, seed).map_err(run_err)?;
            report(ReportKind::GraspBench, &r, out.as_deref())?;
            eprintln!(
                "{} of {} placed ({} stopped), success fraction {:.3}; reference 0.55",
                r.successes, r.trials, r.stopped, r.success_fraction
            );
            if r.success_fraction < MIN_GRASP_SUCCESS {
                return Err(run_err(format!("success fraction below {MIN_GRASP_SUCCESS}")));
            }
            Ok(())
        }
        Command::BenchLatency { addr, http, n, out } => runtime()?.block_on(bench_latency(addr, http, n, out.as_deref())),
        Command::Send { addr, frames, wait_ms } => runtime()?.block_on(send(addr, &frames, Duration::from_millis(wait_ms))),
        Command::Scenario { out } => emit(out.as_deref(), &Scenario::default().to_toml_string()),
        Command::Tags { out } => emit(out.as_deref(), &tag_table_markdown()),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
