use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use tracing_subscriber::EnvFilter;
use velocity_service::{app, Config};

fn usage() -> ExitCode {
    eprintln!("usage: velocity-service [CONFIG.toml]");
    ExitCode::from(2)
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();

    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut config = match args.as_slice() {
        [] => Config::default(),
        [flag] if flag == "-h" || flag == "--help" => return usage(),
        [path] => match Config::load(&PathBuf::from(path)) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("{e}");
                return ExitCode::FAILURE;
            }
        },
        _ => return usage(),
    };
    if let Err(e) = config.apply_env(|k| std::env::var(k).ok()) {
        eprintln!("{e}");
        return ExitCode::FAILURE;
    }

    let addr = SocketAddr::from(([0, 0, 0, 0], config.port));
    let mode = config.mode;
    let (session, router) = match app(config) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("cannot start session: {e}");
            return ExitCode::FAILURE;
        }
    };
    let snap = session.snapshot();
    tracing::info!(height = snap.height, ?mode, "session ready");

    let listener = match tokio::net::TcpListener::bind(addr).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("bind {addr}: {e}");
            return ExitCode::FAILURE;
        }
    };
    tracing::info!("listening on {addr}");
    let served = axum::serve(listener, router)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await;
    // Blocks until queued commands finish; keep it off the runtime threads.
    let _ = tokio::task::spawn_blocking(move || session.shutdown()).await;
    match served {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("server error: {e}");
            ExitCode::FAILURE
        }
    }
}
