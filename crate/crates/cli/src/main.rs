mod analyze;

use std::net::{Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use rpys_core::script::{execute, parse_script, ExecContext};

#[derive(Parser)]
#[command(
    name = "rpys",
    version,
    about = "Reference publication year spectroscopy"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute a script file. Exit code 1 on a script error, 2 on an I/O error.
    Run {
        script: PathBuf,
        /// Print per-command wall time.
        #[arg(long)]
        timings: bool,
    },
    /// Parse a script without running it.
    Check { script: PathBuf },
    /// Import (or load), disambiguate, filter and export in one go.
    Analyze(Box<analyze::Args>),
    /// Start the local HTTP+JSON analysis service.
    Serve {
        /// 0 picks a free port.
        #[arg(long, default_value_t = 0)]
        port: u16,
        /// Open the UI in the default browser once listening.
        #[arg(long)]
        open: bool,
        /// Directory with the built UI, served at `/`.
        #[arg(long)]
        assets: Option<PathBuf>,
        /// Upload cap in bytes.
        #[arg(long, default_value_t = rpys_service::DEFAULT_MAX_UPLOAD)]
        max_upload: usize,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Run { script, timings } => return run(&script, timings),
        Cmd::Check { script } => return check(&script),
        Cmd::Analyze(args) => analyze::run(*args),
        Cmd::Serve {
            port,
            open,
            assets,
            max_upload,
        } => serve(port, open, assets, max_upload),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

const EXIT_SCRIPT: u8 = 1;
const EXIT_IO: u8 = 2;

fn read_script(path: &PathBuf) -> Result<String, ExitCode> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(EXIT_IO)
    })
}

fn run(path: &PathBuf, timings: bool) -> ExitCode {
    let source = match read_script(path) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let prog = match parse_script(&source) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            return ExitCode::from(EXIT_SCRIPT);
        }
    };
    // Relative file arguments resolve against the script's directory.
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(std::path::Path::new("."));
    let mut ctx = ExecContext::new(dir);
    match execute(&prog, &mut ctx) {
        Ok(report) => {
            print!("{}", report.render(timings));
            ExitCode::SUCCESS
        }
        Err(failure) => {
            print!("{}", failure.report.render(timings));
            eprintln!("{}: {}", path.display(), failure.error);
            ExitCode::from(if failure.error.is_io() {
                EXIT_IO
            } else {
                EXIT_SCRIPT
            })
        }
    }
}

fn check(path: &PathBuf) -> ExitCode {
    let source = match read_script(path) {
        Ok(s) => s,
        Err(code) => return code,
    };
    match parse_script(&source) {
        Ok(prog) => {
            println!("{}: {} commands", path.display(), prog.commands.len());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            ExitCode::from(EXIT_SCRIPT)
        }
    }
}

#[tokio::main]
async fn serve(
    port: u16,
    open: bool,
    assets: Option<PathBuf>,
    max_upload: usize,
) -> anyhow::Result<()> {
    if let Some(dir) = &assets {
        anyhow::ensure!(
            dir.is_dir(),
            "assets directory {} does not exist",
            dir.display()
        );
    }
    let addr = SocketAddr::from((Ipv4Addr::LOCALHOST, port));
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("cannot bind {addr}"))?;
    let url = format!("http://{}/", listener.local_addr()?);
    // Scripts and tests read the URL from stdout.
    println!("listening on {url}");
    if open {
        if let Err(e) = open::that_detached(&url) {
            tracing::warn!("could not open a browser: {e}");
        }
    }
    let app = rpys_service::router(rpys_service::ServiceConfig { max_upload, assets });
    rpys_service::serve(listener, app).await?;
    Ok(())
}
