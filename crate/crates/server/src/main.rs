use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use relis_core::installer::compile;
use relis_core::store::Store;
use relis_dsl::{parse_bytes, pretty_print, validate, Diagnostic, ValidatedModel};
use relis_server::{router, AppState, Config};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "relis", version, about = "Model-driven systematic review server")]
struct Cli {
    /// Configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Port to listen on; overrides the file and RELIS_PORT.
    #[arg(long, global = true)]
    port: Option<u16>,
    /// Data directory; overrides the file and RELIS_DATA_DIR.
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API (the default).
    Serve,
    /// Validate a model and print its diagnostics.
    Check { file: PathBuf },
    /// Print a model in canonical form.
    Fmt {
        file: PathBuf,
        /// Rewrite the file in place.
        #[arg(long)]
        write: bool,
    },
    /// Print the installation plan of a model as JSON.
    Compile { file: PathBuf },
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command.unwrap_or(Command::Serve) {
        Command::Serve => {
            let mut cfg = Config::load(cli.config.as_deref(), |k| std::env::var(k).ok())?;
            if let Some(port) = cli.port {
                cfg.port = port;
            }
            if let Some(dir) = cli.data_dir {
                cfg.data_dir = dir;
            }
            serve(cfg)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { file } => Ok(match load(&file)? {
            Ok(_) => {
                println!("{}: ok", file.display());
                ExitCode::SUCCESS
            }
            Err(diags) => report(&file, &diags),
        }),
        Command::Fmt { file, write } => Ok(match load(&file)? {
            Ok(model) => {
                let text = pretty_print(&model);
                if write {
                    std::fs::write(&file, text).with_context(|| format!("writing {}", file.display()))?;
                } else {
                    print!("{text}");
                }
                ExitCode::SUCCESS
            }
            Err(diags) => report(&file, &diags),
        }),
        Command::Compile { file } => Ok(match load(&file)? {
            Ok(model) => {
                println!("{}", serde_json::to_string_pretty(&compile(&model))?);
                ExitCode::SUCCESS
            }
            Err(diags) => report(&file, &diags),
        }),
    }
}

fn load(file: &Path) -> Result<Result<ValidatedModel, Vec<Diagnostic>>> {
    let bytes = std::fs::read(file).with_context(|| format!("reading {}", file.display()))?;
    Ok(parse_bytes(&bytes).and_then(validate))
}

fn report(file: &Path, diags: &[Diagnostic]) -> ExitCode {
    for d in diags {
        eprintln!("{}:{d}", file.display());
    }
    ExitCode::FAILURE
}

#[tokio::main]
async fn serve(cfg: Config) -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let store = Store::open(&cfg.data_dir).with_context(|| format!("opening {}", cfg.data_dir.display()))?;
    if let Some(admin) = &cfg.admin {
        if store.users().is_empty() {
            let name = admin.display_name.as_deref().unwrap_or(&admin.login);
            store.create_user(&admin.login, name, &admin.password, true)?;
            tracing::info!(login = %admin.login, "created bootstrap administrator");
        }
    }
    let app = router(AppState::new(store, cfg.session_ttl()));
    let listener = tokio::net::TcpListener::bind(cfg.addr())
        .await
        .with_context(|| format!("binding {}", cfg.addr()))?;
    tracing::info!(addr = %cfg.addr(), data = %cfg.data_dir.display(), "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
