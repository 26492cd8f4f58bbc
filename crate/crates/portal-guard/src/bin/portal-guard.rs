use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use portal_guard::config::ConfigOverrides;
use portal_guard::gateway::server;
use portal_guard::{Gateway, SessionMode};
use tokio::net::TcpListener;
use tracing_subscriber::EnvFilter;

#[derive(Debug, Parser)]
#[command(
    name = "portal-guard",
    version,
    about = "Serve a directory behind a login portal"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the gateway.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    bind_address: Option<String>,
    #[arg(long)]
    portal_path: Option<String>,
    #[arg(long)]
    first_page: Option<String>,
    #[arg(long)]
    protected_root: Option<PathBuf>,
    #[arg(long)]
    cookie_name: Option<String>,
    #[arg(long)]
    credentials_path: Option<PathBuf>,
    #[arg(long)]
    mode: Option<SessionMode>,
}

impl ServeArgs {
    fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            bind_address: self.bind_address.clone(),
            portal_path: self.portal_path.clone(),
            first_page: self.first_page.clone(),
            protected_root: self.protected_root.clone(),
            cookie_name: self.cookie_name.clone(),
            credentials_path: self.credentials_path.clone(),
            mode: self.mode,
        }
    }
}

async fn serve(args: ServeArgs) -> Result<(), Box<dyn std::error::Error>> {
    let file = match &args.config {
        Some(path) => ConfigOverrides::load(path)?,
        None => ConfigOverrides::default(),
    };
    let config = file.merged_with(args.overrides()).finish()?;
    let gateway = Arc::new(Gateway::from_config(config)?);
    let listener = TcpListener::bind(&gateway.config().bind_address).await?;
    tracing::info!(
        address = %listener.local_addr()?,
        portal = %gateway.config().portal_path,
        root = %gateway.config().protected_root.display(),
        mode = %gateway.config().mode,
        "serving"
    );
    server::serve(listener, gateway, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await?;
    Ok(())
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")),
        )
        .init();
    let Cli {
        command: Command::Serve(args),
    } = Cli::parse();
    match serve(args).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            tracing::error!("{err}");
            ExitCode::FAILURE
        }
    }
}
