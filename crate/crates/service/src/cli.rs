//! Administrative command line.

use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use codepace_core::ingest::{self, ChunkingConfig};
use codepace_core::learning::SystemClock;
use codepace_core::provider::{ProviderConfig, TextProvider};
use codepace_core::storage::{FileStore, Storage};
use codepace_core::Corpus;
use rand::distr::{Alphanumeric, SampleString};

use crate::app::AppParts;
use crate::auth::{AuthService, DEFAULT_PBKDF2_ROUNDS};
use crate::server::serve;

#[derive(Debug, Parser)]
#[command(name = "codepace", version, about = "Self-paced coding practice service")]
pub struct Cli {
    /// Directory holding records, logs and the vector index.
    #[arg(long, global = true, env = "DATA_DIR", default_value = "data")]
    pub data_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Add records to the knowledge base and index them.
    Ingest {
        #[command(subcommand)]
        what: IngestKind,
    },
    /// Vector index maintenance.
    Index {
        #[command(subcommand)]
        action: IndexAction,
    },
    /// Run the HTTP service.
    Serve {
        /// Port to listen on; 0 picks a free one.
        #[arg(long, env = "PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
    },
    /// User administration.
    User {
        #[command(subcommand)]
        action: UserAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum IngestKind {
    /// Line-delimited JSON question records.
    Questions { file: PathBuf },
    /// A JSON intents document.
    Intents { file: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum IndexAction {
    /// Re-embed every stored record into a fresh index.
    Rebuild,
}

#[derive(Debug, Subcommand)]
pub enum UserAction {
    /// Register a user; a random password is generated when none is given.
    Add {
        name: String,
        #[arg(long)]
        password: Option<String>,
    },
}

/// Parses arguments and runs the command, returning the process exit code:
/// 0 on success, 1 on failure, 2 on usage errors.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn provider() -> anyhow::Result<Arc<dyn TextProvider>> {
    Ok(ProviderConfig::from_env()?.build()?)
}

fn open_store(data_dir: &Path) -> anyhow::Result<Arc<dyn Storage>> {
    Ok(Arc::new(FileStore::open(data_dir)?))
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Ingest { what } => {
            let store = open_store(&cli.data_dir)?;
            let provider = provider()?;
            let mut corpus = Corpus::load(store.as_ref())?;
            let (count, noun) = match what {
                IngestKind::Questions { file } => {
                    (ingest::ingest_questions(&file, &mut corpus, provider.as_ref())?, "questions")
                }
                IngestKind::Intents { file } => {
                    (ingest::ingest_intents(&file, &mut corpus, provider.as_ref())?, "intent patterns")
                }
            };
            corpus.save(store.as_ref())?;
            println!("ingested {count} {noun} (index holds {} chunks)", corpus.index.len());
        }
        Command::Index {
            action: IndexAction::Rebuild,
        } => {
            let store = open_store(&cli.data_dir)?;
            let provider = provider()?;
            let corpus = Corpus::load(store.as_ref())?;
            let rebuilt = ingest::rebuild(&corpus.knowledge, &ChunkingConfig::default(), provider.as_ref())?;
            rebuilt.save(store.as_ref())?;
            println!("rebuilt index with {} chunks", rebuilt.index.len());
        }
        Command::User {
            action: UserAction::Add { name, password },
        } => {
            let store = open_store(&cli.data_dir)?;
            let auth = AuthService::new(store, Arc::new(SystemClock), DEFAULT_PBKDF2_ROUNDS);
            let (password, generated) = match password {
                Some(p) => (p, false),
                None => (Alphanumeric.sample_string(&mut rand::rng(), 16), true),
            };
            let user = auth.register(&name, &password)?;
            println!("added user {}", user.user_id);
            if generated {
                println!("password: {password}");
            }
        }
        Command::Serve { port, host } => {
            let state = AppParts::from_data_dir(&cli.data_dir)?.into_state();
            let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(SocketAddr::new(host, port)).await?;
                let addr = listener.local_addr()?;
                println!("listening on http://{addr}");
                std::io::stdout().flush()?;
                serve(state, listener, async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await?;
                anyhow::Ok(())
            })?;
        }
    }
    Ok(())
}
