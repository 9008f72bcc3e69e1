//! Wiring of storage, corpus, provider and domain services.

use std::path::Path;
use std::sync::{Arc, RwLock};

use codepace_core::learning::{Clock, LearningService, SystemClock};
use codepace_core::provider::{ProviderConfig, TextProvider};
use codepace_core::rag::RagPipeline;
use codepace_core::storage::{FileStore, Storage};
use codepace_core::Corpus;

use crate::auth::{AuthService, DEFAULT_PBKDF2_ROUNDS};

/// Shared state behind every request handler.
#[derive(Clone)]
pub struct AppState {
    pub auth: Arc<AuthService>,
    pub learning: Arc<LearningService>,
}

/// Everything needed to assemble an [`AppState`]; tests swap parts freely.
pub struct AppParts {
    pub storage: Arc<dyn Storage>,
    pub corpus: Corpus,
    pub provider: Arc<dyn TextProvider>,
    pub clock: Arc<dyn Clock>,
    pub seed: Option<u64>,
    pub pbkdf2_rounds: u32,
}

impl AppParts {
    /// Opens the file store in `data_dir`, loads the persisted corpus and
    /// builds the provider named by the environment.
    pub fn from_data_dir(data_dir: &Path) -> anyhow::Result<Self> {
        let storage: Arc<dyn Storage> = Arc::new(FileStore::open(data_dir)?);
        let corpus = Corpus::load(storage.as_ref())?;
        let provider = ProviderConfig::from_env()?.build()?;
        Ok(AppParts {
            storage,
            corpus,
            provider,
            clock: Arc::new(SystemClock),
            seed: None,
            pbkdf2_rounds: DEFAULT_PBKDF2_ROUNDS,
        })
    }

    pub fn into_state(self) -> AppState {
        let learning = LearningService::new(
            Arc::new(RwLock::new(self.corpus)),
            RagPipeline::new(self.provider),
            self.storage.clone(),
            self.clock.clone(),
            self.seed,
        );
        AppState {
            auth: Arc::new(AuthService::new(self.storage, self.clock, self.pbkdf2_rounds)),
            learning: Arc::new(learning),
        }
    }
}
