//! HTTP service and shared command-line plumbing over `lighthouse-core`.
//!
//! [`AppState`] owns the immutable taxonomy, search index and trained
//! models plus three process-local stores (sessions, uploads, downloads).
//! [`api::router`] exposes them as a JSON API and [`Server`] runs that router
//! together with the periodic cleanup sweeper.

pub mod api;
pub mod config;
pub mod error;
pub mod kernel;
pub mod recommend;
pub mod store;

use std::io;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Instant;

use lighthouse_core::codegen::ManifestEntry;
use lighthouse_core::data;
use lighthouse_core::matfeat::{ExtendedFeatureVector, FeatureTiming, FeatureVector};
use lighthouse_core::taxonomy::Taxonomy;
use lighthouse_core::textsearch::{build_index, SearchIndex};
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

pub use config::Config;
pub use error::{ApiError, StoreError};
pub use recommend::{ModelSlot, Recommender};
pub use store::{FileRecord, FileStore, SessionStore, SweepReport};

/// Version of the response schema, carried by every response.
pub const SCHEMA_VERSION: u32 = 1;
/// Header carrying [`SCHEMA_VERSION`] on every response, including archives.
pub const SCHEMA_HEADER: &str = "x-schema-version";

/// Features of an uploaded matrix, computed once at upload time.
#[derive(Debug, Clone)]
pub struct MatrixAnalysis {
    pub features: FeatureVector,
    pub extended: ExtendedFeatureVector,
    pub timing: FeatureTiming,
}

#[derive(Debug, Clone)]
pub struct UploadInfo {
    pub n_rows: usize,
    pub n_cols: usize,
    pub nnz: usize,
    /// The analysis, or why the matrix has none (for example non-square).
    pub analysis: Result<MatrixAnalysis, String>,
}

#[derive(Debug, Clone)]
pub struct DownloadInfo {
    /// Upload deleted together with this archive once it is delivered.
    pub upload_id: Option<String>,
    pub files: Vec<ManifestEntry>,
}

pub struct AppState {
    pub config: Config,
    pub taxonomy: Taxonomy,
    pub index: SearchIndex,
    pub recommender: Recommender,
    pub sessions: SessionStore,
    pub uploads: FileStore<Arc<UploadInfo>>,
    pub downloads: FileStore<Arc<DownloadInfo>>,
}

impl AppState {
    /// Opens the stores under `config.data_dir`, clearing files an earlier
    /// process left behind.
    pub fn new(config: Config, recommender: Recommender) -> io::Result<Self> {
        let taxonomy = Taxonomy::bundled();
        let index = build_index(taxonomy.routines(), data::VOCABULARY)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        let uploads = FileStore::open(config.data_dir.join("uploads"), "mtx", config.ttl)?;
        let downloads = FileStore::open(config.data_dir.join("downloads"), "zip", config.ttl)?;
        Ok(Self { sessions: SessionStore::new(config.ttl), config, taxonomy, index, recommender, uploads, downloads })
    }

    /// Deletes everything past its lifetime. Safe to run at any time and
    /// concurrently with requests; a second call at the same instant
    /// removes nothing.
    pub fn sweep(&self, now: Instant) -> SweepReport {
        SweepReport {
            sessions: self.sessions.sweep(now),
            uploads: self.uploads.sweep(now),
            downloads: self.downloads.sweep(now),
        }
    }
}

/// Runs [`AppState::sweep`] every `config.sweep_interval`.
pub fn spawn_sweeper(state: Arc<AppState>) -> JoinHandle<()> {
    tokio::spawn(async move {
        let mut ticker = tokio::time::interval(state.config.sweep_interval);
        ticker.tick().await;
        loop {
            ticker.tick().await;
            let s = state.clone();
            match tokio::task::spawn_blocking(move || s.sweep(Instant::now())).await {
                Ok(report) if !report.is_empty() => tracing::info!(
                    sessions = report.sessions.len(),
                    uploads = report.uploads.len(),
                    downloads = report.downloads.len(),
                    "sweep removed expired entries"
                ),
                Ok(_) => {}
                Err(e) => tracing::error!("sweeper task failed: {e}"),
            }
        }
    })
}

/// A running service instance.
pub struct Server {
    pub addr: SocketAddr,
    pub state: Arc<AppState>,
    shutdown: Option<oneshot::Sender<()>>,
    task: JoinHandle<io::Result<()>>,
    sweeper: JoinHandle<()>,
}

impl Server {
    /// Binds `config.addr` (port 0 picks a free port) and starts serving.
    pub async fn start(config: Config, recommender: Recommender) -> io::Result<Self> {
        let listener = TcpListener::bind(config.addr).await?;
        let addr = listener.local_addr()?;
        let state = Arc::new(AppState::new(config, recommender)?);
        let (tx, rx) = oneshot::channel::<()>();
        let app = api::router(state.clone());
        let task = tokio::spawn(async move {
            axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await
        });
        let sweeper = spawn_sweeper(state.clone());
        Ok(Self { addr, state, shutdown: Some(tx), task, sweeper })
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{path}", self.addr)
    }

    /// Stops accepting requests and waits for open ones to finish.
    pub async fn stop(mut self) -> io::Result<()> {
        self.sweeper.abort();
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match (&mut self.task).await {
            Ok(r) => r,
            Err(e) => Err(io::Error::other(e)),
        }
    }
}
