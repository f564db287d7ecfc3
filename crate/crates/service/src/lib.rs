//! HTTP service for active-learning sessions labeled by people.
//!
//! ```text
//! POST /api/sessions                  ALConfig JSON -> 201 {id}
//! GET  /api/sessions                  ids
//! GET  /api/sessions/{id}             state snapshot
//! GET  /api/sessions/{id}/queries     pending batch as PNGs
//! POST /api/sessions/{id}/labels      {group_id: class}
//! GET  /api/sessions/{id}/metrics.csv
//! GET  /api/classes
//! GET  /health
//! ```
//!
//! Anything else is served from the static directory, if one is set.

mod api;
pub mod render;
pub mod session;

use std::collections::BTreeMap;
use std::fs;
use std::future::Future;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use spadal::al::{ALConfig, OracleMode};
use spadal::dataset::{load_dataset, Dataset};
use spadal::Result;
use tokio::net::TcpListener;

pub use api::router;
pub use session::{HistoryEntry, LabelAck, LabelError, QueryItem, Session, SessionFile, SessionState, Snapshot};

/// Sessions over one dataset, optionally persisted under `store`.
#[derive(Debug)]
pub struct Service {
    dataset: Dataset,
    store: Option<PathBuf>,
    sessions: RwLock<BTreeMap<String, Arc<Session>>>,
}

impl Service {
    /// Loads a simulated dataset directory and resumes any sessions saved
    /// under `store`.
    pub fn open(data_dir: impl AsRef<Path>, store: Option<PathBuf>) -> Result<Arc<Self>> {
        Self::new(load_dataset(data_dir)?, store)
    }

    pub fn new(dataset: Dataset, store: Option<PathBuf>) -> Result<Arc<Self>> {
        let service = Arc::new(Self {
            dataset,
            store,
            sessions: RwLock::default(),
        });
        if let Some(dir) = service.sessions_dir()? {
            let mut saved: Vec<PathBuf> = fs::read_dir(&dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            saved.sort();
            for path in saved {
                let file: SessionFile = serde_json::from_slice(&fs::read(&path)?)?;
                tracing::info!(session = %file.id, "resuming session");
                let id = file.id.clone();
                let session = Session::resume(file, service.dataset.clone(), Some(path));
                service.write().insert(id, session);
            }
        }
        Ok(service)
    }

    fn sessions_dir(&self) -> Result<Option<PathBuf>> {
        let Some(store) = &self.store else { return Ok(None) };
        let dir = store.join("sessions");
        fs::create_dir_all(&dir)?;
        Ok(Some(dir))
    }

    fn write(&self) -> std::sync::RwLockWriteGuard<'_, BTreeMap<String, Arc<Session>>> {
        self.sessions.write().unwrap_or_else(|p| p.into_inner())
    }

    pub fn class_names(&self) -> &[String] {
        self.dataset.pools.class_names()
    }

    pub fn create_session(&self, config: ALConfig) -> Result<Arc<Session>> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let file = self.sessions_dir()?.map(|d| d.join(format!("{id}.json")));
        let session = Session::start(id.clone(), config, self.dataset.clone(), file)?;
        self.write().insert(id, Arc::clone(&session));
        Ok(session)
    }

    pub fn session(&self, id: &str) -> Option<Arc<Session>> {
        self.sessions.read().unwrap_or_else(|p| p.into_inner()).get(id).cloned()
    }

    pub fn session_ids(&self) -> Vec<String> {
        self.sessions.read().unwrap_or_else(|p| p.into_inner()).keys().cloned().collect()
    }

    /// Checkpoints every session and releases workers waiting for labels.
    pub fn shutdown(&self) {
        for session in self.sessions.read().unwrap_or_else(|p| p.into_inner()).values() {
            if let Err(e) = session.shutdown() {
                tracing::warn!(session = %session.id(), "checkpoint failed: {e}");
            }
        }
    }
}

/// Parses a session config; a missing `oracle` means a human labeler.
pub fn parse_session_config(body: &[u8]) -> serde_json::Result<ALConfig> {
    let mut value: serde_json::Value = serde_json::from_slice(body)?;
    if let Some(obj) = value.as_object_mut() {
        obj.entry("oracle")
            .or_insert_with(|| serde_json::to_value(OracleMode::Human).expect("enum serializes"));
    }
    serde_json::from_value(value)
}

/// Serves until `shutdown` resolves, then checkpoints all sessions.
pub async fn serve(
    listener: TcpListener,
    service: Arc<Service>,
    static_dir: Option<PathBuf>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let app = router(Arc::clone(&service), static_dir);
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await?;
    service.shutdown();
    Ok(())
}

/// Resolves on SIGINT (Ctrl-C).
pub async fn ctrl_c() {
    if let Err(e) = tokio::signal::ctrl_c().await {
        tracing::warn!("cannot listen for SIGINT: {e}");
        std::future::pending::<()>().await;
    }
}
