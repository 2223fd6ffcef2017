use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use rpys_core::store::Workspace;
use tokio::sync::Mutex;

use crate::error::ApiError;

/// An immutable state of a session. Readers hold on to it while the writer
/// builds the next one.
#[derive(Debug)]
pub struct Snapshot {
    pub version: u64,
    pub workspace: Workspace,
}

/// One analysis session: the current snapshot plus a writer lock that
/// serializes mutations.
#[derive(Debug)]
pub struct Session {
    current: RwLock<Arc<Snapshot>>,
    writer: Mutex<()>,
}

impl Session {
    fn new(workspace: Workspace) -> Self {
        Self {
            current: RwLock::new(Arc::new(Snapshot {
                version: 0,
                workspace,
            })),
            writer: Mutex::new(()),
        }
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.current.read().expect("snapshot lock poisoned").clone()
    }

    /// Applies `f` to a copy of the workspace if the session is still at
    /// `expected`. On success the copy becomes the next version; on failure
    /// nothing changes.
    pub async fn mutate<T, F>(&self, expected: u64, f: F) -> Result<(Arc<Snapshot>, T), ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&mut Workspace) -> Result<T, ApiError> + Send + 'static,
    {
        let _guard = self.writer.lock().await;
        let snap = self.snapshot();
        if snap.version != expected {
            return Err(ApiError::Conflict {
                expected,
                current: snap.version,
            });
        }
        let mut ws = snap.workspace.clone();
        let (ws, out) = tokio::task::spawn_blocking(move || f(&mut ws).map(|out| (ws, out)))
            .await
            .map_err(|e| ApiError::Internal(e.to_string()))??;
        let next = Arc::new(Snapshot {
            version: snap.version + 1,
            workspace: ws,
        });
        *self.current.write().expect("snapshot lock poisoned") = next.clone();
        Ok((next, out))
    }
}

/// In-memory session registry.
#[derive(Debug, Default)]
pub struct Sessions {
    map: RwLock<HashMap<String, Arc<Session>>>,
}

impl Sessions {
    pub fn insert(&self, workspace: Workspace) -> (String, Arc<Session>) {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = Arc::new(Session::new(workspace));
        self.map
            .write()
            .expect("session map poisoned")
            .insert(id.clone(), session.clone());
        (id, session)
    }

    pub fn get(&self, id: &str) -> Result<Arc<Session>, ApiError> {
        self.map
            .read()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(id.to_owned()))
    }

    pub fn remove(&self, id: &str) -> Result<(), ApiError> {
        self.map
            .write()
            .expect("session map poisoned")
            .remove(id)
            .map(drop)
            .ok_or_else(|| ApiError::NotFound(id.to_owned()))
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("session map poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
