//! Session storage: one checkpoint file per session, written through on every
//! mutation. Uploaded datasets live in memory only.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nishpaksh_core::session::CHECKPOINT_SUFFIX;
use nishpaksh_core::{AuditDataset, AuditSession, Error, Result};
use parking_lot::RwLock;

pub struct Entry {
    pub session: AuditSession,
    /// Dataset of the current proxy review, if uploaded in this process.
    pub dataset: Option<Arc<AuditDataset>>,
}

pub type SharedEntry = Arc<tokio::sync::RwLock<Entry>>;

pub struct Store {
    dir: PathBuf,
    sessions: RwLock<HashMap<String, SharedEntry>>,
}

/// Ids become file names, so only a conservative alphabet is accepted.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl Store {
    /// Open `dir`, creating it if needed and loading every checkpoint in it.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let mut sessions = HashMap::new();
        for entry in fs::read_dir(&dir)? {
            let path = entry?.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
                continue;
            };
            if !name.ends_with(CHECKPOINT_SUFFIX) {
                continue;
            }
            let session = AuditSession::restore(&fs::read_to_string(&path)?)
                .map_err(|e| Error::CorruptCheckpoint(format!("{}: {e}", path.display())))?;
            sessions.insert(
                session.session_id.clone(),
                Arc::new(tokio::sync::RwLock::new(Entry {
                    session,
                    dataset: None,
                })),
            );
        }
        Ok(Self {
            dir,
            sessions: RwLock::new(sessions),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}{CHECKPOINT_SUFFIX}"))
    }

    /// Write the checkpoint atomically (temp file, then rename).
    pub fn persist(&self, session: &AuditSession) -> Result<()> {
        let path = self.path_for(&session.session_id);
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, session.checkpoint())?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    pub fn insert(&self, session: AuditSession) -> Result<SharedEntry> {
        if !valid_id(&session.session_id) {
            return Err(Error::InvalidParameter(format!(
                "session id `{}` contains unsupported characters",
                session.session_id
            )));
        }
        self.persist(&session)?;
        let id = session.session_id.clone();
        let entry = Arc::new(tokio::sync::RwLock::new(Entry {
            session,
            dataset: None,
        }));
        self.sessions.write().insert(id, entry.clone());
        Ok(entry)
    }

    pub fn get(&self, id: &str) -> Result<SharedEntry> {
        self.sessions
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| Error::SessionNotFound(id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.sessions.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
