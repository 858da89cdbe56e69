//! One-JSON-file-per-session persistence with atomic replacement.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::adaptation::{read_edit_log, write_edit_log, EditRecord, PreferenceVector};
use crate::session::Session;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("cannot write to {path}: {source}")]
    StoreUnwritable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("session `{0}` not found")]
    NotFound(String),
    #[error("invalid session id `{0}`")]
    InvalidId(String),
    #[error("corrupt session file {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("unsupported schema version {0}")]
    UnsupportedSchema(u32),
    #[error("checksum mismatch for session `{0}`")]
    ChecksumMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Versioned, checksummed wrapper around a serialized session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEnvelope {
    pub schema_version: u32,
    pub session: Session,
    /// Hex SHA-256 of the compact JSON encoding of `session`.
    pub checksum: String,
}

fn checksum(session: &Session) -> String {
    let bytes = serde_json::to_vec(session).expect("sessions serialize");
    hex::encode(Sha256::digest(&bytes))
}

impl SessionEnvelope {
    pub fn new(session: Session) -> Self {
        SessionEnvelope {
            schema_version: SCHEMA_VERSION,
            checksum: checksum(&session),
            session,
        }
    }

    pub fn verify(&self) -> Result<(), StoreError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(StoreError::UnsupportedSchema(self.schema_version));
        }
        if checksum(&self.session) != self.checksum {
            return Err(StoreError::ChecksumMismatch(self.session.id().to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ProfileFile {
    schema_version: u32,
    preference: PreferenceVector,
}

#[derive(Debug, Clone)]
pub struct SessionStore {
    dir: PathBuf,
}

fn valid_name(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn unwritable(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::StoreUnwritable {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `bytes` to a temp file beside `path`, then renames it over `path`.
/// The previous file stays intact until the rename.
fn write_atomic(dir: &Path, path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    fs::create_dir_all(dir).map_err(unwritable(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(unwritable(dir))?;
    tmp.write_all(bytes).map_err(unwritable(path))?;
    tmp.as_file().sync_all().map_err(unwritable(path))?;
    tmp.persist(path).map_err(|e| StoreError::StoreUnwritable {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

impl SessionStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        SessionStore { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, id: &str) -> Result<PathBuf, StoreError> {
        if !valid_name(id) {
            return Err(StoreError::InvalidId(id.to_string()));
        }
        Ok(self.dir.join(format!("{id}.json")))
    }

    pub fn save(&self, session: &Session) -> Result<PathBuf, StoreError> {
        let path = self.path_for(session.id())?;
        let envelope = SessionEnvelope::new(session.clone());
        let bytes = serde_json::to_vec_pretty(&envelope).expect("sessions serialize");
        write_atomic(&self.dir, &path, &bytes)?;
        Ok(path)
    }

    pub fn load_envelope(&self, id: &str) -> Result<SessionEnvelope, StoreError> {
        let path = self.path_for(id)?;
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(StoreError::NotFound(id.to_string())),
            Err(e) => return Err(e.into()),
        };
        let envelope: SessionEnvelope = serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        envelope.verify()?;
        Ok(envelope)
    }

    pub fn load(&self, id: &str) -> Result<Session, StoreError> {
        self.load_envelope(id).map(|e| e.session)
    }

    /// Ids of all stored sessions, sorted.
    pub fn list(&self) -> Result<Vec<String>, StoreError> {
        let entries = match fs::read_dir(&self.dir) {
            Ok(entries) => entries,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let mut ids: Vec<String> = entries
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                let id = name.strip_suffix(".json")?;
                valid_name(id).then(|| id.to_string())
            })
            .collect();
        ids.sort();
        Ok(ids)
    }

    fn profile_dir(&self) -> PathBuf {
        self.dir.join("profiles")
    }

    /// Loads an opt-in per-user preference profile, if one was saved.
    pub fn load_profile(&self, name: &str) -> Result<Option<PreferenceVector>, StoreError> {
        if !valid_name(name) {
            return Err(StoreError::InvalidId(name.to_string()));
        }
        let path = self.profile_dir().join(format!("{name}.json"));
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let file: ProfileFile = serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
            path,
            reason: e.to_string(),
        })?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(StoreError::UnsupportedSchema(file.schema_version));
        }
        Ok(Some(file.preference))
    }

    /// Saves the profile's preference vector and appends new edit records
    /// to its JSON-lines log.
    pub fn save_profile(
        &self,
        name: &str,
        preference: &PreferenceVector,
        new_records: &[EditRecord],
    ) -> Result<(), StoreError> {
        if !valid_name(name) {
            return Err(StoreError::InvalidId(name.to_string()));
        }
        let dir = self.profile_dir();
        let path = dir.join(format!("{name}.json"));
        let file = ProfileFile {
            schema_version: SCHEMA_VERSION,
            preference: preference.clone(),
        };
        write_atomic(&dir, &path, &serde_json::to_vec_pretty(&file).expect("profiles serialize"))?;
        if !new_records.is_empty() {
            let log_path = dir.join(format!("{name}.edits.jsonl"));
            let log = fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(&log_path)
                .map_err(unwritable(&log_path))?;
            write_edit_log(log, new_records).map_err(|e| StoreError::Corrupt {
                path: log_path,
                reason: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn load_profile_log(&self, name: &str) -> Result<Vec<EditRecord>, StoreError> {
        let path = self.profile_dir().join(format!("{name}.edits.jsonl"));
        match fs::File::open(&path) {
            Ok(f) => read_edit_log(std::io::BufReader::new(f)).map_err(|e| StoreError::Corrupt {
                path,
                reason: e.to_string(),
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
            Err(e) => Err(e.into()),
        }
    }
}
