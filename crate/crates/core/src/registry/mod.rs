//! Database of services, database of users and the recent-request log.
//!
//! Snapshots are a directory with `services.db` and `users.db` (JSON) and a
//! `checksums` file holding one `<sha256-hex>  <file>` line per table.

mod log;
mod users;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io;
use std::path::Path;
use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use log::{Outcome, RequestLog, RequestLogEntry, ServiceMetrics, DEFAULT_LOG_CAPACITY};
pub use users::{password_proof, AccessDecision, UserRecord, ANY_SERVICE};

use crate::service::ServiceDescriptor;
use crate::wsdl::WsdlDocument;

pub const SERVICES_FILE: &str = "services.db";
pub const USERS_FILE: &str = "users.db";
pub const CHECKSUMS_FILE: &str = "checksums";

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("service `{0}` already exists")]
    DuplicateService(String),
    #[error("endpoint path `{0}` is already in use")]
    PathConflict(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("user `{0}` already exists")]
    DuplicateUser(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("I/O failure: {0}")]
    IoFailure(#[from] io::Error),
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ServiceRecord {
    pub descriptor: ServiceDescriptor,
    pub wsdl: WsdlDocument,
    /// Name of the key set in the key store; present iff security is enabled.
    pub key_set_id: Option<String>,
    pub created_at: DateTime<Utc>,
}

impl ServiceRecord {
    pub fn name(&self) -> &str {
        &self.descriptor.service_name
    }

    fn check(&self) -> Result<(), RegistryError> {
        if self.descriptor.security_enabled != self.key_set_id.is_some() {
            return Err(RegistryError::InvalidRecord(format!(
                "`{}`: key set must be present exactly when security is enabled",
                self.name()
            )));
        }
        self.descriptor
            .validate()
            .map_err(|e| RegistryError::InvalidRecord(e.to_string()))
    }
}

#[derive(Debug, Default)]
struct ServiceTable {
    by_name: BTreeMap<String, Arc<ServiceRecord>>,
    by_path: HashMap<String, String>,
}

#[derive(Debug)]
pub struct Registry {
    services: RwLock<ServiceTable>,
    users: RwLock<BTreeMap<String, UserRecord>>,
    log: RequestLog,
}

impl Default for Registry {
    fn default() -> Self {
        Registry::new(DEFAULT_LOG_CAPACITY)
    }
}

fn read<T>(l: &RwLock<T>) -> RwLockReadGuard<'_, T> {
    l.read().unwrap_or_else(|p| p.into_inner())
}

fn write<T>(l: &RwLock<T>) -> RwLockWriteGuard<'_, T> {
    l.write().unwrap_or_else(|p| p.into_inner())
}

impl Registry {
    pub fn new(log_capacity: usize) -> Self {
        Registry {
            services: RwLock::default(),
            users: RwLock::default(),
            log: RequestLog::new(log_capacity),
        }
    }

    pub fn register_service(&self, rec: ServiceRecord) -> Result<Arc<ServiceRecord>, RegistryError> {
        rec.check()?;
        let mut table = write(&self.services);
        let name = rec.name().to_string();
        let path = rec.descriptor.endpoint_path.clone();
        if table.by_name.contains_key(&name) {
            return Err(RegistryError::DuplicateService(name));
        }
        if table.by_path.contains_key(&path) {
            return Err(RegistryError::PathConflict(path));
        }
        let rec = Arc::new(rec);
        table.by_path.insert(path, name.clone());
        table.by_name.insert(name, rec.clone());
        Ok(rec)
    }

    pub fn lookup(&self, name: &str) -> Result<Arc<ServiceRecord>, RegistryError> {
        read(&self.services)
            .by_name
            .get(name)
            .cloned()
            .ok_or_else(|| RegistryError::NotFound(format!("service `{name}`")))
    }

    pub fn lookup_by_path(&self, path: &str) -> Result<Arc<ServiceRecord>, RegistryError> {
        let table = read(&self.services);
        table
            .by_path
            .get(path)
            .and_then(|name| table.by_name.get(name))
            .cloned()
            .ok_or_else(|| RegistryError::NotFound(format!("path `{path}`")))
    }

    /// Route by a call's namespace when the transport carries no path: an
    /// exact match on a service namespace, else the namespace's URL path.
    pub fn lookup_by_namespace(&self, namespace: &str) -> Result<Arc<ServiceRecord>, RegistryError> {
        {
            let table = read(&self.services);
            if let Some(rec) = table.by_name.values().find(|r| r.descriptor.namespace_uri == namespace) {
                return Ok(rec.clone());
            }
        }
        match url::Url::parse(namespace) {
            Ok(u) => self.lookup_by_path(u.path()),
            Err(_) => Err(RegistryError::NotFound(format!("namespace `{namespace}`"))),
        }
    }

    pub fn remove_service(&self, name: &str) -> Result<Arc<ServiceRecord>, RegistryError> {
        let mut table = write(&self.services);
        let rec = table
            .by_name
            .remove(name)
            .ok_or_else(|| RegistryError::NotFound(format!("service `{name}`")))?;
        table.by_path.remove(&rec.descriptor.endpoint_path);
        Ok(rec)
    }

    pub fn services(&self) -> Vec<Arc<ServiceRecord>> {
        read(&self.services).by_name.values().cloned().collect()
    }

    pub fn add_user(&self, user: UserRecord) -> Result<(), RegistryError> {
        if user.login.is_empty() || user.login.chars().any(char::is_whitespace) {
            return Err(RegistryError::InvalidRecord(format!("login `{}` is not a token", user.login)));
        }
        let mut users = write(&self.users);
        if users.contains_key(&user.login) {
            return Err(RegistryError::DuplicateUser(user.login));
        }
        users.insert(user.login.clone(), user);
        Ok(())
    }

    pub fn user(&self, login: &str) -> Option<UserRecord> {
        read(&self.users).get(login).cloned()
    }

    pub fn users(&self) -> Vec<UserRecord> {
        read(&self.users).values().cloned().collect()
    }

    pub fn check_access(&self, login: &str, password: &str, service: &str) -> AccessDecision {
        self.check_access_with_proof(login, &password_proof(password), service)
    }

    pub fn check_access_with_proof(&self, login: &str, proof_hex: &str, service: &str) -> AccessDecision {
        match read(&self.users).get(login) {
            Some(u) if u.proof_matches(proof_hex) && u.may_use(service) => AccessDecision::Allow,
            _ => AccessDecision::Deny,
        }
    }

    pub fn append_log(&self, entry: RequestLogEntry) {
        self.log.append(entry);
    }

    pub fn log(&self) -> &RequestLog {
        &self.log
    }

    pub fn metrics_summary(&self) -> BTreeMap<String, ServiceMetrics> {
        self.log.summary()
    }

    /// Structural equality of the persistent tables (the log is excluded).
    pub fn same_state(&self, other: &Registry) -> bool {
        let mine: Vec<ServiceRecord> = self.services().iter().map(|r| (**r).clone()).collect();
        let theirs: Vec<ServiceRecord> = other.services().iter().map(|r| (**r).clone()).collect();
        mine == theirs && self.users() == other.users()
    }

    pub fn snapshot(&self, dir: &Path) -> Result<(), RegistryError> {
        // Copies taken under read locks; concurrent readers are not blocked.
        let services: Vec<ServiceRecord> = self.services().iter().map(|r| (**r).clone()).collect();
        let users = self.users();
        fs::create_dir_all(dir)?;
        let services_json = serde_json::to_vec_pretty(&services).map_err(io::Error::other)?;
        let users_json = serde_json::to_vec_pretty(&users).map_err(io::Error::other)?;
        let checksums = format!(
            "{}  {SERVICES_FILE}\n{}  {USERS_FILE}\n",
            hex::encode(Sha256::digest(&services_json)),
            hex::encode(Sha256::digest(&users_json)),
        );
        write_atomic(&dir.join(SERVICES_FILE), &services_json)?;
        write_atomic(&dir.join(USERS_FILE), &users_json)?;
        write_atomic(&dir.join(CHECKSUMS_FILE), checksums.as_bytes())?;
        Ok(())
    }

    /// Load a snapshot directory. A directory with none of the snapshot
    /// files yields an empty registry.
    pub fn load_snapshot(dir: &Path, log_capacity: usize) -> Result<Registry, RegistryError> {
        let reg = Registry::new(log_capacity);
        let files = [SERVICES_FILE, USERS_FILE, CHECKSUMS_FILE];
        if files.iter().all(|f| !dir.join(f).exists()) {
            return Ok(reg);
        }
        let corrupt = |m: String| RegistryError::CorruptSnapshot(m);
        let checksums = fs::read_to_string(dir.join(CHECKSUMS_FILE))
            .map_err(|e| corrupt(format!("{CHECKSUMS_FILE}: {e}")))?;
        let mut expected: HashMap<&str, &str> = HashMap::new();
        for line in checksums.lines().filter(|l| !l.trim().is_empty()) {
            let (sum, file) = line
                .split_once("  ")
                .ok_or_else(|| corrupt(format!("bad checksum line `{line}`")))?;
            expected.insert(file.trim(), sum.trim());
        }
        let mut load = |file: &str| -> Result<Vec<u8>, RegistryError> {
            let bytes = fs::read(dir.join(file)).map_err(|e| corrupt(format!("{file}: {e}")))?;
            let want = expected.remove(file).ok_or_else(|| corrupt(format!("no checksum for {file}")))?;
            if hex::encode(Sha256::digest(&bytes)) != want {
                return Err(corrupt(format!("{file}: checksum mismatch")));
            }
            Ok(bytes)
        };
        let services: Vec<ServiceRecord> =
            serde_json::from_slice(&load(SERVICES_FILE)?).map_err(|e| corrupt(format!("{SERVICES_FILE}: {e}")))?;
        let users: Vec<UserRecord> =
            serde_json::from_slice(&load(USERS_FILE)?).map_err(|e| corrupt(format!("{USERS_FILE}: {e}")))?;
        for s in services {
            reg.register_service(s).map_err(|e| corrupt(e.to_string()))?;
        }
        for u in users {
            reg.add_user(u).map_err(|e| corrupt(e.to_string()))?;
        }
        Ok(reg)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}
