//! The service host: lifecycle, service creation and the request pipeline.

mod consumer;
mod headers;

use std::collections::HashMap;
use std::fs;
use std::io;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Instant;

use chrono::Utc;

pub use consumer::{build_call, encrypt_envelope, sign_envelope, verify_envelope, Verdict};
pub use headers::{
    encrypted_entry, parse_encrypted_entry, parse_signature_entry, signature_entry, AuthHeader, HeaderError, AUTH,
    ENCRYPTED, ENCRYPTED_CALL, HEADERS_NS, SIGNATURE,
};

use crate::registry::{
    AccessDecision, Outcome, Registry, RegistryError, RequestLogEntry, ServiceRecord, DEFAULT_LOG_CAPACITY,
};
use crate::security::{
    decrypt_message, issue_certificate, render_certificate_text, verify_signature, Certificate, KeyPair, KeyStore,
    SecurityError, DEFAULT_KEY_BITS, DEFAULT_VALIDITY_DAYS,
};
use crate::service::{coerce_result, descriptor_fingerprint, validate_call, DescriptorError, ServiceDescriptor, ServiceHandler};
use crate::soap::{
    canonical_body, make_fault, parse_envelope, serialize_envelope, Body, FaultCode, SoapEnvelope, SoapResponseBody,
};
use crate::transport::{
    start_listener, BindingConfig, Classification, Dispatcher, InboundRequest, Listener, OutboundResponse,
    TransportError, TransportKind, DEFAULT_WORKERS,
};
use crate::wsdl::{generate_wsdl, store_wsdl, WsdlError};

pub const DEFAULT_ADVERTISED_URL: &str = "http://localhost:5000";

#[derive(Debug, thiserror::Error)]
pub enum HostError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Security(#[from] SecurityError),
    #[error(transparent)]
    Wsdl(#[from] WsdlError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("I/O failure: {0}")]
    IoFailure(#[from] io::Error),
}

#[derive(Debug, Clone)]
pub struct HostConfig {
    pub bindings: Vec<BindingConfig>,
    /// Registry snapshot and key store live here.
    pub data_dir: PathBuf,
    pub wsdl_dir: PathBuf,
    pub web_root: Option<PathBuf>,
    pub auth_required: bool,
    pub worker_pool_size: usize,
    /// Base URL written into WSDL `soap:address` locations.
    pub advertised_url: String,
    pub key_bits: usize,
    pub log_capacity: usize,
}

impl HostConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        let data_dir = data_dir.into();
        HostConfig {
            bindings: Vec::new(),
            wsdl_dir: data_dir.join("wsdl"),
            data_dir,
            web_root: None,
            auth_required: false,
            worker_pool_size: DEFAULT_WORKERS,
            advertised_url: DEFAULT_ADVERTISED_URL.to_string(),
            key_bits: DEFAULT_KEY_BITS,
            log_capacity: DEFAULT_LOG_CAPACITY,
        }
    }

    fn validate(&self) -> Result<(), HostError> {
        if self.data_dir == self.wsdl_dir {
            return Err(HostError::InvalidConfig("data and WSDL directories must differ".into()));
        }
        if self.worker_pool_size == 0 {
            return Err(HostError::InvalidConfig("worker pool size must be at least 1".into()));
        }
        Ok(())
    }

    pub fn key_dir(&self) -> PathBuf {
        self.data_dir.join("keys")
    }
}

/// Shared state reachable from transport workers.
struct Core {
    cfg: HostConfig,
    registry: Registry,
    keys: KeyStore,
    handlers: RwLock<HashMap<String, Arc<dyn ServiceHandler>>>,
    key_cache: RwLock<HashMap<String, Arc<(KeyPair, Certificate)>>>,
    exclusive: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    create_lock: Mutex<()>,
}

pub struct Host {
    core: Arc<Core>,
    listeners: Mutex<Vec<Listener>>,
}

impl std::fmt::Debug for Host {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Host").field("data_dir", &self.core.cfg.data_dir).finish()
    }
}

impl Dispatcher for Core {
    fn dispatch(&self, req: InboundRequest) -> OutboundResponse {
        self.handle(req)
    }
}

/// Load the registry from `cfg.data_dir` and open the key store. Listeners
/// are not started.
pub fn init_host(cfg: HostConfig) -> Result<Host, HostError> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.data_dir)?;
    fs::create_dir_all(&cfg.wsdl_dir)?;
    let registry = Registry::load_snapshot(&cfg.data_dir, cfg.log_capacity)?;
    let keys = KeyStore::open(cfg.key_dir())?;
    let core = Core {
        cfg,
        registry,
        keys,
        handlers: RwLock::default(),
        key_cache: RwLock::default(),
        exclusive: Mutex::default(),
        create_lock: Mutex::new(()),
    };
    Ok(Host { core: Arc::new(core), listeners: Mutex::new(Vec::new()) })
}

impl Host {
    pub fn config(&self) -> &HostConfig {
        &self.core.cfg
    }

    pub fn registry(&self) -> &Registry {
        &self.core.registry
    }

    /// Start a listener for every configured binding. Returns the bindings
    /// in use, with OS-assigned ports filled in.
    pub fn start(&self) -> Result<Vec<BindingConfig>, HostError> {
        let mut listeners = self.listeners.lock().unwrap_or_else(|p| p.into_inner());
        let dispatcher: Arc<dyn Dispatcher> = self.core.clone();
        let mut started = Vec::new();
        for b in &self.core.cfg.bindings {
            match start_listener(b, dispatcher.clone(), self.core.cfg.worker_pool_size) {
                Ok(l) => started.push(l),
                Err(e) => {
                    // Release whatever was bound before the failure.
                    drop(started);
                    return Err(e.into());
                }
            }
        }
        let bound = started.iter().map(|l| l.binding().clone()).collect();
        listeners.extend(started);
        Ok(bound)
    }

    /// Register a service. Keys and a certificate are created when security
    /// is enabled (reusing a key set already in the store), and the WSDL is
    /// written to the WSDL directory. Creating a service identical to an
    /// existing one returns the existing record and rebinds the handler.
    pub fn create_service(
        &self,
        desc: ServiceDescriptor,
        handler: Arc<dyn ServiceHandler>,
    ) -> Result<Arc<ServiceRecord>, HostError> {
        desc.validate()?;
        let core = &self.core;
        let _guard = core.create_lock.lock().unwrap_or_else(|p| p.into_inner());
        let name = desc.service_name.clone();

        if let Ok(existing) = core.registry.lookup(&name) {
            if descriptor_fingerprint(&existing.descriptor) != descriptor_fingerprint(&desc) {
                return Err(RegistryError::DuplicateService(name).into());
            }
            core.bind_handler(&name, handler);
            return Ok(existing);
        }
        if core.registry.lookup_by_path(&desc.endpoint_path).is_ok() {
            return Err(RegistryError::PathConflict(desc.endpoint_path).into());
        }

        let key_set_id = if desc.security_enabled {
            core.ensure_keys(&name)?;
            Some(name.clone())
        } else {
            None
        };
        let url = format!("{}{}", core.cfg.advertised_url.trim_end_matches('/'), desc.endpoint_path);
        let wsdl = generate_wsdl(&desc, &url);
        store_wsdl(&wsdl, &core.cfg.wsdl_dir)?;
        let rec = core.registry.register_service(ServiceRecord { descriptor: desc, wsdl, key_set_id, created_at: Utc::now() })?;
        core.bind_handler(&name, handler);
        Ok(rec)
    }

    /// Attach a handler to a service restored from a snapshot.
    pub fn bind_handler(&self, service: &str, handler: Arc<dyn ServiceHandler>) -> Result<(), HostError> {
        self.core.registry.lookup(service)?;
        self.core.bind_handler(service, handler);
        Ok(())
    }

    /// Remove a service and its handler. Its keys stay in the key store.
    pub fn remove_service(&self, service: &str) -> Result<Arc<ServiceRecord>, HostError> {
        let rec = self.core.registry.remove_service(service)?;
        self.core.handlers.write().unwrap_or_else(|p| p.into_inner()).remove(service);
        Ok(rec)
    }

    /// The certificate of a security-enabled service.
    pub fn certificate(&self, service: &str) -> Result<Certificate, HostError> {
        Ok(self.core.service_keys(service)?.1.clone())
    }

    pub fn handle_request(&self, req: InboundRequest) -> OutboundResponse {
        self.core.handle(req)
    }

    /// Stop all listeners, letting accepted requests finish, then write a
    /// registry snapshot. Calling it again only rewrites the snapshot.
    pub fn shutdown(&self) -> Result<(), HostError> {
        let listeners: Vec<Listener> =
            std::mem::take(&mut *self.listeners.lock().unwrap_or_else(|p| p.into_inner()));
        for l in listeners {
            l.stop();
        }
        self.core.registry.snapshot(&self.core.cfg.data_dir)?;
        Ok(())
    }
}

impl Drop for Host {
    fn drop(&mut self) {
        let listeners = std::mem::take(&mut *self.listeners.lock().unwrap_or_else(|p| p.into_inner()));
        drop(listeners);
    }
}

/// Why a SOAP request failed; decides the fault code and log outcome.
enum Failure {
    Client(String),
    Server(String),
    Denied,
}

impl Failure {
    fn outcome(&self) -> Outcome {
        match self {
            Failure::Client(_) => Outcome::ClientFault,
            Failure::Server(_) => Outcome::ServerFault,
            Failure::Denied => Outcome::Denied,
        }
    }

    fn into_fault(self) -> SoapEnvelope {
        match self {
            Failure::Client(m) => make_fault(FaultCode::Client, m, None),
            Failure::Server(m) => make_fault(FaultCode::Server, m, None),
            Failure::Denied => make_fault(FaultCode::Client, "access denied", None),
        }
    }
}

fn client(msg: impl std::fmt::Display) -> Failure {
    Failure::Client(msg.to_string())
}

/// What the pipeline learned about a request, for logging and signing.
#[derive(Default)]
struct Trace {
    service: Option<Arc<ServiceRecord>>,
    method: String,
}

impl Core {
    fn bind_handler(&self, service: &str, handler: Arc<dyn ServiceHandler>) {
        self.handlers.write().unwrap_or_else(|p| p.into_inner()).insert(service.to_string(), handler);
    }

    fn ensure_keys(&self, name: &str) -> Result<Arc<(KeyPair, Certificate)>, HostError> {
        if self.keys.contains(name) {
            return self.service_keys(name);
        }
        let kp = KeyPair::generate(self.cfg.key_bits)?;
        let cert = issue_certificate(&kp, &format!("{name}/"), DEFAULT_VALIDITY_DAYS);
        self.keys.save(name, &kp, &cert, false)?;
        let entry = Arc::new((kp, cert));
        self.key_cache.write().unwrap_or_else(|p| p.into_inner()).insert(name.to_string(), entry.clone());
        Ok(entry)
    }

    fn service_keys(&self, name: &str) -> Result<Arc<(KeyPair, Certificate)>, HostError> {
        if let Some(k) = self.key_cache.read().unwrap_or_else(|p| p.into_inner()).get(name) {
            return Ok(k.clone());
        }
        let entry = Arc::new(self.keys.load(name)?);
        self.key_cache.write().unwrap_or_else(|p| p.into_inner()).insert(name.to_string(), entry.clone());
        Ok(entry)
    }

    fn handle(&self, req: InboundRequest) -> OutboundResponse {
        match req.classification {
            Classification::Web => self.serve_web(&req),
            Classification::Malformed => match req.transport_kind {
                TransportKind::Http => OutboundResponse::text(400, "not a SOAP request"),
                _ => {
                    let mut r = OutboundResponse::fault(FaultCode::Client, "payload is not a SOAP envelope");
                    r.status = 400;
                    r
                }
            },
            Classification::Soap => self.serve_soap(&req),
        }
    }

    fn serve_soap(&self, req: &InboundRequest) -> OutboundResponse {
        let started = Instant::now();
        let mut trace = Trace::default();
        let (env, outcome) = match self.pipeline(req, &mut trace) {
            Ok(env) => (env, Outcome::Ok),
            Err(f) => {
                let outcome = f.outcome();
                (f.into_fault(), outcome)
            }
        };
        let mut env = env;
        if let Some(rec) = trace.service.as_ref().filter(|r| r.descriptor.security_enabled) {
            if let Ok(keys) = self.service_keys(rec.name()) {
                sign_envelope(&mut env, &keys.0, None);
            }
        }
        let status = if outcome == Outcome::Ok { 200 } else { 500 };
        let body = serialize_envelope(&env);
        self.registry.append_log(RequestLogEntry {
            timestamp: Utc::now(),
            service_name: trace.service.as_ref().map(|r| r.name().to_string()).unwrap_or_default(),
            method_name: trace.method,
            duration_micros: started.elapsed().as_micros().min(u64::MAX as u128) as u64,
            outcome,
        });
        OutboundResponse::xml(status, body)
    }

    fn route(&self, req: &InboundRequest, env: &SoapEnvelope, encrypted_target: Option<&str>) -> Result<Arc<ServiceRecord>, Failure> {
        let path = req.path.as_str();
        if !path.is_empty() && path != "/" {
            return self.registry.lookup_by_path(path).map_err(|_| client(format!("no service at `{path}`")));
        }
        if let Some(t) = encrypted_target {
            return self.registry.lookup_by_path(t).map_err(|_| client(format!("no service at `{t}`")));
        }
        match &env.body {
            Body::Call(c) => self
                .registry
                .lookup_by_namespace(&c.operation.namespace_uri)
                .map_err(|_| client(format!("no service for namespace `{}`", c.operation.namespace_uri))),
            _ => Err(client("body is not a method call")),
        }
    }

    fn pipeline(&self, req: &InboundRequest, trace: &mut Trace) -> Result<SoapEnvelope, Failure> {
        let outer = parse_envelope(&req.payload).map_err(client)?;
        let encrypted = outer
            .header(HEADERS_NS, ENCRYPTED)
            .map(parse_encrypted_entry)
            .transpose()
            .map_err(client)?;

        let rec = self.route(req, &outer, encrypted.as_ref().map(|(_, t)| t.as_str()))?;
        trace.service = Some(rec.clone());
        let desc = &rec.descriptor;

        // Decrypt first so credentials and signatures may travel inside.
        let (env, raw) = match encrypted {
            Some((cipher, _)) => {
                if !desc.security_enabled {
                    return Err(client("service does not accept encrypted requests"));
                }
                let keys = self.service_keys(rec.name()).map_err(|e| Failure::Server(e.to_string()))?;
                let plain = decrypt_message(&cipher, &keys.0).map_err(|_| client("cannot decrypt request"))?;
                (parse_envelope(&plain).map_err(client)?, plain)
            }
            None => (outer.clone(), req.payload.clone()),
        };

        if self.cfg.auth_required {
            let auth = outer.header(HEADERS_NS, AUTH).or_else(|| env.header(HEADERS_NS, AUTH));
            let allowed = auth
                .and_then(|h| AuthHeader::from_entry(h).ok())
                .map(|a| self.registry.check_access_with_proof(&a.login, &a.password_proof, rec.name()));
            if allowed != Some(AccessDecision::Allow) {
                if let Body::Call(c) = &env.body {
                    trace.method = c.operation.local_name.clone();
                }
                return Err(Failure::Denied);
            }
        }

        if let Some(h) = env.header(HEADERS_NS, SIGNATURE) {
            let (sig, cert) = parse_signature_entry(h).map_err(client)?;
            let cert = cert.ok_or_else(|| client("signature header carries no certificate"))?;
            let body = canonical_body(&raw).map_err(client)?;
            let ok = cert.verify_self_signature() && verify_signature(&body, &sig, &cert.public_key).unwrap_or(false);
            if !ok {
                return Err(client("signature verification failed"));
            }
        }

        let call = match env.body {
            Body::Call(c) => c,
            _ => return Err(client("body is not a method call")),
        };
        trace.method = call.operation.local_name.clone();
        let sig = validate_call(desc, &call).map_err(client)?;

        let handler = self
            .handlers
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(rec.name())
            .cloned()
            .ok_or_else(|| Failure::Server(format!("service `{}` has no handler bound", rec.name())))?;
        let args: Vec<_> = call.params.into_iter().map(|p| p.value).collect();
        let lock = desc.exclusive_execution.then(|| self.exclusive_lock(rec.name()));
        let _serial = lock.as_ref().map(|l| l.lock().unwrap_or_else(|p| p.into_inner()));
        let result = catch_unwind(AssertUnwindSafe(|| handler.execute_method(&sig.name, &args)))
            .map_err(|_| Failure::Server("handler panicked".into()))?
            .map_err(|e| Failure::Server(e.to_string()))?;
        let result = coerce_result(sig, result).map_err(|e| Failure::Server(e.to_string()))?;

        Ok(SoapEnvelope::new(Body::Response(SoapResponseBody::new(&sig.name, &desc.response_namespace_uri, result))))
    }

    fn exclusive_lock(&self, service: &str) -> Arc<Mutex<()>> {
        self.exclusive
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .entry(service.to_string())
            .or_default()
            .clone()
    }

    fn serve_web(&self, req: &InboundRequest) -> OutboundResponse {
        let not_found = || OutboundResponse::text(404, "not found");
        match req.query.as_deref() {
            Some(q) if q.eq_ignore_ascii_case("wsdl") => {
                return match self.registry.lookup_by_path(&req.path) {
                    Ok(rec) => OutboundResponse::xml(200, rec.wsdl.xml_text.clone().into_bytes()),
                    Err(_) => not_found(),
                };
            }
            Some(q) if q.eq_ignore_ascii_case("cert") => {
                return match self.registry.lookup_by_path(&req.path) {
                    Ok(rec) if rec.descriptor.security_enabled => match self.service_keys(rec.name()) {
                        Ok(k) => OutboundResponse::text(200, render_certificate_text(&k.1)),
                        Err(_) => OutboundResponse::text(500, "certificate unavailable"),
                    },
                    _ => not_found(),
                };
            }
            _ => {}
        }
        let Some(root) = &self.cfg.web_root else {
            return not_found();
        };
        match static_file(root, &req.path) {
            Some((bytes, ct)) => OutboundResponse::new(200, ct, bytes),
            None => not_found(),
        }
    }
}

/// Read a file under `root` for a URL path. Paths escaping the root and
/// directories (other than via `index.html`) are not served.
fn static_file(root: &Path, url_path: &str) -> Option<(Vec<u8>, &'static str)> {
    let rel = Path::new(url_path.trim_start_matches('/'));
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return None;
    }
    let mut path = root.join(rel);
    if path.is_dir() {
        path.push("index.html");
    }
    let bytes = fs::read(&path).ok()?;
    let ct = match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("html" | "htm") => "text/html; charset=utf-8",
        Some("xml" | "wsdl") => "text/xml; charset=utf-8",
        Some("txt") => "text/plain; charset=utf-8",
        Some("css") => "text/css",
        Some("js") => "application/javascript",
        Some("json") => "application/json",
        Some("png") => "image/png",
        _ => "application/octet-stream",
    };
    Some((bytes, ct))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo::{notes_descriptor, NotesHandler, NOTES_PATH};
    use crate::soap::{canonicalize, Param, QName, TypedValue};

    const NOTE_REQUEST: &str = include_str!("../../tests/fixtures/fig13_request.xml");
    const NOTE_RESPONSE: &str = include_str!("../../tests/fixtures/fig14_response.xml");

    fn demo_host(dir: &Path) -> Host {
        let host = init_host(HostConfig::new(dir)).unwrap();
        host.create_service(notes_descriptor(), Arc::new(NotesHandler::with_default_seed())).unwrap();
        host
    }

    fn post(path: &str, body: &[u8]) -> InboundRequest {
        let headers = [("content-type".to_string(), "text/xml".to_string())].into_iter().collect();
        InboundRequest::new(TransportKind::Http, "test", Some("POST".into()), path, None, headers, body.to_vec())
    }

    #[test]
    fn note_request_yields_note_response() {
        let dir = tempfile::tempdir().unwrap();
        let host = demo_host(dir.path());
        let resp = host.handle_request(post(NOTES_PATH, NOTE_REQUEST.as_bytes()));
        assert_eq!(resp.status, 200);
        assert_eq!(canonical_body(&resp.body).unwrap(), canonical_body(NOTE_RESPONSE.as_bytes()).unwrap());
        assert_eq!(canonicalize(&resp.body).unwrap(), canonicalize(NOTE_RESPONSE.as_bytes()).unwrap());
        let log = host.registry().log().entries();
        assert_eq!(log.len(), 1);
        assert_eq!((log[0].service_name.as_str(), log[0].method_name.as_str()), ("CadastroEscolar", "obterNotas"));
    }

    #[test]
    fn unknown_path_and_bad_xml_are_client_faults() {
        let dir = tempfile::tempdir().unwrap();
        let host = demo_host(dir.path());
        for (path, body) in [("/Nope.jws", NOTE_REQUEST.as_bytes()), (NOTES_PATH, b"<SOAP-ENV:Envelope xmlns:SOAP-ENV=\"http://schemas.xmlsoap.org/soap/envelope/\"><".as_slice())] {
            let resp = host.handle_request(post(path, body));
            assert_eq!(resp.status, 500);
            let env = parse_envelope(&resp.body).unwrap();
            assert_eq!(env.fault().unwrap().code, FaultCode::Client);
        }
        assert_eq!(host.registry().log().len(), 2);
    }

    #[test]
    fn identical_recreate_is_a_no_op_and_changes_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let host = demo_host(dir.path());
        let again = host.create_service(notes_descriptor(), Arc::new(NotesHandler::with_default_seed())).unwrap();
        assert_eq!(again.descriptor, notes_descriptor());
        let mut changed = notes_descriptor();
        changed.methods[0].params.pop();
        assert!(matches!(
            host.create_service(changed, Arc::new(NotesHandler::with_default_seed())),
            Err(HostError::Registry(RegistryError::DuplicateService(_)))
        ));
        assert!(dir.path().join("wsdl").join("CadastroEscolar.wsdl").exists());
    }

    #[test]
    fn wsdl_and_web_paths() {
        let dir = tempfile::tempdir().unwrap();
        let web = dir.path().join("www");
        fs::create_dir_all(&web).unwrap();
        fs::write(web.join("index.html"), "<p>hi</p>").unwrap();
        let mut cfg = HostConfig::new(dir.path().join("data"));
        cfg.web_root = Some(web);
        let host = init_host(cfg).unwrap();
        host.create_service(notes_descriptor(), Arc::new(NotesHandler::with_default_seed())).unwrap();
        let get = |path: &str, query: Option<&str>| {
            host.handle_request(InboundRequest::new(
                TransportKind::Http,
                "t",
                Some("GET".into()),
                path,
                query.map(str::to_string),
                Default::default(),
                vec![],
            ))
        };
        let w = get(NOTES_PATH, Some("wsdl"));
        assert_eq!(w.status, 200);
        assert!(String::from_utf8(w.body).unwrap().contains("obterNotasRequest"));
        assert_eq!(get(NOTES_PATH, Some("cert")).status, 404);
        assert_eq!(get("/", None).body, b"<p>hi</p>");
        assert_eq!(get("/index.html", None).status, 200);
        assert_eq!(get("/../secret", None).status, 404);
        assert_eq!(get("/missing.html", None).status, 404);
    }

    #[test]
    fn handler_failures_are_server_faults_and_host_survives() {
        let dir = tempfile::tempdir().unwrap();
        let host = init_host(HostConfig::new(dir.path())).unwrap();
        let mut desc = notes_descriptor();
        desc.service_name = "Boom".into();
        desc.endpoint_path = "/Boom".into();
        desc.namespace_uri = "urn:boom".into();
        host.create_service(desc, Arc::new(|_: &str, args: &[TypedValue]| -> Result<TypedValue, crate::service::HandlerError> {
            match args[0].as_str() {
                Some("panic") => panic!("boom"),
                Some("int") => Ok(TypedValue::Int(1)),
                _ => Err(crate::service::HandlerError::new("no notes")),
            }
        }))
        .unwrap();
        for arg in ["panic", "int", "err"] {
            let env = build_call(
                QName::new("obterNotas", "urn:boom").unwrap(),
                vec![Param::new("codAluno", TypedValue::string(arg)), Param::new("codDisciplina", TypedValue::string("x"))],
            );
            let resp = host.handle_request(post("/Boom", &serialize_envelope(&env)));
            let parsed = parse_envelope(&resp.body).unwrap();
            assert_eq!(parsed.fault().unwrap().code, FaultCode::Server, "{arg}");
        }
    }
}
