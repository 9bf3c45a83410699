//! Listeners over HTTP, length-prefixed TCP and an in-process loopback,
//! feeding a bounded worker pool.
//!
//! Raw TCP frames are `[len: u32 big-endian][payload]`; a connection may
//! carry several request frames, each answered by one response frame.

mod client;
mod http;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, OnceLock};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use crossbeam_channel::{bounded, Receiver, Sender};

pub use client::{exchange, http_get, http_post, loopback_request, tcp_call, Reply};
pub use http::HttpResponse;

use crate::soap::{looks_like_envelope, make_fault, serialize_envelope, FaultCode};

pub const DEFAULT_PORT: u16 = 5000;
pub const DEFAULT_WORKERS: usize = 32;
/// Largest accepted request or response payload.
pub const MAX_PAYLOAD: usize = 16 * 1024 * 1024;
pub const XML_CONTENT_TYPE: &str = "text/xml; charset=utf-8";

const ACCEPT_POLL: Duration = Duration::from_millis(10);
const IO_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("cannot bind {0}")]
    BindFailure(String),
    #[error("invalid binding: {0}")]
    InvalidBinding(String),
    #[error("peer went away")]
    PeerGone,
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("payload of {0} bytes exceeds the limit")]
    TooLarge(usize),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransportKind {
    Http,
    RawTcp,
    Loopback,
}

impl TransportKind {
    pub fn scheme(self) -> &'static str {
        match self {
            TransportKind::Http => "http",
            TransportKind::RawTcp => "tcp",
            TransportKind::Loopback => "loopback",
        }
    }
}

/// Where a listener accepts requests. Written `scheme://address[:port]`
/// with schemes `http`, `tcp` and `loopback`; the port defaults to 5000.
/// Port 0 asks the OS for a free port.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BindingConfig {
    pub kind: TransportKind,
    pub address: String,
    pub port: u16,
}

impl BindingConfig {
    pub fn new(kind: TransportKind, address: impl Into<String>, port: u16) -> Self {
        BindingConfig { kind, address: address.into(), port }
    }

    fn key(&self) -> String {
        format!("{}:{}", self.address, self.port)
    }
}

impl fmt::Display for BindingConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.address.contains(':') {
            write!(f, "{}://[{}]:{}", self.kind.scheme(), self.address, self.port)
        } else {
            write!(f, "{}://{}:{}", self.kind.scheme(), self.address, self.port)
        }
    }
}

impl FromStr for BindingConfig {
    type Err = TransportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |m: &str| TransportError::InvalidBinding(format!("`{s}`: {m}"));
        let u = url::Url::parse(s).map_err(|e| bad(&e.to_string()))?;
        let kind = match u.scheme() {
            "http" => TransportKind::Http,
            "tcp" => TransportKind::RawTcp,
            "loopback" => TransportKind::Loopback,
            other => return Err(bad(&format!("unknown scheme `{other}`"))),
        };
        let address = match u.host() {
            Some(url::Host::Ipv6(a)) => a.to_string(),
            Some(h) => h.to_string(),
            None => return Err(bad("missing address")),
        };
        if !matches!(u.path(), "" | "/") || u.query().is_some() {
            return Err(bad("a binding has no path"));
        }
        Ok(BindingConfig { kind, address, port: u.port().unwrap_or(DEFAULT_PORT) })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Soap,
    Web,
    Malformed,
}

/// Decide whether a request is SOAP, a plain web request or neither.
///
/// HTTP: GET is web; POST is SOAP when the body root is a SOAP Envelope and
/// it carries an XML content type or a `SOAPAction` header, web when the
/// body is not an envelope. Raw TCP and loopback: SOAP iff the payload root
/// is an Envelope. Everything else is malformed.
pub fn classify_request(
    kind: TransportKind,
    method: Option<&str>,
    headers: &BTreeMap<String, String>,
    payload: &[u8],
) -> Classification {
    let envelope = looks_like_envelope(payload);
    match kind {
        TransportKind::Http => match method {
            Some("GET") => Classification::Web,
            Some("POST") if !envelope => Classification::Web,
            Some("POST") => {
                let xml_type = headers.get("content-type").is_some_and(|ct| {
                    let mime = ct.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
                    mime == "text/xml" || mime == "application/xml" || mime.ends_with("+xml")
                });
                if xml_type || headers.contains_key("soapaction") {
                    Classification::Soap
                } else {
                    Classification::Malformed
                }
            }
            _ => Classification::Malformed,
        },
        TransportKind::RawTcp | TransportKind::Loopback if envelope => Classification::Soap,
        _ => Classification::Malformed,
    }
}

#[derive(Debug, Clone)]
pub struct InboundRequest {
    pub transport_kind: TransportKind,
    pub peer: String,
    /// HTTP method; `None` off HTTP.
    pub method: Option<String>,
    /// URL path; empty when the transport carries none.
    pub path: String,
    pub query: Option<String>,
    /// Lower-cased header names; empty off HTTP.
    pub headers: BTreeMap<String, String>,
    pub payload: Vec<u8>,
    pub classification: Classification,
}

impl InboundRequest {
    pub fn new(
        transport_kind: TransportKind,
        peer: impl Into<String>,
        method: Option<String>,
        path: impl Into<String>,
        query: Option<String>,
        headers: BTreeMap<String, String>,
        payload: Vec<u8>,
    ) -> Self {
        let classification = classify_request(transport_kind, method.as_deref(), &headers, &payload);
        InboundRequest {
            transport_kind,
            peer: peer.into(),
            method,
            path: path.into(),
            query,
            headers,
            payload,
            classification,
        }
    }

    /// A framed request as it arrives over raw TCP.
    pub fn raw(kind: TransportKind, peer: impl Into<String>, path: impl Into<String>, payload: Vec<u8>) -> Self {
        InboundRequest::new(kind, peer, None, path, None, BTreeMap::new(), payload)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutboundResponse {
    pub status: u16,
    pub content_type: String,
    pub body: Vec<u8>,
}

impl OutboundResponse {
    pub fn new(status: u16, content_type: impl Into<String>, body: Vec<u8>) -> Self {
        OutboundResponse { status, content_type: content_type.into(), body }
    }

    pub fn xml(status: u16, body: Vec<u8>) -> Self {
        OutboundResponse::new(status, XML_CONTENT_TYPE, body)
    }

    pub fn text(status: u16, msg: impl Into<String>) -> Self {
        OutboundResponse::new(status, "text/plain; charset=utf-8", msg.into().into_bytes())
    }

    /// A fault envelope with the status SOAP over HTTP uses for faults.
    pub fn fault(code: FaultCode, msg: impl Into<String>) -> Self {
        OutboundResponse::xml(500, serialize_envelope(&make_fault(code, msg, None)))
    }
}

pub trait Dispatcher: Send + Sync + 'static {
    fn dispatch(&self, req: InboundRequest) -> OutboundResponse;
}

impl<F> Dispatcher for F
where
    F: Fn(InboundRequest) -> OutboundResponse + Send + Sync + 'static,
{
    fn dispatch(&self, req: InboundRequest) -> OutboundResponse {
        self(req)
    }
}

fn dispatch_guarded(d: &dyn Dispatcher, req: InboundRequest) -> OutboundResponse {
    catch_unwind(AssertUnwindSafe(|| d.dispatch(req)))
        .unwrap_or_else(|_| OutboundResponse::fault(FaultCode::Server, "internal error"))
}

fn peer_gone(e: io::Error) -> TransportError {
    match e.kind() {
        io::ErrorKind::BrokenPipe
        | io::ErrorKind::ConnectionReset
        | io::ErrorKind::ConnectionAborted
        | io::ErrorKind::UnexpectedEof => TransportError::PeerGone,
        _ => TransportError::Io(e),
    }
}

pub fn write_frame<W: Write>(w: &mut W, payload: &[u8]) -> Result<(), TransportError> {
    if payload.len() > MAX_PAYLOAD {
        return Err(TransportError::TooLarge(payload.len()));
    }
    let len = (payload.len() as u32).to_be_bytes();
    w.write_all(&len).and_then(|_| w.write_all(payload)).and_then(|_| w.flush()).map_err(peer_gone)
}

/// Read one frame. `Ok(None)` on a clean end of stream before the prefix.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Vec<u8>>, TransportError> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(TransportError::Malformed("truncated length prefix".into())),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(peer_gone(e)),
        }
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_PAYLOAD {
        return Err(TransportError::TooLarge(len));
    }
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => TransportError::Malformed("truncated frame".into()),
        _ => peer_gone(e),
    })?;
    Ok(Some(payload))
}

/// Write `resp` to an open connection in the wire format of `kind`.
pub fn send_response<W: Write>(w: &mut W, kind: TransportKind, resp: &OutboundResponse) -> Result<(), TransportError> {
    match kind {
        TransportKind::Http => {
            http::write_response(w, resp.status, &resp.content_type, &resp.body).map_err(peer_gone)
        }
        TransportKind::RawTcp | TransportKind::Loopback => write_frame(w, &resp.body),
    }
}

enum Job {
    Http(TcpStream, SocketAddr),
    Tcp(TcpStream, SocketAddr),
    Loopback(InboundRequest, Sender<OutboundResponse>),
}

fn loopback_table() -> &'static Mutex<HashMap<String, Sender<Job>>> {
    static TABLE: OnceLock<Mutex<HashMap<String, Sender<Job>>>> = OnceLock::new();
    TABLE.get_or_init(Mutex::default)
}

/// A running listener. Dropping it stops it.
pub struct Listener {
    binding: BindingConfig,
    stop: Arc<AtomicBool>,
    acceptor: Option<JoinHandle<()>>,
    workers: Vec<JoinHandle<()>>,
}

impl fmt::Debug for Listener {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Listener").field("binding", &self.binding).finish()
    }
}

impl Listener {
    /// The binding actually in use (port resolved when 0 was requested).
    pub fn binding(&self) -> &BindingConfig {
        &self.binding
    }

    /// Stop accepting, then wait until every accepted request is answered.
    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if self.binding.kind == TransportKind::Loopback {
            loopback_table().lock().unwrap_or_else(|p| p.into_inner()).remove(&self.binding.key());
        }
        if let Some(a) = self.acceptor.take() {
            let _ = a.join();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Drop for Listener {
    fn drop(&mut self) {
        self.shutdown();
    }
}

pub fn start_listener(
    cfg: &BindingConfig,
    dispatcher: Arc<dyn Dispatcher>,
    workers: usize,
) -> Result<Listener, TransportError> {
    let workers = workers.max(1);
    let stop = Arc::new(AtomicBool::new(false));
    let (tx, rx) = bounded::<Job>(workers * 4);
    let mut binding = cfg.clone();

    let acceptor = match cfg.kind {
        TransportKind::Loopback => {
            if cfg.port == 0 {
                return Err(TransportError::InvalidBinding("loopback bindings need an explicit port".into()));
            }
            let mut table = loopback_table().lock().unwrap_or_else(|p| p.into_inner());
            if table.contains_key(&cfg.key()) {
                return Err(TransportError::BindFailure(cfg.to_string()));
            }
            table.insert(cfg.key(), tx);
            None
        }
        TransportKind::Http | TransportKind::RawTcp => {
            let addrs: Vec<SocketAddr> = (cfg.address.as_str(), cfg.port)
                .to_socket_addrs()
                .map_err(|e| TransportError::BindFailure(format!("{cfg}: {e}")))?
                .collect();
            let listener =
                TcpListener::bind(&addrs[..]).map_err(|e| TransportError::BindFailure(format!("{cfg}: {e}")))?;
            listener.set_nonblocking(true)?;
            binding.port = listener.local_addr()?.port();
            let stop = stop.clone();
            let kind = cfg.kind;
            Some(
                thread::Builder::new()
                    .name(format!("accept-{binding}"))
                    .spawn(move || accept_loop(listener, kind, tx, stop))?,
            )
        }
    };

    let workers = (0..workers)
        .map(|i| {
            let rx = rx.clone();
            let d = dispatcher.clone();
            let stop = stop.clone();
            thread::Builder::new()
                .name(format!("worker-{i}"))
                .spawn(move || worker_loop(rx, d, stop))
        })
        .collect::<io::Result<Vec<_>>>()?;

    Ok(Listener { binding, stop, acceptor, workers })
}

fn accept_loop(listener: TcpListener, kind: TransportKind, tx: Sender<Job>, stop: Arc<AtomicBool>) {
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let _ = stream.set_nonblocking(false);
                let _ = stream.set_read_timeout(Some(IO_TIMEOUT));
                let _ = stream.set_write_timeout(Some(IO_TIMEOUT));
                let _ = stream.set_nodelay(true);
                let job = match kind {
                    TransportKind::Http => Job::Http(stream, peer),
                    _ => Job::Tcp(stream, peer),
                };
                if tx.send(job).is_err() {
                    return;
                }
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(ACCEPT_POLL),
            Err(_) => thread::sleep(ACCEPT_POLL),
        }
    }
}

fn worker_loop(rx: Receiver<Job>, d: Arc<dyn Dispatcher>, stop: Arc<AtomicBool>) {
    // Runs until every sender is gone and the queue is drained.
    for job in rx {
        match job {
            Job::Http(stream, peer) => serve_http(stream, peer, &*d),
            Job::Tcp(stream, peer) => serve_tcp(stream, peer, &*d, &stop),
            Job::Loopback(req, reply) => {
                let _ = reply.send(dispatch_guarded(&*d, req));
            }
        }
    }
}

fn serve_http(mut stream: TcpStream, peer: SocketAddr, d: &dyn Dispatcher) {
    let resp = match http::read_request(&mut stream) {
        Ok(raw) => {
            let req = InboundRequest::new(
                TransportKind::Http,
                peer.to_string(),
                Some(raw.method),
                raw.path,
                raw.query,
                raw.headers,
                raw.body,
            );
            dispatch_guarded(d, req)
        }
        Err(http::ReadError::Closed) | Err(http::ReadError::Io(_)) => return,
        Err(http::ReadError::Status(status, msg)) => OutboundResponse::text(status, msg),
    };
    let _ = send_response(&mut stream, TransportKind::Http, &resp);
    let _ = stream.shutdown(std::net::Shutdown::Write);
}

fn serve_tcp(mut stream: TcpStream, peer: SocketAddr, d: &dyn Dispatcher, stop: &AtomicBool) {
    loop {
        match read_frame(&mut stream) {
            Ok(Some(payload)) => {
                let req = InboundRequest::raw(TransportKind::RawTcp, peer.to_string(), "", payload);
                let resp = dispatch_guarded(d, req);
                if send_response(&mut stream, TransportKind::RawTcp, &resp).is_err() {
                    return;
                }
            }
            Ok(None) | Err(TransportError::PeerGone) | Err(TransportError::Io(_)) => return,
            Err(e @ (TransportError::TooLarge(_) | TransportError::Malformed(_))) => {
                let resp = OutboundResponse::fault(FaultCode::Client, e.to_string());
                let _ = send_response(&mut stream, TransportKind::RawTcp, &resp);
                return;
            }
            Err(_) => return,
        }
        if stop.load(Ordering::SeqCst) {
            return;
        }
    }
}

fn loopback_sender(address: &str, port: u16) -> Option<Sender<Job>> {
    loopback_table()
        .lock()
        .unwrap_or_else(|p| p.into_inner())
        .get(&format!("{address}:{port}"))
        .cloned()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SOAP: &str = "<s:Envelope xmlns:s=\"http://schemas.xmlsoap.org/soap/envelope/\"><s:Body><op/></s:Body></s:Envelope>";

    fn hdrs(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn binding_parsing() {
        let b: BindingConfig = "http://0.0.0.0:5000".parse().unwrap();
        assert_eq!(b, BindingConfig::new(TransportKind::Http, "0.0.0.0", 5000));
        let b: BindingConfig = "tcp://127.0.0.1:5001".parse().unwrap();
        assert_eq!(b.kind, TransportKind::RawTcp);
        let b: BindingConfig = "loopback://demo".parse().unwrap();
        assert_eq!((b.kind, b.port), (TransportKind::Loopback, DEFAULT_PORT));
        assert_eq!(b.to_string(), "loopback://demo:5000");
        assert!("ftp://x:1".parse::<BindingConfig>().is_err());
        assert!("http://x:1/path".parse::<BindingConfig>().is_err());
        assert!("http://x:70000".parse::<BindingConfig>().is_err());
    }

    #[test]
    fn classification_table() {
        use Classification::*;
        use TransportKind::*;
        let xml = hdrs(&[("content-type", "text/xml; charset=utf-8")]);
        let action = hdrs(&[("soapaction", "\"\"")]);
        let none = BTreeMap::new();
        assert_eq!(classify_request(Http, Some("POST"), &xml, SOAP.as_bytes()), Soap);
        assert_eq!(classify_request(Http, Some("POST"), &action, SOAP.as_bytes()), Soap);
        assert_eq!(classify_request(Http, Some("POST"), &none, SOAP.as_bytes()), Malformed);
        assert_eq!(classify_request(Http, Some("GET"), &none, b""), Web);
        assert_eq!(classify_request(Http, Some("POST"), &xml, b"hello"), Web);
        assert_eq!(classify_request(Http, Some("PUT"), &xml, SOAP.as_bytes()), Malformed);
        assert_eq!(classify_request(RawTcp, None, &none, b"hello"), Malformed);
        assert_eq!(classify_request(RawTcp, None, &none, SOAP.as_bytes()), Soap);
        assert_eq!(classify_request(Loopback, None, &none, SOAP.as_bytes()), Soap);
    }

    #[test]
    fn frames_round_trip() {
        for len in [0usize, 1, 255, 256, 65536] {
            let payload: Vec<u8> = (0..len).map(|i| (i * 31) as u8).collect();
            let mut buf = Vec::new();
            write_frame(&mut buf, &payload).unwrap();
            assert_eq!(&buf[..4], &(len as u32).to_be_bytes());
            assert_eq!(read_frame(&mut &buf[..]).unwrap(), Some(payload));
        }
        assert_eq!(read_frame(&mut &b""[..]).unwrap(), None);
        assert!(matches!(read_frame(&mut &b"\x00\x00"[..]), Err(TransportError::Malformed(_))));
        assert!(matches!(read_frame(&mut &b"\xff\xff\xff\xff"[..]), Err(TransportError::TooLarge(_))));
    }

    #[test]
    fn loopback_identity_and_duplicate_bind() {
        let cfg: BindingConfig = "loopback://unit-identity:7".parse().unwrap();
        let echo: Arc<dyn Dispatcher> = Arc::new(|r: InboundRequest| OutboundResponse::xml(200, r.payload));
        let l = start_listener(&cfg, echo.clone(), 2).unwrap();
        assert!(matches!(start_listener(&cfg, echo, 1), Err(TransportError::BindFailure(_))));
        let reply = loopback_request("unit-identity", 7, "/x", SOAP.as_bytes().to_vec()).unwrap();
        assert_eq!(reply.body, SOAP.as_bytes());
        l.stop();
        assert!(loopback_request("unit-identity", 7, "/x", vec![]).is_err());
    }
}
