//! Consumer-side helpers for each transport.

use std::io::Write;
use std::net::TcpStream;
use std::time::Duration;

use crossbeam_channel::bounded;

use super::http::{self, HttpResponse, ReadError};
use super::{
    loopback_sender, read_frame, write_frame, InboundRequest, Job, OutboundResponse, TransportError, TransportKind,
    DEFAULT_PORT, XML_CONTENT_TYPE,
};

const CLIENT_TIMEOUT: Duration = Duration::from_secs(30);

fn connect(host: &str, port: u16) -> Result<TcpStream, TransportError> {
    let s = TcpStream::connect((host, port))?;
    s.set_read_timeout(Some(CLIENT_TIMEOUT))?;
    s.set_write_timeout(Some(CLIENT_TIMEOUT))?;
    s.set_nodelay(true)?;
    Ok(s)
}

fn read_error(e: ReadError) -> TransportError {
    match e {
        ReadError::Closed => TransportError::PeerGone,
        ReadError::Status(_, m) => TransportError::Malformed(m),
        ReadError::Io(e) => TransportError::Io(e),
    }
}

struct Target {
    kind: TransportKind,
    host: String,
    port: u16,
    path_and_query: String,
}

fn target(url: &str) -> Result<Target, TransportError> {
    let u = url::Url::parse(url).map_err(|e| TransportError::InvalidBinding(format!("`{url}`: {e}")))?;
    let kind = match u.scheme() {
        "http" => TransportKind::Http,
        "tcp" => TransportKind::RawTcp,
        "loopback" => TransportKind::Loopback,
        s => return Err(TransportError::InvalidBinding(format!("unsupported scheme `{s}`"))),
    };
    let host = match u.host() {
        Some(url::Host::Ipv6(a)) => a.to_string(),
        Some(h) => h.to_string(),
        None => return Err(TransportError::InvalidBinding(format!("`{url}` has no host"))),
    };
    let mut path_and_query = u.path().to_string();
    if path_and_query.is_empty() {
        path_and_query.push('/');
    }
    if let Some(q) = u.query() {
        path_and_query.push('?');
        path_and_query.push_str(q);
    }
    Ok(Target { kind, host, port: u.port().unwrap_or(DEFAULT_PORT), path_and_query })
}

fn http_request(
    url: &str,
    method: &str,
    headers: &[(&str, &str)],
    body: &[u8],
) -> Result<HttpResponse, TransportError> {
    let t = target(url)?;
    if t.kind != TransportKind::Http {
        return Err(TransportError::InvalidBinding(format!("`{url}` is not an http URL")));
    }
    let mut s = connect(&t.host, t.port)?;
    let mut head = format!("{method} {} HTTP/1.1\r\nHost: {}:{}\r\n", t.path_and_query, t.host, t.port);
    for (k, v) in headers {
        head.push_str(&format!("{k}: {v}\r\n"));
    }
    if method == "POST" {
        head.push_str(&format!("Content-Length: {}\r\n", body.len()));
    }
    head.push_str("Connection: close\r\n\r\n");
    s.write_all(head.as_bytes())?;
    s.write_all(body)?;
    s.flush()?;
    http::read_response(&mut s).map_err(read_error)
}

/// POST `body` to `url` as a SOAP request.
pub fn http_post(url: &str, body: &[u8]) -> Result<HttpResponse, TransportError> {
    http_request(url, "POST", &[("Content-Type", XML_CONTENT_TYPE), ("SOAPAction", "\"\"")], body)
}

pub fn http_get(url: &str) -> Result<HttpResponse, TransportError> {
    http_request(url, "GET", &[], &[])
}

/// Send one frame over a fresh raw TCP connection and read the reply frame.
pub fn tcp_call(host: &str, port: u16, payload: &[u8]) -> Result<Vec<u8>, TransportError> {
    let mut s = connect(host, port)?;
    write_frame(&mut s, payload)?;
    read_frame(&mut s)?.ok_or(TransportError::PeerGone)
}

/// Hand a request to an in-process loopback listener and wait for its reply.
pub fn loopback_request(
    address: &str,
    port: u16,
    path: &str,
    payload: Vec<u8>,
) -> Result<OutboundResponse, TransportError> {
    let tx = loopback_sender(address, port).ok_or(TransportError::PeerGone)?;
    let (reply_tx, reply_rx) = bounded(1);
    let req = InboundRequest::raw(TransportKind::Loopback, "loopback", path, payload);
    tx.send(Job::Loopback(req, reply_tx)).map_err(|_| TransportError::PeerGone)?;
    drop(tx);
    reply_rx.recv().map_err(|_| TransportError::PeerGone)
}

/// A reply to [`exchange`]. `status` is `None` on transports without one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reply {
    pub status: Option<u16>,
    pub body: Vec<u8>,
}

/// Send a SOAP payload to `url` over whichever transport its scheme names
/// (`http://`, `tcp://`, `loopback://`).
pub fn exchange(url: &str, payload: &[u8]) -> Result<Reply, TransportError> {
    let t = target(url)?;
    match t.kind {
        TransportKind::Http => {
            let r = http_post(url, payload)?;
            Ok(Reply { status: Some(r.status), body: r.body })
        }
        TransportKind::RawTcp => Ok(Reply { status: None, body: tcp_call(&t.host, t.port, payload)? }),
        TransportKind::Loopback => {
            let path = t.path_and_query.split('?').next().unwrap_or("/").to_string();
            let r = loopback_request(&t.host, t.port, &path, payload.to_vec())?;
            Ok(Reply { status: Some(r.status), body: r.body })
        }
    }
}
