//! Minimal HTTP/1.1 framing: one request per connection, `Content-Length`
//! bodies only.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};

use super::MAX_PAYLOAD;

const MAX_HEAD: usize = 64 * 1024;
const MAX_HEADERS: usize = 64;

#[derive(Debug)]
pub(crate) struct RawRequest {
    pub method: String,
    pub path: String,
    pub query: Option<String>,
    pub headers: BTreeMap<String, String>,
    pub body: Vec<u8>,
}

#[derive(Debug)]
pub(crate) enum ReadError {
    /// Peer closed before sending anything.
    Closed,
    /// Protocol violation; answer with this status and close.
    Status(u16, String),
    Io(io::Error),
}

impl From<io::Error> for ReadError {
    fn from(e: io::Error) -> Self {
        ReadError::Io(e)
    }
}

/// Read bytes until the header block is complete. Returns the buffer and
/// the header length.
fn read_head<R: Read>(r: &mut R, is_complete: impl Fn(&[u8]) -> Result<Option<usize>, String>) -> Result<(Vec<u8>, usize), ReadError> {
    let mut buf = Vec::with_capacity(1024);
    let mut chunk = [0u8; 4096];
    loop {
        let n = r.read(&mut chunk)?;
        if n == 0 {
            return Err(if buf.is_empty() {
                ReadError::Closed
            } else {
                ReadError::Status(400, "connection closed mid-header".into())
            });
        }
        buf.extend_from_slice(&chunk[..n]);
        match is_complete(&buf) {
            Ok(Some(len)) => return Ok((buf, len)),
            Ok(None) if buf.len() > MAX_HEAD => return Err(ReadError::Status(431, "header block too large".into())),
            Ok(None) => {}
            Err(m) => return Err(ReadError::Status(400, m)),
        }
    }
}

fn collect_headers(raw: &[httparse::Header<'_>]) -> BTreeMap<String, String> {
    raw.iter()
        .map(|h| (h.name.to_ascii_lowercase(), String::from_utf8_lossy(h.value).trim().to_string()))
        .collect()
}

fn content_length(headers: &BTreeMap<String, String>) -> Result<Option<usize>, ReadError> {
    if headers.get("transfer-encoding").is_some_and(|v| !v.eq_ignore_ascii_case("identity")) {
        return Err(ReadError::Status(501, "chunked bodies are not supported".into()));
    }
    match headers.get("content-length") {
        None => Ok(None),
        Some(v) => v
            .parse::<usize>()
            .map(Some)
            .map_err(|_| ReadError::Status(400, format!("bad Content-Length `{v}`"))),
    }
}

fn read_body<R: Read>(r: &mut R, mut body: Vec<u8>, len: usize) -> Result<Vec<u8>, ReadError> {
    if body.len() > len {
        body.truncate(len);
    }
    let missing = len - body.len();
    let start = body.len();
    body.resize(len, 0);
    r.read_exact(&mut body[start..start + missing]).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            ReadError::Status(400, "body shorter than Content-Length".into())
        } else {
            ReadError::Io(e)
        }
    })?;
    Ok(body)
}

pub(crate) fn read_request<R: Read>(r: &mut R) -> Result<RawRequest, ReadError> {
    let (buf, head_len) = read_head(r, |b| {
        let mut headers = [httparse::EMPTY_HEADER; MAX_HEADERS];
        match httparse::Request::new(&mut headers).parse(b) {
            Ok(httparse::Status::Complete(n)) => Ok(Some(n)),
            Ok(httparse::Status::Partial) => Ok(None),
            Err(e) => Err(format!("bad request head: {e}")),
        }
    })?;
    let mut hdrs = [httparse::EMPTY_HEADER; MAX_HEADERS];
    let mut req = httparse::Request::new(&mut hdrs);
    req.parse(&buf[..head_len]).map_err(|e| ReadError::Status(400, e.to_string()))?;
    let method = req.method.unwrap_or_default().to_string();
    let target = req.path.unwrap_or("/");
    let (path, query) = match target.split_once('?') {
        Some((p, q)) => (p.to_string(), Some(q.to_string())),
        None => (target.to_string(), None),
    };
    let headers = collect_headers(req.headers);

    let len = match (content_length(&headers)?, method.as_str()) {
        (Some(n), _) => n,
        (None, "POST") => return Err(ReadError::Status(411, "Content-Length required".into())),
        (None, _) => 0,
    };
    if len > MAX_PAYLOAD {
        return Err(ReadError::Status(413, format!("payload of {len} bytes exceeds the limit")));
    }
    let body = read_body(r, buf[head_len..].to_vec(), len)?;
    Ok(RawRequest { method, path, query, headers, body })
}

pub(crate) fn reason(status: u16) -> &'static str {
    match status {
        200 => "OK",
        400 => "Bad Request",
        404 => "Not Found",
        405 => "Method Not Allowed",
        411 => "Length Required",
        413 => "Payload Too Large",
        431 => "Request Header Fields Too Large",
        500 => "Internal Server Error",
        501 => "Not Implemented",
        503 => "Service Unavailable",
        _ => "Unknown",
    }
}

pub(crate) fn write_response<W: Write>(w: &mut W, status: u16, content_type: &str, body: &[u8]) -> io::Result<()> {
    let head = format!(
        "HTTP/1.1 {status} {}\r\nContent-Type: {content_type}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        reason(status),
        body.len()
    );
    w.write_all(head.as_bytes())?;
    w.write_all(body)?;
    w.flush()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    /// Lower-cased header names.
    pub headers: BTreeMap<String, String>,
    pub body: Vec<u8>,
}

pub(crate) fn read_response<R: Read>(r: &mut R) -> Result<HttpResponse, ReadError> {
    let (buf, head_len) = read_head(r, |b| {
        let mut headers = [httparse::EMPTY_HEADER; MAX_HEADERS];
        match httparse::Response::new(&mut headers).parse(b) {
            Ok(httparse::Status::Complete(n)) => Ok(Some(n)),
            Ok(httparse::Status::Partial) => Ok(None),
            Err(e) => Err(format!("bad response head: {e}")),
        }
    })?;
    let mut hdrs = [httparse::EMPTY_HEADER; MAX_HEADERS];
    let mut resp = httparse::Response::new(&mut hdrs);
    resp.parse(&buf[..head_len]).map_err(|e| ReadError::Status(400, e.to_string()))?;
    let status = resp.code.unwrap_or(0);
    let headers = collect_headers(resp.headers);
    let body = match content_length(&headers)? {
        Some(n) if n > MAX_PAYLOAD => return Err(ReadError::Status(413, "response too large".into())),
        Some(n) => read_body(r, buf[head_len..].to_vec(), n)?,
        None => {
            let mut body = buf[head_len..].to_vec();
            r.take(MAX_PAYLOAD as u64).read_to_end(&mut body)?;
            body
        }
    };
    Ok(HttpResponse { status, headers, body })
}
