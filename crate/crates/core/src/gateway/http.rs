//! Minimal HTTP/1.1 surface: parse a request head, build a response with an
//! always-present Content-Length, close the connection after each exchange.

use std::io::{self, Read};
use std::net::TcpStream;

const MAX_HEAD_BYTES: usize = 8192;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedRequest {
    pub method: String,
    pub target: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseOutcome {
    Request(ParsedRequest),
    Malformed(String),
}

/// Read up to the blank line that ends the request head and parse the
/// request line. Header fields are read and discarded; only GETs without
/// bodies are served here.
pub fn read_request_head(stream: &mut TcpStream) -> io::Result<ParseOutcome> {
    let mut buf = Vec::with_capacity(512);
    let mut byte = [0u8; 1];
    loop {
        match stream.read(&mut byte) {
            Ok(0) => break,
            Ok(_) => {
                buf.push(byte[0]);
                if buf.len() > MAX_HEAD_BYTES {
                    return Ok(ParseOutcome::Malformed(
                        "request head too large".to_string(),
                    ));
                }
                if buf.ends_with(b"\r\n\r\n") || buf.ends_with(b"\n\n") {
                    break;
                }
            }
            Err(e) => return Err(e),
        }
    }
    parse_head(&buf)
}

fn parse_head(head: &[u8]) -> io::Result<ParseOutcome> {
    let text = match std::str::from_utf8(head) {
        Ok(t) => t,
        Err(_) => {
            return Ok(ParseOutcome::Malformed(
                "request head is not UTF-8".to_string(),
            ))
        }
    };
    let request_line = match text.lines().next() {
        Some(l) if !l.trim().is_empty() => l,
        _ => return Ok(ParseOutcome::Malformed("empty request".to_string())),
    };
    let mut parts = request_line.split(' ');
    match (parts.next(), parts.next(), parts.next(), parts.next()) {
        (Some(method), Some(target), Some(version), None)
            if !method.is_empty() && version.starts_with("HTTP/") =>
        {
            Ok(ParseOutcome::Request(ParsedRequest {
                method: method.to_string(),
                target: target.to_string(),
            }))
        }
        _ => Ok(ParseOutcome::Malformed(format!(
            "bad request line {request_line:?}"
        ))),
    }
}

/// Request target with query string and fragment stripped.
pub fn path_of_target(target: &str) -> &str {
    let end = target.find(['?', '#']).unwrap_or(target.len());
    &target[..end]
}

pub fn status_text(status: u16) -> &'static str {
    match status {
        200 => "OK",
        404 => "Not Found",
        405 => "Method Not Allowed",
        500 => "Internal Server Error",
        503 => "Service Unavailable",
        _ => "Unknown",
    }
}

pub fn error_body(status: u16) -> Vec<u8> {
    format!("{} {}\n", status, status_text(status)).into_bytes()
}

/// Serialize a full response. `replica` fills the X-CDS-Replica observability
/// header (`<id>` or `REBOOT`) on verified responses.
pub fn build_response(
    status: u16,
    content_type: &str,
    replica: Option<&str>,
    body: &[u8],
) -> Vec<u8> {
    let mut head = format!(
        "HTTP/1.1 {status} {}\r\nContent-Type: {content_type}\r\nContent-Length: {}\r\n",
        status_text(status),
        body.len()
    );
    if let Some(replica) = replica {
        head.push_str(&format!("X-CDS-Replica: {replica}\r\n"));
    }
    if status == 405 {
        head.push_str("Allow: GET\r\n");
    }
    head.push_str("Connection: close\r\n\r\n");
    let mut out = head.into_bytes();
    out.extend_from_slice(body);
    out
}
