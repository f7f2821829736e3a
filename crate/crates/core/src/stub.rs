//! A small in-process HTTP server that speaks enough of the GDMC block
//! placement interface (and, optionally, chat completions) for tests and
//! offline demos. One request per connection, handled in arrival order.

use std::collections::HashSet;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use serde::Serialize;
use serde_json::{json, Value};

use crate::interlayer::BlockPoint;

const MAX_HEADER_BYTES: usize = 64 * 1024;

#[derive(Debug, Clone)]
pub struct StubConfig {
    pub version: String,
    /// Body coordinates the server refuses to place.
    pub reject: HashSet<BlockPoint>,
    /// Content returned from `POST /chat/completions`; 404 when unset.
    pub chat_reply: Option<String>,
}

impl Default for StubConfig {
    fn default() -> Self {
        Self { version: "1.19.2".into(), reject: HashSet::new(), chat_reply: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecordedRequest {
    pub method: String,
    pub target: String,
    pub body: String,
}

type Transcript = Arc<Mutex<Vec<RecordedRequest>>>;

pub struct StubServer {
    addr: SocketAddr,
    transcript: Transcript,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl StubServer {
    /// Binds an ephemeral port on the loopback interface.
    pub fn start(config: StubConfig) -> io::Result<Self> {
        Self::bind("127.0.0.1:0", config)
    }

    pub fn bind(addr: impl ToSocketAddrs, config: StubConfig) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let transcript = Transcript::default();
        let stop = Arc::new(AtomicBool::new(false));
        let handle = {
            let (transcript, stop) = (transcript.clone(), stop.clone());
            std::thread::spawn(move || {
                for stream in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    if let Ok(stream) = stream {
                        let _ = serve(stream, &config, &transcript);
                    }
                }
            })
        };
        Ok(Self { addr, transcript, stop, handle: Some(handle) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn transcript(&self) -> Vec<RecordedRequest> {
        self.transcript.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// `METHOD target` then the body, one request per paragraph.
    pub fn transcript_text(&self) -> String {
        let mut out = String::new();
        for r in self.transcript() {
            out.push_str(&format!("{} {}\n", r.method, r.target));
            if !r.body.is_empty() {
                out.push_str(&r.body);
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }

    /// Blocks until the server thread exits (it only does so on shutdown).
    pub fn join(mut self) {
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }

    fn stop_thread(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the blocking accept
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop_thread();
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        if self.handle.is_some() {
            self.stop_thread();
        }
    }
}

fn read_request(stream: &mut TcpStream) -> io::Result<RecordedRequest> {
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let mut parts = line.split_whitespace();
    let method = parts.next().unwrap_or("").to_owned();
    let target = parts.next().unwrap_or("").to_owned();

    let mut length = 0usize;
    let mut header_bytes = line.len();
    loop {
        let mut h = String::new();
        let n = reader.read_line(&mut h)?;
        header_bytes += n;
        if n == 0 || h == "\r\n" || h == "\n" || header_bytes > MAX_HEADER_BYTES {
            break;
        }
        if let Some((name, value)) = h.split_once(':') {
            if name.trim().eq_ignore_ascii_case("content-length") {
                length = value.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body)?;
    Ok(RecordedRequest { method, target, body: String::from_utf8_lossy(&body).into_owned() })
}

fn respond(stream: &mut TcpStream, status: &str, content_type: &str, body: &str) -> io::Result<()> {
    write!(
        stream,
        "HTTP/1.1 {status}\r\nContent-Type: {content_type}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )?;
    stream.flush()
}

fn block_acks(body: &str, reject: &HashSet<BlockPoint>) -> Option<String> {
    let Value::Array(items) = serde_json::from_str(body).ok()? else {
        return None;
    };
    let acks: Vec<Value> = items
        .iter()
        .map(|item| {
            let c = |k: &str| item.get(k).and_then(Value::as_i64).map(|v| v as i32);
            match (c("x"), c("y"), c("z")) {
                (Some(x), Some(y), Some(z)) if !reject.contains(&BlockPoint::new(x, y, z)) => json!({"status": 1}),
                (Some(_), Some(_), Some(_)) => json!({"status": 0, "message": "rejected by stub"}),
                _ => json!({"status": 0, "message": "missing coordinates"}),
            }
        })
        .collect();
    Some(Value::Array(acks).to_string())
}

fn serve(mut stream: TcpStream, config: &StubConfig, transcript: &Transcript) -> io::Result<()> {
    let req = read_request(&mut stream)?;
    if req.method.is_empty() {
        return Ok(());
    }
    transcript.lock().unwrap_or_else(|e| e.into_inner()).push(req.clone());
    let path = req.target.split('?').next().unwrap_or("");
    match (req.method.as_str(), path) {
        ("GET", "/version") => respond(&mut stream, "200 OK", "text/plain", &config.version)?,
        ("PUT", "/blocks") => match block_acks(&req.body, &config.reject) {
            Some(body) => respond(&mut stream, "200 OK", "application/json", &body)?,
            None => respond(&mut stream, "400 Bad Request", "text/plain", "expected a JSON array")?,
        },
        ("POST", p) if p.ends_with("/chat/completions") && config.chat_reply.is_some() => {
            let body = json!({
                "choices": [{
                    "index": 0,
                    "message": {"role": "assistant", "content": config.chat_reply},
                    "finish_reason": "stop"
                }]
            });
            respond(&mut stream, "200 OK", "application/json", &body.to_string())?
        }
        _ => respond(&mut stream, "404 Not Found", "text/plain", "not found")?,
    }
    let _ = stream.shutdown(Shutdown::Both);
    Ok(())
}
