//! Session host over TCP. Each message is a 4-byte big-endian length
//! followed by that many bytes of JSON.
//!
//! A single writer thread owns the [`Session`]; connection threads only
//! forward bytes to it and drain their own outbound queue, so requests are
//! handled strictly in arrival order. Frames a request produces go to every
//! subscribed connection before the response goes to the requester, so a
//! client holding a response has already received its frames.

use std::collections::BTreeMap;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{self, Receiver, Sender};
use std::thread;

use serde::Serialize;
use serde_json::{json, Value};

use crate::session::{Envelope, ErrorCode, FrameMsg, Request, Response, Session, PROTOCOL_VERSION};

pub const DEFAULT_LISTEN: &str = "127.0.0.1:7878";
pub const LISTEN_ENV: &str = "RHOMBOT_LISTEN";
const MAX_MESSAGE: usize = 16 << 20;

pub fn write_message<W: Write, T: Serialize + ?Sized>(w: &mut W, msg: &T) -> io::Result<()> {
    let body = serde_json::to_vec(msg)?;
    write_raw(w, &body)
}

fn write_raw<W: Write>(w: &mut W, body: &[u8]) -> io::Result<()> {
    let len = u32::try_from(body.len()).map_err(|_| io::Error::other("message too large"))?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(body)?;
    w.flush()
}

/// Next message body, or `None` on a clean end of stream.
pub fn read_message<R: Read>(r: &mut R) -> io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_MESSAGE {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("message of {len} bytes")));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)?;
    Ok(Some(body))
}

enum Event {
    Open(u64, Sender<Vec<u8>>),
    Message(u64, Vec<u8>),
    Close(u64),
}

struct Conn {
    out: Sender<Vec<u8>>,
    subscribed: bool,
}

fn encode<T: Serialize>(msg: &T) -> Vec<u8> {
    serde_json::to_vec(msg).expect("protocol messages always serialize")
}

/// Parses a request, falling back to a `bad_request` response that still
/// echoes the id when one can be found.
fn parse_request(body: &[u8]) -> Result<Envelope, Response> {
    let value: Value = serde_json::from_slice(body).map_err(|e| {
        Response::failure(None, ErrorCode::BadRequest, format!("invalid JSON: {e}"), Value::Null)
    })?;
    let id = value.get("id").and_then(Value::as_u64);
    if let Some(v) = value.get("v").and_then(Value::as_u64) {
        if v != u64::from(PROTOCOL_VERSION) {
            return Err(Response::failure(
                id,
                ErrorCode::UnsupportedVersion,
                format!("protocol version {v} not supported"),
                json!({"supported": PROTOCOL_VERSION}),
            ));
        }
    }
    serde_json::from_value(value)
        .map_err(|e| Response::failure(id, ErrorCode::BadRequest, e.to_string(), Value::Null))
}

fn session_loop(events: Receiver<Event>) {
    let mut session = Session::new();
    let mut conns: BTreeMap<u64, Conn> = BTreeMap::new();
    for ev in events {
        match ev {
            Event::Open(id, out) => {
                conns.insert(id, Conn { out, subscribed: false });
            }
            Event::Close(id) => {
                conns.remove(&id);
            }
            Event::Message(id, body) => {
                let (response, frames): (Response, Vec<FrameMsg>) = match parse_request(&body) {
                    Err(r) => (r, Vec::new()),
                    Ok(env) => {
                        if let Request::SubscribeFrames { enabled } = env.request {
                            if let Some(c) = conns.get_mut(&id) {
                                c.subscribed = enabled;
                            }
                        }
                        let reply = session.handle(env);
                        (reply.response, reply.frames)
                    }
                };
                if !frames.is_empty() {
                    let encoded: Vec<Vec<u8>> = frames.iter().map(encode).collect();
                    for c in conns.values().filter(|c| c.subscribed) {
                        for f in &encoded {
                            let _ = c.out.send(f.clone());
                        }
                    }
                }
                if let Some(c) = conns.get(&id) {
                    let _ = c.out.send(encode(&response));
                }
            }
        }
    }
}

fn connection(id: u64, stream: TcpStream, events: Sender<Event>) {
    let (out_tx, out_rx) = mpsc::channel::<Vec<u8>>();
    if events.send(Event::Open(id, out_tx)).is_err() {
        return;
    }
    let write_half = match stream.try_clone() {
        Ok(s) => s,
        Err(e) => {
            log::warn!("connection {id}: {e}");
            let _ = events.send(Event::Close(id));
            return;
        }
    };
    let writer = thread::spawn(move || {
        let mut w = BufWriter::new(write_half);
        for body in out_rx {
            if write_raw(&mut w, &body).is_err() {
                break;
            }
        }
    });
    let mut r = BufReader::new(stream);
    loop {
        match read_message(&mut r) {
            Ok(Some(body)) => {
                if events.send(Event::Message(id, body)).is_err() {
                    break;
                }
            }
            Ok(None) => break,
            Err(e) => {
                log::warn!("connection {id}: {e}");
                break;
            }
        }
    }
    // dropping the session's sender ends the writer thread
    let _ = events.send(Event::Close(id));
    let _ = writer.join();
}

pub struct Server {
    listener: TcpListener,
}

impl Server {
    pub fn bind<A: ToSocketAddrs>(addr: A) -> io::Result<Self> {
        Ok(Self {
            listener: TcpListener::bind(addr)?,
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts connections until the listener fails. All connections share
    /// one session.
    pub fn run(self) -> io::Result<()> {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || session_loop(rx));
        for (id, stream) in (0u64..).zip(self.listener.incoming()) {
            let stream = stream?;
            log::info!("connection {id} from {:?}", stream.peer_addr().ok());
            let tx = tx.clone();
            thread::spawn(move || connection(id, stream, tx));
        }
        Ok(())
    }

    /// Runs the server on a background thread.
    pub fn spawn(self) -> io::Result<SocketAddr> {
        let addr = self.local_addr()?;
        thread::spawn(move || {
            if let Err(e) = self.run() {
                log::error!("server stopped: {e}");
            }
        });
        Ok(addr)
    }
}

/// Blocking client, mainly for tests and scripting.
pub struct Client {
    stream: BufReader<TcpStream>,
    next_id: u64,
    frames: Vec<FrameMsg>,
}

impl Client {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self {
            stream: BufReader::new(stream),
            next_id: 1,
            frames: Vec::new(),
        })
    }

    /// Sends raw bytes as one message and waits for the next response.
    pub fn send_raw(&mut self, body: &[u8]) -> io::Result<Response> {
        write_raw(self.stream.get_mut(), body)?;
        self.next_response()
    }

    pub fn request(&mut self, request: Request) -> io::Result<Response> {
        let env = Envelope {
            v: PROTOCOL_VERSION,
            id: self.next_id,
            request,
        };
        self.next_id += 1;
        write_message(self.stream.get_mut(), &env)?;
        self.next_response()
    }

    fn next_response(&mut self) -> io::Result<Response> {
        loop {
            let body = read_message(&mut self.stream)?
                .ok_or_else(|| io::Error::new(io::ErrorKind::UnexpectedEof, "server closed"))?;
            let value: Value = serde_json::from_slice(&body)?;
            if value.get("kind").and_then(Value::as_str) == Some("frame") {
                self.frames.push(serde_json::from_value(value)?);
            } else {
                return Ok(serde_json::from_value(value)?);
            }
        }
    }

    /// Frames received so far, oldest first.
    pub fn take_frames(&mut self) -> Vec<FrameMsg> {
        std::mem::take(&mut self.frames)
    }
}
