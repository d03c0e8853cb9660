//! Live frame server.
//!
//! Renderers connect over WebSocket. Each client first receives the stream
//! header as a text message, then one text message per frame in the same
//! line format as frame files. Playback is paced at the header frame rate;
//! a client joining mid-playback starts at the frame currently on air.
//! When the last frame has gone out every connection is closed.

use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use thiserror::Error;
use tungstenite::{Message, WebSocket};

use crate::mapping::VisualFrame;
use crate::stream::{frame_to_line, StreamError, StreamHeader};

const ACCEPT_POLL: Duration = Duration::from_millis(5);
const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("port already in use: {addr}")]
    PortInUse { addr: String },
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error("server I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Default)]
struct Clients {
    senders: Vec<Sender<Arc<str>>>,
    /// Line of the frame most recently broadcast.
    on_air: Option<Arc<str>>,
    finished: bool,
}

struct Shared {
    header_line: Arc<str>,
    clients: Mutex<Clients>,
    shutdown: AtomicBool,
    workers: Mutex<Vec<JoinHandle<()>>>,
}

impl Shared {
    fn clients(&self) -> MutexGuard<'_, Clients> {
        self.clients.lock().unwrap_or_else(|e| e.into_inner())
    }
}

/// Summary of one completed playback.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaybackReport {
    pub frames_sent: usize,
    pub peak_clients: usize,
}

pub struct StreamServer {
    addr: SocketAddr,
    header: StreamHeader,
    lines: Vec<Arc<str>>,
    shared: Arc<Shared>,
    acceptor: Option<JoinHandle<()>>,
}

impl StreamServer {
    /// Binds the listener and starts accepting clients. Playback begins with
    /// [`StreamServer::play`]; clients connected before that wait after the header.
    pub fn bind(addr: impl ToSocketAddrs, header: StreamHeader, frames: &[VisualFrame]) -> Result<Self, ServerError> {
        header.validate()?;
        let addr_text = addr
            .to_socket_addrs()
            .ok()
            .and_then(|mut a| a.next())
            .map(|a| a.to_string())
            .unwrap_or_else(|| "<unresolved>".to_string());
        let listener = TcpListener::bind(addr).map_err(|source| {
            if source.kind() == ErrorKind::AddrInUse {
                ServerError::PortInUse { addr: addr_text.clone() }
            } else {
                ServerError::Bind { addr: addr_text.clone(), source }
            }
        })?;
        listener.set_nonblocking(true)?;
        let local = listener.local_addr()?;

        let shared = Arc::new(Shared {
            header_line: header.to_line().into(),
            clients: Mutex::new(Clients::default()),
            shutdown: AtomicBool::new(false),
            workers: Mutex::new(Vec::new()),
        });
        let acceptor = {
            let shared = Arc::clone(&shared);
            thread::Builder::new()
                .name("stream-accept".into())
                .spawn(move || accept_loop(listener, shared))?
        };
        Ok(Self {
            addr: local,
            header,
            lines: frames.iter().map(|f| Arc::from(frame_to_line(f))).collect(),
            shared,
            acceptor: Some(acceptor),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn header(&self) -> &StreamHeader {
        &self.header
    }

    /// Clients that completed the handshake and are still connected.
    pub fn client_count(&self) -> usize {
        self.shared.clients().senders.len()
    }

    /// Blocks until at least `n` clients are connected or `timeout` passes.
    pub fn wait_for_clients(&self, n: usize, timeout: Option<Duration>) -> bool {
        let start = Instant::now();
        loop {
            if self.client_count() >= n {
                return true;
            }
            if timeout.is_some_and(|t| start.elapsed() >= t) {
                return false;
            }
            thread::sleep(ACCEPT_POLL);
        }
    }

    /// Broadcasts every frame at the header frame rate, then closes all
    /// connections and stops the listener.
    pub fn play(mut self) -> Result<PlaybackReport, ServerError> {
        let period = Duration::from_secs_f64(1.0 / self.header.fps);
        let start = Instant::now();
        let mut peak_clients = 0;
        for (k, line) in self.lines.iter().enumerate() {
            let due = start + period.mul_f64(k as f64);
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                thread::sleep(wait);
            }
            let mut clients = self.shared.clients();
            clients.on_air = Some(Arc::clone(line));
            clients.senders.retain(|tx| tx.send(Arc::clone(line)).is_ok());
            peak_clients = peak_clients.max(clients.senders.len());
        }
        self.finish();
        Ok(PlaybackReport {
            frames_sent: self.lines.len(),
            peak_clients,
        })
    }

    fn finish(&mut self) {
        {
            let mut clients = self.shared.clients();
            clients.finished = true;
            clients.senders.clear();
        }
        self.shared.shutdown.store(true, Ordering::SeqCst);
        if let Some(acceptor) = self.acceptor.take() {
            let _ = acceptor.join();
        }
        let workers = std::mem::take(&mut *self.shared.workers.lock().unwrap_or_else(|e| e.into_inner()));
        for worker in workers {
            let _ = worker.join();
        }
    }
}

impl Drop for StreamServer {
    fn drop(&mut self) {
        if self.acceptor.is_some() {
            self.finish();
        }
    }
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>) {
    while !shared.shutdown.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, _)) => {
                let worker_shared = Arc::clone(&shared);
                let spawned = thread::Builder::new()
                    .name("stream-client".into())
                    .spawn(move || serve_client(stream, worker_shared));
                if let Ok(handle) = spawned {
                    shared.workers.lock().unwrap_or_else(|e| e.into_inner()).push(handle);
                }
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(ACCEPT_POLL),
            Err(_) => thread::sleep(ACCEPT_POLL),
        }
    }
}

fn serve_client(stream: TcpStream, shared: Arc<Shared>) {
    if stream.set_nonblocking(false).is_err() || stream.set_read_timeout(Some(HANDSHAKE_TIMEOUT)).is_err() {
        return;
    }
    let _ = stream.set_nodelay(true);
    let Ok(mut ws) = tungstenite::accept(stream) else {
        return;
    };
    if ws.send(Message::text(&*shared.header_line)).is_err() {
        return;
    }
    let rx = {
        let (tx, rx) = mpsc::channel();
        let mut clients = shared.clients();
        if !clients.finished {
            if let Some(line) = &clients.on_air {
                let _ = tx.send(Arc::clone(line));
            }
            clients.senders.push(tx);
        }
        rx
    };
    forward(&mut ws, rx);
}

fn forward(ws: &mut WebSocket<TcpStream>, rx: Receiver<Arc<str>>) {
    for line in rx {
        if ws.send(Message::text(&*line)).is_err() {
            return;
        }
    }
    if ws.close(None).is_err() {
        return;
    }
    // wait for the peer's close reply so buffered frames are not reset away
    while ws.read().is_ok() {}
}
