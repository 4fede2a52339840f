use std::io::{BufReader, BufWriter};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use super::protocol::{read_message, write_message, ErrorKind, Message};
use super::{Fabric, FabricError, LocalFabric, StopSignal};

/// Longest a single request may block the server on a caller's behalf.
const MAX_WAIT: Duration = Duration::from_secs(30);

/// Serves a [`LocalFabric`] over TCP, one thread per connection.
pub struct FabricServer {
    addr: SocketAddr,
    stop: StopSignal,
    accept: Option<JoinHandle<()>>,
    connections: Arc<Mutex<Vec<TcpStream>>>,
    fabric: LocalFabric,
}

impl FabricServer {
    pub fn bind(addr: impl ToSocketAddrs, fabric: LocalFabric) -> Result<Self, FabricError> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let stop = StopSignal::default();
        let connections: Arc<Mutex<Vec<TcpStream>>> = Arc::default();
        let accept = {
            let (stop, connections, fabric) = (stop.clone(), connections.clone(), fabric.clone());
            std::thread::spawn(move || {
                while !stop.is_stopped() {
                    match listener.accept() {
                        Ok((stream, _)) => {
                            let _ = stream.set_nonblocking(false);
                            let _ = stream.set_nodelay(true);
                            if let Ok(clone) = stream.try_clone() {
                                connections.lock().unwrap_or_else(|e| e.into_inner()).push(clone);
                            }
                            let fabric = fabric.clone();
                            std::thread::spawn(move || serve_connection(stream, &fabric));
                        }
                        Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                            std::thread::sleep(Duration::from_millis(10));
                        }
                        Err(_) => std::thread::sleep(Duration::from_millis(10)),
                    }
                }
            })
        };
        Ok(FabricServer { addr, stop, accept: Some(accept), connections, fabric })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn fabric(&self) -> &LocalFabric {
        &self.fabric
    }

    /// Stops accepting, closes open connections and wakes blocked requests.
    pub fn shutdown(&mut self) {
        self.stop.stop();
        self.fabric.close();
        for c in self.connections.lock().unwrap_or_else(|e| e.into_inner()).drain(..) {
            let _ = c.shutdown(Shutdown::Both);
        }
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

impl Drop for FabricServer {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn serve_connection(stream: TcpStream, fabric: &LocalFabric) {
    let Ok(write_half) = stream.try_clone() else { return };
    let mut reader = BufReader::new(stream);
    let mut writer = BufWriter::new(write_half);
    loop {
        let reply = match read_message(&mut reader) {
            Ok(Some(msg)) => handle(fabric, msg),
            Ok(None) => return,
            Err(FabricError::Io(_)) => return,
            Err(e) => {
                let _ = write_message(&mut writer, &error_reply(0, &e));
                return;
            }
        };
        if write_message(&mut writer, &reply).is_err() {
            return;
        }
    }
}

fn error_reply(corr: u64, e: &FabricError) -> Message {
    let kind = match e {
        FabricError::Rejected(_) => ErrorKind::Rejected,
        FabricError::InvalidCheckpoint(_) => ErrorKind::InvalidCheckpoint,
        FabricError::Closed => ErrorKind::Closed,
        _ => ErrorKind::Protocol,
    };
    Message::Error { corr, kind, message: e.to_string() }
}

fn wait(ms: u64) -> Option<Duration> {
    (ms > 0).then(|| Duration::from_millis(ms).min(MAX_WAIT))
}

/// Executes one request against the local stores.
pub(crate) fn handle(fabric: &LocalFabric, msg: Message) -> Message {
    let corr = msg.corr();
    let result = match msg {
        Message::Append { records, .. } => {
            fabric.append(records).map(|c| Message::Counters { corr, counters: Some(c), assigned_version: None })
        }
        Message::DrainRequest { episodes, wait_ms, .. } => {
            fabric.drain(episodes, wait(wait_ms)).map(|episodes| Message::DrainResponse { corr, episodes })
        }
        Message::Publish { checkpoint, .. } => fabric.publish(&checkpoint).and_then(|v| {
            Ok(Message::Counters { corr, counters: Some(fabric.counters()?), assigned_version: Some(v) })
        }),
        Message::FetchRequest { newer_than, wait_ms, .. } => {
            fabric.fetch(newer_than, wait(wait_ms)).map(|fetched| Message::FetchResponse { corr, fetched })
        }
        Message::Counters { counters: None, .. } => {
            fabric.counters().map(|c| Message::Counters { corr, counters: Some(c), assigned_version: None })
        }
        other => Err(FabricError::Protocol(format!("unexpected request type {:#04x}", other.type_byte()))),
    };
    result.unwrap_or_else(|e| error_reply(corr, &e))
}
