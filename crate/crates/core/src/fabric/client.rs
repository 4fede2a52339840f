use std::io::{BufReader, BufWriter};
use std::net::TcpStream;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use super::protocol::{read_message, write_message, ErrorKind, Message};
use super::record::{Counters, Episode, ExperienceRecord};
use super::store::Fetched;
use super::{Fabric, FabricError};

/// Exponential reconnection delays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Backoff {
    pub base: Duration,
    pub cap: Duration,
}

impl Default for Backoff {
    fn default() -> Self {
        Backoff { base: Duration::from_millis(100), cap: Duration::from_secs(5) }
    }
}

impl Backoff {
    pub fn delay(&self, attempt: u32) -> Duration {
        self.base.saturating_mul(1 << attempt.min(20)).min(self.cap)
    }
}

type Connection = (BufReader<TcpStream>, BufWriter<TcpStream>);

/// TCP client for a [`FabricServer`](super::FabricServer). Requests are
/// serialized over one connection, re-established with backoff on failure
/// until `connect_timeout` elapses.
pub struct RemoteFabric {
    addr: String,
    backoff: Backoff,
    connect_timeout: Duration,
    conn: Mutex<Option<Connection>>,
    next_corr: AtomicU64,
}

impl RemoteFabric {
    pub fn new(addr: impl Into<String>, connect_timeout: Duration) -> Self {
        RemoteFabric {
            addr: addr.into(),
            backoff: Backoff::default(),
            connect_timeout,
            conn: Mutex::new(None),
            next_corr: AtomicU64::new(1),
        }
    }

    pub fn with_backoff(mut self, backoff: Backoff) -> Self {
        self.backoff = backoff;
        self
    }

    fn request(&self, build: impl Fn(u64) -> Message) -> Result<Message, FabricError> {
        let corr = self.next_corr.fetch_add(1, Ordering::Relaxed);
        let msg = build(corr);
        let deadline = Instant::now() + self.connect_timeout;
        let mut conn = self.conn.lock().unwrap_or_else(|e| e.into_inner());
        let mut attempt = 0;
        loop {
            if conn.is_none() {
                match TcpStream::connect(&self.addr) {
                    Ok(s) => {
                        let _ = s.set_nodelay(true);
                        let w = s.try_clone()?;
                        *conn = Some((BufReader::new(s), BufWriter::new(w)));
                    }
                    Err(_) => {
                        attempt += 1;
                        let delay = self.backoff.delay(attempt - 1);
                        if Instant::now() + delay > deadline {
                            return Err(FabricError::Unreachable { addr: self.addr.clone(), attempts: attempt });
                        }
                        std::thread::sleep(delay);
                        continue;
                    }
                }
            }
            let (reader, writer) = conn.as_mut().expect("connected");
            let outcome = write_message(writer, &msg).and_then(|()| read_message(reader));
            match outcome {
                Ok(Some(reply)) => {
                    if reply.corr() != corr && !matches!(reply, Message::Error { corr: 0, .. }) {
                        *conn = None;
                        return Err(FabricError::Protocol(format!(
                            "response correlation id {} does not match request {corr}",
                            reply.corr()
                        )));
                    }
                    return match reply {
                        Message::Error { kind, message, .. } => Err(match kind {
                            ErrorKind::Rejected => FabricError::Rejected(message),
                            ErrorKind::InvalidCheckpoint => FabricError::InvalidCheckpoint(message),
                            ErrorKind::Closed => FabricError::Closed,
                            ErrorKind::Protocol => FabricError::Protocol(message),
                        }),
                        other => Ok(other),
                    };
                }
                Ok(None) | Err(FabricError::Io(_)) => {
                    *conn = None;
                    attempt += 1;
                    let delay = self.backoff.delay(attempt - 1);
                    if Instant::now() + delay > deadline {
                        return Err(FabricError::Unreachable { addr: self.addr.clone(), attempts: attempt });
                    }
                    std::thread::sleep(delay);
                }
                Err(e) => {
                    *conn = None;
                    return Err(e);
                }
            }
        }
    }
}

fn unexpected(m: Message) -> FabricError {
    FabricError::Protocol(format!("unexpected response type {:#04x}", m.type_byte()))
}

fn wait_ms(wait: Option<Duration>) -> u64 {
    wait.map_or(0, |w| w.as_millis().max(1) as u64)
}

impl Fabric for RemoteFabric {
    fn append(&self, records: Vec<ExperienceRecord>) -> Result<Counters, FabricError> {
        match self.request(|corr| Message::Append { corr, records: records.clone() })? {
            Message::Counters { counters: Some(c), .. } => Ok(c),
            m => Err(unexpected(m)),
        }
    }

    fn drain(&self, episodes: usize, wait: Option<Duration>) -> Result<Option<Vec<Episode>>, FabricError> {
        match self.request(|corr| Message::DrainRequest { corr, episodes, wait_ms: wait_ms(wait) })? {
            Message::DrainResponse { episodes, .. } => Ok(episodes),
            m => Err(unexpected(m)),
        }
    }

    fn publish(&self, checkpoint: &[u8]) -> Result<u64, FabricError> {
        match self.request(|corr| Message::Publish { corr, checkpoint: checkpoint.to_vec() })? {
            Message::Counters { assigned_version: Some(v), .. } => Ok(v),
            m => Err(unexpected(m)),
        }
    }

    fn fetch(&self, newer_than: Option<u64>, wait: Option<Duration>) -> Result<Fetched, FabricError> {
        match self.request(|corr| Message::FetchRequest { corr, newer_than, wait_ms: wait_ms(wait) })? {
            Message::FetchResponse { fetched, .. } => Ok(fetched),
            m => Err(unexpected(m)),
        }
    }

    fn counters(&self) -> Result<Counters, FabricError> {
        match self.request(|corr| Message::Counters { corr, counters: None, assigned_version: None })? {
            Message::Counters { counters: Some(c), .. } => Ok(c),
            m => Err(unexpected(m)),
        }
    }
}
