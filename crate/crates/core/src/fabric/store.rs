use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use super::record::{Counters, Episode, EpisodeId, ExperienceRecord, WorkerId};
use super::FabricError;
use crate::rl::Checkpoint;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoreConfig {
    /// Complete undrained episodes beyond which appends block.
    pub max_pending: usize,
    /// Silence after which a partial episode is discarded.
    pub partial_timeout: Duration,
}

impl Default for StoreConfig {
    fn default() -> Self {
        StoreConfig { max_pending: 200, partial_timeout: Duration::from_secs(60) }
    }
}

struct Partial {
    records: Vec<ExperienceRecord>,
    last_seen: Instant,
}

#[derive(Default)]
struct StoreState {
    pending: VecDeque<Episode>,
    partial: HashMap<EpisodeId, Partial>,
    seen: HashSet<(WorkerId, EpisodeId)>,
    counters: Counters,
    closed: bool,
}

/// In-memory experience store. Every operation is linearizable under one
/// lock; a condition variable wakes blocked drains and appends.
pub struct ExperienceStore {
    cfg: StoreConfig,
    state: Mutex<StoreState>,
    changed: Condvar,
}

impl Default for ExperienceStore {
    fn default() -> Self {
        Self::new(StoreConfig::default())
    }
}

impl ExperienceStore {
    pub fn new(cfg: StoreConfig) -> Self {
        ExperienceStore { cfg, state: Mutex::new(StoreState::default()), changed: Condvar::new() }
    }

    fn lock(&self) -> MutexGuard<'_, StoreState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Appends a contiguous run of records of one episode. The episode
    /// becomes drainable when its done record arrives; completing an episode
    /// blocks while the pending queue is full.
    pub fn append(&self, records: Vec<ExperienceRecord>) -> Result<Counters, FabricError> {
        let Some(first) = records.first() else {
            return Ok(self.counters());
        };
        let (id, worker) = (first.episode_id, first.worker_id);
        let mut st = self.lock();
        collect_stale(&mut st, Instant::now(), self.cfg.partial_timeout);
        let reject = |st: &mut StoreState, msg: String| {
            st.partial.remove(&id);
            Err(FabricError::Rejected(msg))
        };
        if st.seen.contains(&(worker, id)) {
            return Err(FabricError::Rejected(format!("duplicate episode {id:#x} from worker {worker}")));
        }
        let first = st.partial.get(&id).map_or(0, |p| p.records.len() as u32);
        for (k, (r, expected)) in records.iter().zip(first..).enumerate() {
            if r.episode_id != id || r.worker_id != worker {
                return reject(&mut st, "records of several episodes in one append".into());
            }
            if r.step_index != expected {
                return reject(&mut st, format!("episode {id:#x}: expected step {expected}, got {}", r.step_index));
            }
            if r.done && k + 1 != records.len() {
                return reject(&mut st, format!("episode {id:#x}: done before its final record"));
            }
        }
        let done = records.last().is_some_and(|r| r.done);
        let partial = st.partial.entry(id).or_insert_with(|| Partial { records: Vec::new(), last_seen: Instant::now() });
        partial.records.extend(records);
        partial.last_seen = Instant::now();
        if done {
            let records = st.partial.remove(&id).expect("just inserted").records;
            st.seen.insert((worker, id));
            while st.pending.len() >= self.cfg.max_pending && !st.closed {
                st = self.changed.wait(st).unwrap_or_else(|e| e.into_inner());
            }
            st.counters.total_episodes += 1;
            st.counters.total_steps += records.len() as u64;
            st.pending.push_back(Episode { records });
            self.changed.notify_all();
        }
        Ok(snapshot(&st))
    }

    /// Removes and returns exactly `n` complete episodes in completion order,
    /// or `None` if fewer are pending when `wait` elapses.
    pub fn drain(&self, n: usize, wait: Option<Duration>) -> Option<Vec<Episode>> {
        let deadline = wait.map(|w| Instant::now() + w);
        let mut st = self.lock();
        while st.pending.len() < n {
            let remaining = deadline.and_then(|d| d.checked_duration_since(Instant::now()));
            match remaining {
                Some(r) if !st.closed && !r.is_zero() => {
                    st = self.changed.wait_timeout(st, r).unwrap_or_else(|e| e.into_inner()).0;
                }
                _ => return None,
            }
        }
        let out: Vec<Episode> = st.pending.drain(..n).collect();
        st.counters.drained_episodes += n as u64;
        self.changed.notify_all();
        Some(out)
    }

    pub fn counters(&self) -> Counters {
        snapshot(&self.lock())
    }

    pub(crate) fn note_version(&self, version: u64) {
        let mut st = self.lock();
        st.counters.latest_version = st.counters.latest_version.max(version);
    }

    /// Drops partial episodes silent for longer than the timeout, as seen
    /// from `now`. Returns how many were dropped.
    pub fn collect_stale_at(&self, now: Instant) -> usize {
        collect_stale(&mut self.lock(), now, self.cfg.partial_timeout)
    }

    /// Wakes every blocked caller; later blocking calls return immediately.
    pub fn close(&self) {
        self.lock().closed = true;
        self.changed.notify_all();
    }
}

fn snapshot(st: &StoreState) -> Counters {
    Counters {
        pending_episodes: st.pending.len() as u64,
        partial_episodes: st.partial.len() as u64,
        ..st.counters
    }
}

fn collect_stale(st: &mut StoreState, now: Instant, timeout: Duration) -> usize {
    let before = st.partial.len();
    st.partial.retain(|_, p| now.saturating_duration_since(p.last_seen) <= timeout);
    before - st.partial.len()
}

/// Result of a checkpoint fetch.
#[derive(Debug, Clone, PartialEq)]
pub enum Fetched {
    Empty,
    /// Nothing newer than the caller's version.
    Unchanged,
    Checkpoint { version: u64, bytes: Arc<Vec<u8>> },
}

/// Latest-wins store of serialized checkpoints. Publication swaps an
/// immutable buffer under the lock, so readers see whole checkpoints only.
#[derive(Default)]
pub struct CheckpointStore {
    latest: Mutex<Option<(u64, Arc<Vec<u8>>)>>,
    changed: Condvar,
    closed: Mutex<bool>,
}

impl CheckpointStore {
    /// Validates the checkpoint, stamps it with the next version and makes it
    /// the latest.
    pub fn publish(&self, bytes: &[u8]) -> Result<u64, FabricError> {
        let mut ck = Checkpoint::from_bytes(bytes).map_err(|e| FabricError::InvalidCheckpoint(e.to_string()))?;
        let mut latest = self.latest.lock().unwrap_or_else(|e| e.into_inner());
        let version = latest.as_ref().map_or(0, |(v, _)| *v) + 1;
        let bytes = if ck.meta.version == version {
            bytes.to_vec()
        } else {
            ck.meta.version = version;
            ck.to_bytes()
        };
        *latest = Some((version, Arc::new(bytes)));
        self.changed.notify_all();
        Ok(version)
    }

    /// The latest checkpoint if it is newer than `newer_than`, waiting up to
    /// `wait` for one to appear.
    pub fn fetch(&self, newer_than: Option<u64>, wait: Option<Duration>) -> Fetched {
        let deadline = wait.map(|w| Instant::now() + w);
        let mut latest = self.latest.lock().unwrap_or_else(|e| e.into_inner());
        loop {
            match &*latest {
                Some((v, b)) if newer_than.is_none_or(|n| *v > n) => {
                    return Fetched::Checkpoint { version: *v, bytes: b.clone() };
                }
                _ => {}
            }
            let remaining = deadline.and_then(|d| d.checked_duration_since(Instant::now()));
            match remaining {
                Some(r) if !r.is_zero() && !*self.closed.lock().unwrap_or_else(|e| e.into_inner()) => {
                    latest = self.changed.wait_timeout(latest, r).unwrap_or_else(|e| e.into_inner()).0;
                }
                _ => return if latest.is_none() { Fetched::Empty } else { Fetched::Unchanged },
            }
        }
    }

    pub fn latest_version(&self) -> u64 {
        self.latest.lock().unwrap_or_else(|e| e.into_inner()).as_ref().map_or(0, |(v, _)| *v)
    }

    pub fn close(&self) {
        *self.closed.lock().unwrap_or_else(|e| e.into_inner()) = true;
        let _guard = self.latest.lock().unwrap_or_else(|e| e.into_inner());
        self.changed.notify_all();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fabric::record::episode_id;
    use crate::fabric::record::fixtures::episode;
    use crate::rl::{Architecture, CheckpointMeta, PolicyValueNets};

    fn store() -> ExperienceStore {
        ExperienceStore::new(StoreConfig::default())
    }

    fn checkpoint_bytes(fill: f32) -> Vec<u8> {
        let mut nets = PolicyValueNets::<f32>::zeros(Architecture::features(), 10, 0.0).unwrap();
        for p in nets.params_mut() {
            p.tensor.fill(fill);
        }
        Checkpoint { meta: CheckpointMeta::default(), nets }.to_bytes()
    }

    #[test]
    fn one_episode_of_twelve_steps() {
        let s = store();
        let c = s.append(episode(0, 0, 12, false).records).unwrap();
        assert_eq!((c.total_episodes, c.total_steps, c.pending_episodes), (1, 12, 1));
    }

    #[test]
    fn episode_is_drainable_only_after_done() {
        let s = store();
        let mut records = episode(0, 0, 10, false).records;
        let tail = records.split_off(6);
        s.append(records).unwrap();
        assert_eq!(s.counters().partial_episodes, 1);
        assert!(s.drain(1, None).is_none());
        s.append(tail).unwrap();
        let out = s.drain(1, None).unwrap();
        assert_eq!(out[0].len(), 10);
        assert_eq!(s.counters().partial_episodes, 0);
    }

    #[test]
    fn gap_rejects_and_discards_episode() {
        let s = store();
        let mut records = episode(0, 0, 12, false).records;
        records.remove(5);
        assert!(matches!(s.append(records), Err(FabricError::Rejected(_))));
        assert_eq!(s.counters(), Counters::default());
    }

    #[test]
    fn gap_across_appends_discards_the_partial() {
        let s = store();
        let mut records = episode(0, 0, 12, false).records;
        let tail = records.split_off(6);
        s.append(records).unwrap();
        assert!(s.append(tail[1..].to_vec()).is_err());
        assert_eq!(s.counters(), Counters::default());
    }

    #[test]
    fn duplicate_episode_is_rejected() {
        let s = store();
        s.append(episode(1, 4, 3, false).records).unwrap();
        assert!(matches!(s.append(episode(1, 4, 3, false).records), Err(FabricError::Rejected(_))));
        assert_eq!(s.counters().total_episodes, 1);
    }

    #[test]
    fn early_done_is_rejected() {
        let s = store();
        let mut records = episode(0, 0, 5, false).records;
        records[2].done = true;
        assert!(s.append(records).is_err());
        assert_eq!(s.counters().total_episodes, 0);
    }

    #[test]
    fn drain_returns_exactly_n_in_completion_order() {
        let s = store();
        for k in 0..25 {
            s.append(episode(0, k, 3, false).records).unwrap();
        }
        let out = s.drain(20, None).unwrap();
        let ids: Vec<_> = out.iter().map(Episode::id).collect();
        assert_eq!(ids, (0..20).map(|k| episode_id(0, k)).collect::<Vec<_>>());
        let c = s.counters();
        assert_eq!((c.pending_episodes, c.drained_episodes), (5, 20));
    }

    #[test]
    fn not_ready_drain_consumes_nothing() {
        let s = store();
        for k in 0..5 {
            s.append(episode(0, k, 3, false).records).unwrap();
        }
        assert!(s.drain(20, None).is_none());
        assert!(s.drain(20, Some(Duration::from_millis(20))).is_none());
        assert_eq!(s.counters().pending_episodes, 5);
    }

    #[test]
    fn blocking_drain_wakes_on_append() {
        let s = Arc::new(store());
        let s2 = s.clone();
        let h = std::thread::spawn(move || s2.drain(2, Some(Duration::from_secs(10))));
        s.append(episode(0, 0, 3, false).records).unwrap();
        s.append(episode(0, 1, 3, false).records).unwrap();
        assert_eq!(h.join().unwrap().unwrap().len(), 2);
    }

    #[test]
    fn interleaved_appends_keep_per_episode_order() {
        let s = store();
        let eps: Vec<Vec<ExperienceRecord>> = (0..3).map(|w| episode(w, 0, 9, false).records).collect();
        for chunk in 0..3 {
            for e in &eps {
                s.append(e[chunk * 3..chunk * 3 + 3].to_vec()).unwrap();
            }
        }
        let out = s.drain(3, None).unwrap();
        for ep in &out {
            assert!(ep.records.iter().enumerate().all(|(k, r)| r.step_index == k as u32));
            assert!(ep.records.iter().all(|r| r.episode_id == ep.id()));
        }
    }

    #[test]
    fn stale_partials_are_collected() {
        let s = store();
        let mut records = episode(0, 0, 6, false).records;
        records.truncate(3);
        s.append(records).unwrap();
        assert_eq!(s.collect_stale_at(Instant::now() + Duration::from_secs(30)), 0);
        assert_eq!(s.collect_stale_at(Instant::now() + Duration::from_secs(61)), 1);
        assert_eq!(s.counters().partial_episodes, 0);
    }

    #[test]
    fn full_store_applies_backpressure() {
        let s = Arc::new(ExperienceStore::new(StoreConfig { max_pending: 2, ..StoreConfig::default() }));
        s.append(episode(0, 0, 2, false).records).unwrap();
        s.append(episode(0, 1, 2, false).records).unwrap();
        let s2 = s.clone();
        let h = std::thread::spawn(move || s2.append(episode(0, 2, 2, false).records));
        std::thread::sleep(Duration::from_millis(50));
        assert_eq!(s.counters().total_episodes, 2);
        s.drain(1, None).unwrap();
        h.join().unwrap().unwrap();
        assert_eq!(s.counters().pending_episodes, 2);
    }

    #[test]
    fn checkpoint_versions_count_publications() {
        let c = CheckpointStore::default();
        assert_eq!(c.fetch(None, None), Fetched::Empty);
        assert_eq!(c.publish(&checkpoint_bytes(0.0)).unwrap(), 1);
        assert_eq!(c.publish(&checkpoint_bytes(0.0)).unwrap(), 2);
        let Fetched::Checkpoint { version, bytes } = c.fetch(None, None) else { panic!("expected a checkpoint") };
        assert_eq!(version, 2);
        assert_eq!(Checkpoint::from_bytes(&bytes).unwrap().meta.version, 2);
        assert_eq!(c.fetch(Some(2), None), Fetched::Unchanged);
    }

    #[test]
    fn invalid_checkpoint_is_refused() {
        let c = CheckpointStore::default();
        let mut bytes = checkpoint_bytes(0.5);
        let n = bytes.len();
        bytes[n - 9] ^= 1;
        assert!(matches!(c.publish(&bytes), Err(FabricError::InvalidCheckpoint(_))));
        assert_eq!(c.latest_version(), 0);
    }

    #[test]
    fn concurrent_fetches_never_see_torn_checkpoints() {
        let c = Arc::new(CheckpointStore::default());
        let blobs: Vec<Vec<u8>> = (0..4).map(|k| checkpoint_bytes(k as f32 * 0.25)).collect();
        c.publish(&blobs[0]).unwrap();
        std::thread::scope(|scope| {
            for _ in 0..3 {
                let c = &c;
                scope.spawn(move || {
                    for _ in 0..200 {
                        if let Fetched::Checkpoint { version, bytes } = c.fetch(None, None) {
                            assert_eq!(Checkpoint::from_bytes(&bytes).unwrap().meta.version, version);
                        }
                    }
                });
            }
            for k in 0..100 {
                c.publish(&blobs[k % blobs.len()]).unwrap();
            }
        });
        assert_eq!(c.latest_version(), 101);
    }
}
