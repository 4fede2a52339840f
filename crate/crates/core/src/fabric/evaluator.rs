use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use super::store::Fetched;
use super::{Fabric, FabricError, StopSignal};
use crate::eval::{evaluate, EvalConfig, EvalLogWriter, EvalReport, Protocol};
use crate::rl::Checkpoint;
use crate::sim::{SimConfig, Track};

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatorConfig {
    pub protocols: Vec<Protocol>,
    pub eval: EvalConfig,
    pub sim: SimConfig,
}

impl EvaluatorConfig {
    pub fn both(sim: SimConfig) -> Self {
        EvaluatorConfig { protocols: vec![Protocol::Naive, Protocol::Robust], eval: EvalConfig::default(), sim }
    }
}

/// Summary file name for one report.
pub fn summary_file_name(version: u64, protocol: Protocol) -> String {
    format!("v{version:06}_{}.json", protocol.as_str())
}

/// Evaluates one checkpoint under every configured protocol, appending to
/// the log and writing summaries as it goes.
pub fn evaluate_checkpoint(
    ck: &Checkpoint,
    track: &Arc<Track>,
    cfg: &EvaluatorConfig,
    log: Option<&mut EvalLogWriter>,
    summary_dir: Option<&Path>,
) -> Result<Vec<EvalReport>, FabricError> {
    let mut reports = Vec::new();
    let mut log = log;
    for &protocol in &cfg.protocols {
        let report = evaluate(&ck.nets, track, &cfg.sim, protocol, &cfg.eval, ck.meta.version)?;
        if let Some(l) = log.as_deref_mut() {
            l.append(&report)?;
        }
        if let Some(dir) = summary_dir {
            std::fs::write(dir.join(summary_file_name(report.version, protocol)), report.summary_json())?;
        }
        reports.push(report);
    }
    Ok(reports)
}

/// Evaluates each newly published version, latest wins. A version that
/// fails to load or evaluate is logged and skipped. On stop the latest
/// version is evaluated once more if it was missed.
pub fn evaluator_loop(
    fabric: &dyn Fabric,
    track: &Arc<Track>,
    cfg: &EvaluatorConfig,
    stop: &StopSignal,
    mut log: Option<&mut EvalLogWriter>,
    summary_dir: Option<&Path>,
) -> Result<Vec<EvalReport>, FabricError> {
    let mut last = None;
    let mut reports = Vec::new();
    loop {
        let stopping = stop.is_stopped();
        let wait = (!stopping).then(|| Duration::from_millis(200));
        match fabric.fetch(last, wait)? {
            Fetched::Checkpoint { version, bytes } => {
                last = Some(version);
                let outcome = Checkpoint::from_bytes(&bytes)
                    .map_err(FabricError::from)
                    .and_then(|ck| evaluate_checkpoint(&ck, track, cfg, log.as_deref_mut(), summary_dir));
                match outcome {
                    Ok(r) => reports.extend(r),
                    Err(e) => log::warn!("evaluation of version {version} failed: {e}"),
                }
            }
            Fetched::Empty | Fetched::Unchanged if stopping => break,
            Fetched::Empty | Fetched::Unchanged => {}
        }
        if stopping {
            break;
        }
    }
    Ok(reports)
}
