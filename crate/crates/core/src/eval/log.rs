use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{EvalError, EvalReport, EvalRun, Protocol};

pub const EVAL_LOG_HEADER: &str = "version,protocol,trial,start_wp,direction,progress,lap_complete,steps,mean_reward";

/// Appends one row per evaluation run, writing the header for a new file.
pub struct EvalLogWriter {
    out: BufWriter<File>,
}

impl EvalLogWriter {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        let path = path.as_ref();
        let fresh = !path.exists();
        let mut out = BufWriter::new(OpenOptions::new().create(true).append(true).open(path)?);
        if fresh {
            writeln!(out, "{EVAL_LOG_HEADER}")?;
        }
        Ok(EvalLogWriter { out })
    }

    pub fn append(&mut self, report: &EvalReport) -> Result<(), EvalError> {
        self.out.write_all(report_rows(report).as_bytes())?;
        self.out.flush()?;
        Ok(())
    }
}

pub fn report_rows(report: &EvalReport) -> String {
    let mut s = String::new();
    for r in &report.runs {
        s.push_str(&format!(
            "{},{},{},{},{},{:?},{},{},{:?}\n",
            report.version,
            report.protocol.as_str(),
            r.trial,
            r.start_waypoint,
            r.direction.as_str(),
            r.progress,
            r.lap_complete,
            r.steps,
            r.mean_reward
        ));
    }
    s
}

/// Groups log rows back into reports, in order of first appearance. The
/// configuration hash is not part of the log and comes back empty.
pub fn parse_eval_log(text: &str) -> Result<Vec<EvalReport>, EvalError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == EVAL_LOG_HEADER => {}
        _ => return Err(EvalError::Parse { line: 1, msg: "missing header".into() }),
    }
    let mut groups: Vec<(u64, Protocol, Vec<EvalRun>)> = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| EvalError::Parse { line: i + 1, msg };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(err(format!("expected 9 fields, got {}", f.len())));
        }
        fn field<T: std::str::FromStr>(v: &str, name: &str) -> Result<T, String> {
            v.trim().parse().map_err(|_| format!("bad {name} `{v}`"))
        }
        let version: u64 = field(f[0], "version").map_err(err)?;
        let protocol: Protocol = f[1].parse().map_err(err)?;
        let run = EvalRun {
            trial: field(f[2], "trial").map_err(err)?,
            start_waypoint: field(f[3], "start_wp").map_err(err)?,
            direction: f[4].parse().map_err(err)?,
            progress: field(f[5], "progress").map_err(err)?,
            lap_complete: field(f[6], "lap_complete").map_err(err)?,
            steps: field(f[7], "steps").map_err(err)?,
            mean_reward: field(f[8], "mean_reward").map_err(err)?,
        };
        match groups.iter_mut().find(|g| g.0 == version && g.1 == protocol) {
            Some(g) => g.2.push(run),
            None => groups.push((version, protocol, vec![run])),
        }
    }
    Ok(groups.into_iter().map(|(v, p, runs)| EvalReport::from_runs(v, p, runs, String::new())).collect())
}
