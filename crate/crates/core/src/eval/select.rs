use super::{EvalError, EvalReport};

/// Center version of the `window`-long run of consecutive reports whose
/// weakest member is strongest; ties go to the later window.
pub fn select_checkpoint(reports: &[EvalReport], window: usize) -> Result<u64, EvalError> {
    if window == 0 {
        return Err(EvalError::Usage("window must be positive".into()));
    }
    if reports.len() < window {
        return Err(EvalError::Usage(format!("{} reports is fewer than the window of {window}", reports.len())));
    }
    if reports.windows(2).any(|w| w[0].version >= w[1].version) {
        return Err(EvalError::Usage("reports must be ordered by strictly increasing version".into()));
    }
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, w) in reports.windows(window).enumerate() {
        let floor = w.iter().map(|r| r.mean_progress).fold(f64::INFINITY, f64::min);
        if floor >= best.0 {
            best = (floor, i);
        }
    }
    Ok(reports[best.1 + window / 2].version)
}
