//! Scalar summaries of NMSD curves.

use super::run::to_db;

/// Trailing window used by [`iterations_to_reach`].
pub const CONVERGENCE_WINDOW: usize = 50;

/// First 1-based iteration whose trailing `window`-iteration mean NMSD (dB)
/// is at or below `threshold_db`.
pub fn iterations_to_reach(nmsd_db: &[f64], threshold_db: f64, window: usize) -> Option<usize> {
    let window = window.max(1);
    if nmsd_db.len() < window {
        return None;
    }
    let mut sum: f64 = nmsd_db[..window].iter().sum();
    if sum / window as f64 <= threshold_db {
        return Some(window);
    }
    for k in window..nmsd_db.len() {
        sum += nmsd_db[k] - nmsd_db[k - window];
        if sum / window as f64 <= threshold_db {
            return Some(k + 1);
        }
    }
    None
}

/// Steady-state NMSD in dB: mean linear deviation over the last 10% of
/// `deviation[..end]`.
pub fn terminal_nmsd_db(deviation: &[f64], end: usize) -> f64 {
    let end = end.min(deviation.len());
    let span = (end / 10).max(1).min(end);
    let tail = &deviation[end - span..end];
    to_db(tail.iter().sum::<f64>() / tail.len() as f64)
}
