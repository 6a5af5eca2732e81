use serde::{Deserialize, Serialize};

pub fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Nearest-rank percentile, `p` in `(0, 100]`.
pub fn percentile(v: &[f64], p: f64) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * s.len() as f64).ceil() as usize;
    Some(s[rank.clamp(1, s.len()) - 1])
}

/// Middle value, averaging the two central values of an even-length list.
pub fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    Some(if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeStats {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
}

impl TimeStats {
    pub fn of(v: &[f64]) -> Option<Self> {
        Some(TimeStats {
            n: v.len(),
            mean: mean(v)?,
            median: median(v)?,
            p95: percentile(v, 95.0)?,
        })
    }
}
