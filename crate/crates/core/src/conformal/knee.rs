use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Knee of a sorted score curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KneePoint {
    pub threshold: f64,
    /// Position of the knee in the ascending order, `None` for the fallback.
    pub index: Option<usize>,
    /// The curve had no point below its chord; `threshold` is the midpoint
    /// of the value range.
    pub degenerate: bool,
}

const FLAT_TOLERANCE: f64 = 1e-12;

/// Kneedle-style threshold selection on credibility values.
///
/// Values are sorted ascending and both axes (rank, value) are scaled to
/// `[0, 1]`. The knee is the point furthest below the chord joining the first
/// and last point, i.e. the maximum of `rank_norm - value_norm`; its value is
/// returned. A curve with no point below the chord falls back to the midpoint
/// of the value range.
pub fn select_threshold_knee(values: &[f64]) -> Result<KneePoint> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    sorted.sort_by(f64::total_cmp);
    let distinct = 1 + sorted.windows(2).filter(|w| w[0] != w[1]).count();
    if sorted.is_empty() || distinct < 3 {
        return Err(Error::TooFewDistinct { distinct: if sorted.is_empty() { 0 } else { distinct } });
    }

    let n = sorted.len();
    let lo = sorted[0];
    let hi = sorted[n - 1];
    let span = hi - lo;
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, &v) in sorted.iter().enumerate() {
        let gap = i as f64 / (n - 1) as f64 - (v - lo) / span;
        if gap > best.1 {
            best = (i, gap);
        }
    }

    if best.1 <= FLAT_TOLERANCE {
        log::warn!("credibility curve has no knee; falling back to the midpoint of its range");
        return Ok(KneePoint { threshold: 0.5 * (lo + hi), index: None, degenerate: true });
    }
    Ok(KneePoint { threshold: sorted[best.0], index: Some(best.0), degenerate: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    /// Exhaustive distance-to-chord search in plain geometry: signed vertical
    /// distance of each point below the line through the end points.
    fn chord_oracle(values: &[f64]) -> usize {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64 - 1.0;
        let (x0, y0, x1, y1) = (0.0, v[0], n, v[v.len() - 1]);
        let mut best = (0, f64::NEG_INFINITY);
        for (i, &y) in v.iter().enumerate() {
            let on_chord = y0 + (y1 - y0) * (i as f64 - x0) / (x1 - x0);
            let below = (on_chord - y) / (y1 - y0);
            if below > best.1 {
                best = (i, below);
            }
        }
        best.0
    }

    #[test]
    fn l_curve_knee_is_last_low_value() {
        let mut values = vec![0.01; 20];
        values.extend(vec![0.99; 20]);
        let knee = select_threshold_knee(&values).unwrap_err();
        // only two distinct values
        assert_eq!(knee, Error::TooFewDistinct { distinct: 2 });

        // add a third level so the precondition holds; the jump stays dominant
        let mut values = vec![0.01; 20];
        values.extend(vec![0.99; 19]);
        values.push(1.0);
        let knee = select_threshold_knee(&values).unwrap();
        assert_eq!(knee.index, Some(19));
        assert_eq!(knee.index.unwrap(), chord_oracle(&values));
        assert_eq!(knee.threshold, 0.01);
        assert!(!knee.degenerate);
    }

    #[test]
    fn convex_curve_matches_oracle() {
        let values: Vec<f64> = (0..50).map(|i| libm::pow(i as f64 / 49.0, 4.0)).collect();
        let knee = select_threshold_knee(&values).unwrap();
        assert_eq!(knee.index.unwrap(), chord_oracle(&values));
        assert!(knee.threshold > values[0] && knee.threshold < values[49]);
    }

    #[test]
    fn linear_ramp_is_degenerate() {
        let values: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
        let knee = select_threshold_knee(&values).unwrap();
        assert!(knee.degenerate);
        assert_eq!(knee.index, None);
        assert!((knee.threshold - 0.5).abs() < 1e-12);
    }

    #[test]
    fn input_order_does_not_matter() {
        let values = [0.9, 0.02, 0.85, 0.03, 0.95, 0.8, 0.01, 0.9];
        let mut rev = values;
        rev.reverse();
        assert_eq!(select_threshold_knee(&values).unwrap(), select_threshold_knee(&rev).unwrap());
    }

    #[test]
    fn constant_values_fail() {
        assert_eq!(
            select_threshold_knee(&[0.3; 10]),
            Err(Error::TooFewDistinct { distinct: 1 })
        );
        assert_eq!(select_threshold_knee(&[]), Err(Error::TooFewDistinct { distinct: 0 }));
    }
}
