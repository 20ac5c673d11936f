//! Fixed-length, speed-invariant patterns from first-layer winner traces.
//!
//! A trace is the sequence of winner lattice positions `(row, col)` for the
//! frames of one action. Repeated consecutive winners are collapsed, then
//! every pattern is resampled along its polyline to the length of the
//! longest pattern in the training set.

use std::fmt::Write as _;

use crate::lattice::{NetError, NeuronMap};
use crate::scalar::Real;

pub type Point<T> = [T; 2];

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PatternError {
    #[error("empty pattern")]
    Empty,
    #[error("no patterns to measure")]
    NoPatterns,
    #[error("pattern has {count} points, more than the target {k_max}")]
    TooLong { count: usize, k_max: usize },
    #[error("a single-point pattern cannot be resampled to {k_max} points")]
    SinglePoint { k_max: usize },
    #[error("target length must be at least 2, got {0}")]
    TargetTooShort(usize),
    #[error("resampling walked off the end of the polyline with {count} of {k_max} points")]
    Exhausted { count: usize, k_max: usize },
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Winner positions elicited by one sequence, as reals.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivityPattern<T> {
    pub points: Vec<Point<T>>,
    pub source: usize,
}

/// Resampled pattern of exactly `K_max` points.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderedPattern<T> {
    pub points: Vec<Point<T>>,
}

impl<T: Real> OrderedPattern<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `[row0, col0, row1, col1, ...]`.
    pub fn flatten(&self) -> Vec<T> {
        self.points.iter().flat_map(|p| [p[0], p[1]]).collect()
    }

    /// Rows of `sequence,k,row,col`.
    pub fn to_csv(&self, sequence: usize) -> String {
        let mut out = String::from("sequence,k,row,col\n");
        for (k, p) in self.points.iter().enumerate() {
            writeln!(out, "{sequence},{k},{},{}", p[0], p[1]).unwrap();
        }
        out
    }
}

fn seg_len<T: Real>(a: Point<T>, b: Point<T>) -> T {
    let (dr, dc) = (b[0] - a[0], b[1] - a[1]);
    (dr * dr + dc * dc).sqrt()
}

/// Collapses runs of identical consecutive points.
pub fn dedup_consecutive<T: Real>(p: &ActivityPattern<T>) -> ActivityPattern<T> {
    let mut points = p.points.clone();
    points.dedup();
    ActivityPattern {
        points,
        source: p.source,
    }
}

pub fn compute_kmax<T: Real>(patterns: &[ActivityPattern<T>]) -> Result<usize, PatternError> {
    patterns
        .iter()
        .map(|p| p.points.len())
        .max()
        .ok_or(PatternError::NoPatterns)
}

pub fn polyline_length<T: Real>(points: &[Point<T>]) -> T {
    points.windows(2).map(|w| seg_len(w[0], w[1])).sum()
}

/// Walks the polyline in steps of `length / k_max`. A segment longer than
/// the remaining step receives a new point; a shorter one has its end
/// vertex dropped and the remainder carried onto the next segment. The
/// walk stops as soon as the pattern holds `k_max` points; vertices not
/// yet reached are kept.
pub fn resample<T: Real>(
    p: &ActivityPattern<T>,
    k_max: usize,
) -> Result<OrderedPattern<T>, PatternError> {
    let pts = &p.points;
    let m = pts.len();
    if m == 0 {
        return Err(PatternError::Empty);
    }
    if m > k_max {
        return Err(PatternError::TooLong { count: m, k_max });
    }
    if m == k_max {
        return Ok(OrderedPattern {
            points: pts.clone(),
        });
    }
    if k_max < 2 {
        return Err(PatternError::TargetTooShort(k_max));
    }
    if m == 1 {
        return Err(PatternError::SinglePoint { k_max });
    }
    let delta = polyline_length(pts) / T::from_usize_lossy(k_max);
    let tol = delta * T::lit(1e-9);
    let mut out = Vec::with_capacity(k_max);
    out.push(pts[0]);
    let mut cur = pts[0];
    let mut next = 1;
    let mut carry = delta;
    while out.len() + (m - next) < k_max {
        if next >= m {
            return Err(PatternError::Exhausted {
                count: out.len(),
                k_max,
            });
        }
        let target = pts[next];
        let d = seg_len(cur, target);
        if d > carry + tol {
            let f = carry / d;
            let q = [
                cur[0] + (target[0] - cur[0]) * f,
                cur[1] + (target[1] - cur[1]) * f,
            ];
            out.push(q);
            cur = q;
            carry = delta;
        } else if d >= carry - tol {
            out.push(target);
            cur = target;
            next += 1;
            carry = delta;
        } else {
            carry = carry - d;
            cur = target;
            next += 1;
        }
    }
    out.extend_from_slice(&pts[next..]);
    Ok(OrderedPattern { points: out })
}

/// Brings a deduped pattern to exactly `k_max` points at prediction time:
/// overlong patterns lose their tail, single points get a second point
/// offset by 1e-6 along the row axis, then the pattern is resampled.
pub fn fit_to_kmax<T: Real>(
    p: &ActivityPattern<T>,
    k_max: usize,
) -> Result<OrderedPattern<T>, PatternError> {
    let mut p = p.clone();
    if p.points.len() > k_max {
        log::warn!(
            "pattern has {} points, more than k_max; truncating to {k_max}",
            p.points.len()
        );
        p.points.truncate(k_max);
    }
    if p.points.len() == 1 && k_max > 1 {
        let a = p.points[0];
        p.points.push([a[0] + T::lit(1e-6), a[1]]);
    }
    resample(&p, k_max)
}

/// Winner position of every frame on `net`.
pub fn trace_sequence<T: Real, N: NeuronMap<T> + ?Sized>(
    net: &N,
    frames: &[Vec<T>],
    source: usize,
) -> Result<ActivityPattern<T>, PatternError> {
    if frames.is_empty() {
        return Err(PatternError::Empty);
    }
    let points = frames
        .iter()
        .map(|f| {
            let w = net.find_winner(f)?;
            Ok([T::from_usize_lossy(w.row), T::from_usize_lossy(w.col)])
        })
        .collect::<Result<_, NetError>>()?;
    Ok(ActivityPattern { points, source })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pat(points: &[[f64; 2]]) -> ActivityPattern<f64> {
        ActivityPattern {
            points: points.to_vec(),
            source: 0,
        }
    }

    #[test]
    fn dedup_cases() {
        assert_eq!(
            dedup_consecutive(&pat(&[[1.0, 1.0], [1.0, 1.0], [2.0, 2.0]])).points,
            vec![[1.0, 1.0], [2.0, 2.0]]
        );
        let keep = pat(&[[1.0, 1.0], [2.0, 2.0], [1.0, 1.0]]);
        assert_eq!(dedup_consecutive(&keep), keep);
        assert_eq!(dedup_consecutive(&pat(&[[3.0, 1.0]; 5])).points.len(), 1);
    }

    #[test]
    fn kmax_and_length() {
        let ps = [
            pat(&[[0.0, 0.0]; 3]),
            pat(&[[0.0, 0.0]; 7]),
            pat(&[[0.0, 0.0]; 5]),
        ];
        assert_eq!(compute_kmax(&ps), Ok(7));
        assert_eq!(compute_kmax::<f64>(&[]), Err(PatternError::NoPatterns));
        assert_eq!(polyline_length(&pat(&[[0.0, 0.0], [0.0, 3.0]]).points), 3.0);
        assert_eq!(polyline_length(&pat(&[[0.0, 0.0], [3.0, 4.0]]).points), 5.0);
        assert_eq!(polyline_length(&pat(&[[2.0, 2.0]]).points), 0.0);
    }

    #[test]
    fn hand_traced_resample() {
        let out = resample(&pat(&[[0.0, 0.0], [0.0, 3.0]]), 4).unwrap();
        assert_eq!(
            out.points,
            vec![[0.0, 0.0], [0.0, 0.75], [0.0, 1.5], [0.0, 3.0]]
        );
    }

    #[test]
    fn short_segment_vertex_is_dropped() {
        // delta = 4/4 = 1; the vertex at 0.5 is passed and dropped, the
        // carried 0.5 lands on the next segment.
        let out = resample(&pat(&[[0.0, 0.0], [0.0, 0.5], [0.0, 4.0]]), 4).unwrap();
        assert_eq!(
            out.points,
            vec![[0.0, 0.0], [0.0, 1.0], [0.0, 2.0], [0.0, 4.0]]
        );
    }

    #[test]
    fn already_full_and_errors() {
        let p = pat(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]);
        assert_eq!(resample(&p, 3).unwrap().points, p.points);
        assert_eq!(
            resample(&p, 2),
            Err(PatternError::TooLong { count: 3, k_max: 2 })
        );
        assert_eq!(
            resample(&pat(&[[1.0, 1.0]]), 3),
            Err(PatternError::SinglePoint { k_max: 3 })
        );
    }

    #[test]
    fn fit_pads_and_truncates() {
        let single = fit_to_kmax(&pat(&[[2.0, 3.0]]), 3).unwrap();
        assert_eq!(single.len(), 3);
        assert_eq!(single.points[0], [2.0, 3.0]);
        let long = fit_to_kmax(&pat(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]]), 2).unwrap();
        assert_eq!(long.points, vec![[0.0, 0.0], [1.0, 0.0]]);
    }

    #[test]
    fn csv_export() {
        let p = OrderedPattern {
            points: vec![[0.0, 1.5], [2.0, 3.0]],
        };
        assert_eq!(p.to_csv(4), "sequence,k,row,col\n4,0,0,1.5\n4,1,2,3\n");
        assert_eq!(p.flatten(), vec![0.0, 1.5, 2.0, 3.0]);
    }
}
