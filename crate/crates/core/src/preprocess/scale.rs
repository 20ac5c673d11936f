//! Link-length normalization to a canonical skeleton.

use super::PreprocessError;
use crate::scalar::Real;
use crate::skeleton::{JointMap, SkeletonFrame, SkeletonSequence};

/// Canonical link lengths; `links` is stored root-first.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalSkeleton<T> {
    pub root: usize,
    pub links: Vec<(usize, usize, T)>,
}

impl<T: Real> CanonicalSkeleton<T> {
    /// Lengths paired with the link tree of `map`.
    pub fn from_lengths(map: &JointMap, lengths: &[T]) -> Result<Self, PreprocessError> {
        let order = map.links_root_first();
        if lengths.len() != order.len() {
            return Err(PreprocessError::CanonMismatch(format!(
                "{} lengths for {} links",
                lengths.len(),
                order.len()
            )));
        }
        let c = CanonicalSkeleton {
            root: map.stomach,
            links: order
                .into_iter()
                .zip(lengths)
                .map(|((p, c), &l)| (p, c, l))
                .collect(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn lengths(&self) -> Vec<T> {
        self.links.iter().map(|l| l.2).collect()
    }

    pub fn validate(&self) -> Result<(), PreprocessError> {
        let n = self.links.len() + 1;
        let mut placed = vec![false; n];
        if self.root >= n {
            return Err(PreprocessError::CanonMismatch(
                "root index out of range".into(),
            ));
        }
        placed[self.root] = true;
        for &(p, c, l) in &self.links {
            if p >= n || c >= n {
                return Err(PreprocessError::CanonMismatch(format!(
                    "link {p}-{c} out of range"
                )));
            }
            if !placed[p] || placed[c] {
                return Err(PreprocessError::CanonMismatch(format!(
                    "link {p}-{c} breaks root-first tree order"
                )));
            }
            if !(l > T::zero() && l.is_finite()) {
                return Err(PreprocessError::CanonMismatch(format!(
                    "link {p}-{c} has non-positive length"
                )));
            }
            placed[c] = true;
        }
        Ok(())
    }

    /// Checks that this canon describes the same tree as `map`.
    pub fn check_against(&self, map: &JointMap) -> Result<(), PreprocessError> {
        let expect = map.links_root_first();
        let same = self.root == map.stomach
            && expect.len() == self.links.len()
            && expect
                .iter()
                .zip(&self.links)
                .all(|(&(p, c), &(q, d, _))| p == q && c == d);
        if same {
            Ok(())
        } else {
            Err(PreprocessError::CanonMismatch(format!(
                "canonical skeleton does not match the link tree of layout {}",
                map.name
            )))
        }
    }
}

/// Repositions every child joint along its original parent→child direction
/// at the canonical distance. Descendants follow their parent rigidly, so
/// the new position of a child is its parent's new position plus the
/// rescaled original link vector.
pub fn scale_to_canonical<T: Real>(
    frame: &SkeletonFrame<T>,
    canon: &CanonicalSkeleton<T>,
) -> Result<SkeletonFrame<T>, PreprocessError> {
    scale_to_canonical_tol(frame, canon, T::degeneracy_tol())
}

pub(crate) fn scale_to_canonical_tol<T: Real>(
    frame: &SkeletonFrame<T>,
    canon: &CanonicalSkeleton<T>,
    tol: T,
) -> Result<SkeletonFrame<T>, PreprocessError> {
    if frame.joints.len() != canon.links.len() + 1 {
        return Err(PreprocessError::CanonMismatch(format!(
            "frame has {} joints, canonical skeleton {}",
            frame.joints.len(),
            canon.links.len() + 1
        )));
    }
    let old = &frame.joints;
    let mut out = old.clone();
    for &(p, c, len) in &canon.links {
        let d = old[c] - old[p];
        let norm = d.norm();
        if !(norm >= tol) {
            return Err(PreprocessError::ZeroLengthLink {
                parent: p,
                child: c,
            });
        }
        out[c] = out[p] + d * (len / norm);
    }
    Ok(SkeletonFrame::new(out))
}

fn median<T: Real>(values: &mut [T]) -> T {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite lengths"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / T::lit(2.0)
    }
}

/// Canonical lengths as the per-link median over every training frame.
pub fn build_canonical<T: Real>(
    train: &[SkeletonSequence<T>],
) -> Result<CanonicalSkeleton<T>, PreprocessError> {
    let first = train.first().ok_or(PreprocessError::EmptyTrainingSet)?;
    let map = &first.joint_map;
    let order = map.links_root_first();
    let mut samples: Vec<Vec<T>> = vec![Vec::new(); order.len()];
    for seq in train {
        if seq.joint_map.name != map.name {
            return Err(PreprocessError::CanonMismatch(
                "training sequences use different layouts".into(),
            ));
        }
        for f in &seq.frames {
            for (k, &(p, c)) in order.iter().enumerate() {
                samples[k].push((f.joints[c] - f.joints[p]).norm());
            }
        }
    }
    if samples[0].is_empty() {
        return Err(PreprocessError::EmptyTrainingSet);
    }
    let lengths: Vec<T> = samples.iter_mut().map(|s| median(s)).collect();
    CanonicalSkeleton::from_lengths(map, &lengths)
}
