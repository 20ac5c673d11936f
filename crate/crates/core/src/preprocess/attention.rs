//! Body-part attention: keep the part that moves most over a sequence.

use super::PreprocessError;
use crate::scalar::Real;
use crate::skeleton::{BodyPart, BodyPartition, SkeletonFrame};

/// Frames restricted to the joints of one body part, in partition order.
#[derive(Clone, Debug, PartialEq)]
pub struct PartSequence<T> {
    pub part: BodyPart,
    pub joint_indices: Vec<usize>,
    pub frames: Vec<SkeletonFrame<T>>,
}

/// Summed joint displacement between consecutive frames, per part, indexed
/// by [`BodyPart::index`].
pub fn part_energies<T: Real>(frames: &[SkeletonFrame<T>], partition: &BodyPartition) -> [T; 5] {
    let mut energy = [T::zero(); 5];
    for pair in frames.windows(2) {
        for part in BodyPart::ALL {
            let e = &mut energy[part.index()];
            for &j in partition.part(part) {
                *e = *e + (pair[1].joints[j] - pair[0].joints[j]).norm();
            }
        }
    }
    energy
}

/// Part with the largest energy; earlier parts in [`BodyPart::ALL`] win ties.
pub fn dominant_part<T: Real>(energy: &[T; 5]) -> BodyPart {
    let mut best = BodyPart::ALL[0];
    for part in BodyPart::ALL.into_iter().skip(1) {
        if energy[part.index()] > energy[best.index()] {
            best = part;
        }
    }
    best
}

pub fn attention_select<T: Real>(
    frames: &[SkeletonFrame<T>],
    partition: &BodyPartition,
) -> Result<PartSequence<T>, PreprocessError> {
    if frames.len() < 2 {
        return Err(PreprocessError::TooFewFrames(frames.len()));
    }
    let part = dominant_part(&part_energies(frames, partition));
    let joint_indices = partition.part(part).to_vec();
    let frames = frames
        .iter()
        .map(|f| SkeletonFrame::new(joint_indices.iter().map(|&j| f.joints[j]).collect()))
        .collect();
    Ok(PartSequence {
        part,
        joint_indices,
        frames,
    })
}
