//! Turns raw skeleton sequences into network input vectors.
//!
//! Per frame: ego-centered transform, then link scaling to a canonical
//! skeleton. Optionally the sequence is then reduced to its most active
//! body part.

mod attention;
mod ego;
mod scale;

pub use attention::{attention_select, dominant_part, part_energies, PartSequence};
pub use ego::{compute_ego_basis, to_ego_frame, EgoFrameBasis};
pub use scale::{build_canonical, scale_to_canonical, CanonicalSkeleton};

use crate::scalar::Real;
use crate::skeleton::{BodyPart, BodyPartition, SkeletonFrame, SkeletonSequence};

#[derive(Debug, thiserror::Error)]
pub enum PreprocessError {
    #[error("hip joints coincide")]
    DegenerateHips,
    #[error("stomach joint is collinear with the hips")]
    CollinearStomach,
    #[error("link {parent}-{child} has zero length")]
    ZeroLengthLink { parent: usize, child: usize },
    #[error("canonical skeleton mismatch: {0}")]
    CanonMismatch(String),
    #[error("sequence has {0} frames, need at least 2")]
    TooFewFrames(usize),
    #[error("{dropped} of {total} frames are degenerate")]
    TooManyDegenerate { dropped: usize, total: usize },
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("invalid body partition: {0}")]
    InvalidPartition(String),
}

/// How the attended part is emitted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionOutput {
    /// Only the selected part's joints (`3 × part size` values per frame).
    #[default]
    Reduced,
    /// All joints, with joints outside the selected part set to zero, so
    /// every sequence keeps the same dimension.
    Masked,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub attention: bool,
    pub attention_output: AttentionOutput,
    /// Overrides the layout's default partition.
    pub partition: Option<BodyPartition>,
    /// Overrides the scalar type's degeneracy tolerance.
    pub degeneracy_tol: Option<f64>,
    /// Largest fraction of degenerate frames dropped before the sequence is
    /// rejected.
    pub max_dropped_fraction: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            attention: false,
            attention_output: AttentionOutput::Reduced,
            partition: None,
            degeneracy_tol: None,
            max_dropped_fraction: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Preprocessed<T> {
    pub vectors: Vec<Vec<T>>,
    pub part: Option<BodyPart>,
    pub dropped_frames: usize,
}

/// Ego transform and scaling for every frame. Frames with degenerate hips
/// or zero-length links are dropped; more than `max_dropped_fraction` of
/// them is an error.
pub fn normalize_frames<T: Real>(
    seq: &SkeletonSequence<T>,
    config: &PreprocessConfig,
    canon: &CanonicalSkeleton<T>,
) -> Result<(Vec<SkeletonFrame<T>>, usize), PreprocessError> {
    canon.check_against(&seq.joint_map)?;
    let tol = config
        .degeneracy_tol
        .map(T::lit)
        .unwrap_or_else(T::degeneracy_tol);
    let mut out = Vec::with_capacity(seq.frames.len());
    let mut dropped = 0;
    for (i, frame) in seq.frames.iter().enumerate() {
        let result = ego::to_ego_frame_tol(frame, &seq.joint_map, tol)
            .and_then(|f| scale::scale_to_canonical_tol(&f, canon, tol));
        match result {
            Ok(f) => out.push(f),
            Err(
                e @ (PreprocessError::DegenerateHips
                | PreprocessError::CollinearStomach
                | PreprocessError::ZeroLengthLink { .. }),
            ) => {
                log::warn!(
                    "dropping frame {i} of sequence (label {}, subject {}): {e}",
                    seq.label,
                    seq.subject_id
                );
                dropped += 1;
            }
            Err(e) => return Err(e),
        }
    }
    let total = seq.frames.len();
    if out.is_empty() || dropped as f64 > config.max_dropped_fraction * total as f64 {
        return Err(PreprocessError::TooManyDegenerate { dropped, total });
    }
    Ok((out, dropped))
}

pub fn preprocess_sequence<T: Real>(
    seq: &SkeletonSequence<T>,
    config: &PreprocessConfig,
    canon: &CanonicalSkeleton<T>,
) -> Result<Preprocessed<T>, PreprocessError> {
    let (frames, dropped_frames) = normalize_frames(seq, config, canon)?;
    if !config.attention {
        return Ok(Preprocessed {
            vectors: frames.iter().map(|f| f.flatten()).collect(),
            part: None,
            dropped_frames,
        });
    }
    let partition = config
        .partition
        .as_ref()
        .unwrap_or(&seq.joint_map.partition);
    partition
        .validate(seq.joint_count())
        .map_err(PreprocessError::InvalidPartition)?;
    let sel = attention_select(&frames, partition)?;
    let vectors = match config.attention_output {
        AttentionOutput::Reduced => sel.frames.iter().map(|f| f.flatten()).collect(),
        AttentionOutput::Masked => {
            let mut keep = vec![false; seq.joint_count()];
            for &j in &sel.joint_indices {
                keep[j] = true;
            }
            frames
                .iter()
                .map(|f| {
                    f.joints
                        .iter()
                        .zip(&keep)
                        .flat_map(|(j, &k)| if k { j.to_array() } else { [T::zero(); 3] })
                        .collect()
                })
                .collect()
        }
    };
    Ok(Preprocessed {
        vectors,
        part: Some(sel.part),
        dropped_frames,
    })
}
