//! Skeleton data: in-memory representation, dataset loaders, the text
//! interchange format and a synthetic action generator.

mod interchange;
mod layout;
mod loaders;
mod synthetic;

use std::ops::{Add, Mul, Sub};
use std::path::PathBuf;
use std::sync::Arc;

use thiserror::Error;

use crate::scalar::Real;

pub use interchange::{
    read_interchange, to_interchange_string, write_interchange, INTERCHANGE_VERSION,
};
pub use layout::{BodyPart, BodyPartition, JointMap};
pub use loaders::{
    load_florence3d, load_msr_action3d, load_utkinect, FLORENCE_CATEGORIES, FLORENCE_FORMAT,
    MSR_CATEGORIES, MSR_FORMAT, MSR_SUBSET_P1, UTKINECT_CATEGORIES, UTKINECT_FORMAT,
};
pub use synthetic::{generate_synthetic, SyntheticSpec};

/// Minimum number of frames accepted for a sequence.
pub const MIN_FRAMES: usize = 3;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{0}")]
    Invalid(String),
}

impl DataError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        DataError::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}

/// A 3-D point or vector.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Joint3D<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Joint3D<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Joint3D { x, y, z }
    }

    pub fn zero() -> Self {
        Joint3D::new(T::zero(), T::zero(), T::zero())
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Joint3D::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }
}

impl<T: Real> Add for Joint3D<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Joint3D::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> Sub for Joint3D<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Joint3D::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Mul<T> for Joint3D<T> {
    type Output = Self;
    fn mul(self, k: T) -> Self {
        Joint3D::new(self.x * k, self.y * k, self.z * k)
    }
}

/// One posture: joint positions in layout order.
#[derive(Clone, Debug, PartialEq)]
pub struct SkeletonFrame<T> {
    pub joints: Vec<Joint3D<T>>,
}

impl<T: Real> SkeletonFrame<T> {
    pub fn new(joints: Vec<Joint3D<T>>) -> Self {
        SkeletonFrame { joints }
    }

    /// Builds a frame from `[x0, y0, z0, x1, ...]`.
    pub fn from_flat(values: &[T]) -> Self {
        debug_assert_eq!(values.len() % 3, 0);
        SkeletonFrame {
            joints: values
                .chunks_exact(3)
                .map(|c| Joint3D::new(c[0], c[1], c[2]))
                .collect(),
        }
    }

    pub fn flatten(&self) -> Vec<T> {
        self.joints.iter().flat_map(|j| j.to_array()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.joints.iter().all(|j| j.is_finite())
    }
}

/// An action sample: consecutive postures with a label.
#[derive(Clone, Debug, PartialEq)]
pub struct SkeletonSequence<T> {
    pub frames: Vec<SkeletonFrame<T>>,
    pub label: usize,
    pub subject_id: u32,
    pub event_id: u32,
    pub dataset_tag: String,
    pub joint_map: Arc<JointMap>,
}

impl<T: Real> SkeletonSequence<T> {
    pub fn joint_count(&self) -> usize {
        self.joint_map.joint_count()
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.frames.is_empty() {
            return Err(DataError::Invalid("sequence has no frames".into()));
        }
        let n = self.joint_count();
        for (i, f) in self.frames.iter().enumerate() {
            if f.joints.len() != n {
                return Err(DataError::Invalid(format!(
                    "frame {i} has {} joints, layout {} declares {n}",
                    f.joints.len(),
                    self.joint_map.name
                )));
            }
            if !f.is_finite() {
                return Err(DataError::Invalid(format!(
                    "frame {i} has non-finite coordinates"
                )));
            }
        }
        Ok(())
    }
}

/// A labelled collection of sequences.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    pub sequences: Vec<SkeletonSequence<T>>,
    pub category_names: Vec<String>,
}

impl<T: Real> Dataset<T> {
    pub fn new(
        sequences: Vec<SkeletonSequence<T>>,
        category_names: Vec<String>,
    ) -> Result<Self, DataError> {
        let d = Dataset {
            sequences,
            category_names,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let mut joints = None;
        for (i, s) in self.sequences.iter().enumerate() {
            if s.label >= self.category_names.len() {
                return Err(DataError::Invalid(format!(
                    "sequence {i} has label {} but only {} categories exist",
                    s.label,
                    self.category_names.len()
                )));
            }
            s.validate()
                .map_err(|e| DataError::Invalid(format!("sequence {i}: {e}")))?;
            match joints {
                None => joints = Some(s.joint_count()),
                Some(n) if n != s.joint_count() => {
                    return Err(DataError::Invalid(format!(
                        "sequence {i} has {} joints, dataset uses {n}",
                        s.joint_count()
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn joint_count(&self) -> Option<usize> {
        self.sequences.first().map(|s| s.joint_count())
    }

    /// Number of distinct labels that actually occur.
    pub fn class_count(&self) -> usize {
        let mut seen = vec![false; self.category_names.len()];
        for s in &self.sequences {
            seen[s.label] = true;
        }
        seen.iter().filter(|&&b| b).count()
    }

    /// Sequences at `indices`, keeping the category table.
    pub fn subset(&self, indices: &[usize]) -> Dataset<T> {
        Dataset {
            sequences: indices.iter().map(|&i| self.sequences[i].clone()).collect(),
            category_names: self.category_names.clone(),
        }
    }
}

pub(crate) fn check_min_frames(frames: usize, what: &str) -> Result<(), DataError> {
    if frames < MIN_FRAMES {
        return Err(DataError::Invalid(format!(
            "{what}: {frames} frame(s), at least {MIN_FRAMES} required"
        )));
    }
    Ok(())
}
