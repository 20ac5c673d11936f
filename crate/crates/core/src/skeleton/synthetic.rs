//! Parametric synthetic actions for tests and dataset-free runs.
//!
//! Each class is a fixed family of limb oscillations applied to a standing
//! skeleton by forward kinematics. Class prototypes depend only on the class
//! index; the seed controls per-sequence length and Gaussian jitter.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{DataError, Dataset, Joint3D, JointMap, SkeletonFrame, SkeletonSequence};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub n_classes: usize,
    pub n_per_class: usize,
    /// 20 (Kinect layout) or 15 (Florence layout).
    pub n_joints: usize,
    /// Inclusive frame-count range, within [10, 200].
    pub frame_range: (usize, usize),
    pub noise_sigma: f64,
    pub seed: u64,
}

const PROTOTYPE_SEED: u64 = 0x9E37_79B9_7F4A_7C15;

/// Rest-pose offsets from parent to child, meters (x right, y up, z forward).
const REST_OFFSETS: [(&str, &str, [f64; 3]); 21] = [
    ("spine", "shoulder_center", [0.0, 0.35, 0.0]),
    ("shoulder_center", "head", [0.0, 0.20, 0.0]),
    ("shoulder_center", "left_shoulder", [-0.18, -0.03, 0.0]),
    ("left_shoulder", "left_elbow", [0.0, -0.28, 0.0]),
    ("left_elbow", "left_wrist", [0.0, -0.25, 0.0]),
    ("left_wrist", "left_hand", [0.0, -0.08, 0.0]),
    ("shoulder_center", "right_shoulder", [0.18, -0.03, 0.0]),
    ("right_shoulder", "right_elbow", [0.0, -0.28, 0.0]),
    ("right_elbow", "right_wrist", [0.0, -0.25, 0.0]),
    ("right_wrist", "right_hand", [0.0, -0.08, 0.0]),
    ("spine", "hip_center", [0.0, -0.12, 0.0]),
    ("hip_center", "left_hip", [-0.10, -0.05, 0.0]),
    ("hip_center", "right_hip", [0.10, -0.05, 0.0]),
    ("spine", "left_hip", [-0.10, -0.17, 0.0]),
    ("spine", "right_hip", [0.10, -0.17, 0.0]),
    ("left_hip", "left_knee", [0.0, -0.42, 0.0]),
    ("left_knee", "left_ankle", [0.0, -0.40, 0.0]),
    ("left_ankle", "left_foot", [0.0, -0.05, 0.10]),
    ("right_hip", "right_knee", [0.0, -0.42, 0.0]),
    ("right_knee", "right_ankle", [0.0, -0.40, 0.0]),
    ("right_ankle", "right_foot", [0.0, -0.05, 0.10]),
];

const PIVOTS: [&str; 9] = [
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "shoulder_center",
];

#[derive(Clone, Copy, Debug)]
struct Oscillation {
    amplitude: f64,
    /// 0 = about x (forward swing), 2 = about z (sideways swing).
    axis: usize,
    cycles: f64,
    phase: f64,
}

type Mat3 = [[f64; 3]; 3];

fn rotation(axis: usize, angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    match axis {
        0 => [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]],
        1 => [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]],
        _ => [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
    }
}

fn matmul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    m
}

fn apply(m: &Mat3, v: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2])
}

/// Per-class motion: one optional oscillation per pivot joint.
fn class_prototype(class: usize) -> Vec<Option<Oscillation>> {
    let mut rng = ChaCha8Rng::seed_from_u64(
        PROTOTYPE_SEED ^ (class as u64).wrapping_mul(0xA24B_AED4_963E_E407),
    );
    let mut osc: Vec<Option<Oscillation>> = vec![None; PIVOTS.len()];
    // A dominant limb per class keeps families apart, plus two random extras.
    let primary = class % 4;
    let mut active = vec![primary];
    while active.len() < 3 {
        let k = rng.random_range(0..PIVOTS.len());
        if !active.contains(&k) {
            active.push(k);
        }
    }
    for (rank, &k) in active.iter().enumerate() {
        let amplitude = if rank == 0 {
            rng.random_range(0.9..1.4)
        } else {
            rng.random_range(0.2..0.8)
        };
        osc[k] = Some(Oscillation {
            amplitude,
            axis: if rng.random_bool(0.5) { 0 } else { 2 },
            cycles: [0.5, 1.0, 1.5, 2.0][rng.random_range(0..4)],
            phase: rng.random_range(0.0..2.0 * PI),
        });
    }
    osc
}

fn pose(map: &JointMap, proto: &[Option<Oscillation>], u: f64) -> Vec<[f64; 3]> {
    let n = map.joint_count();
    let idx = |name: &str| map.joint_names.iter().position(|j| j == name);
    let mut local = vec![rotation(0, 0.0); n];
    for (k, pivot) in PIVOTS.iter().enumerate() {
        if let (Some(j), Some(o)) = (idx(pivot), proto[k]) {
            let angle = o.amplitude * (2.0 * PI * o.cycles * u + o.phase).sin();
            local[j] = rotation(o.axis, angle);
        }
    }
    let mut acc = vec![rotation(0, 0.0); n];
    let mut pos = vec![[0.0; 3]; n];
    pos[map.stomach] = [0.0, 1.0, 3.0];
    acc[map.stomach] = local[map.stomach];
    for (p, c) in map.links_root_first() {
        let offset = REST_OFFSETS
            .iter()
            .find(|(a, b, _)| map.joint_names[p] == *a && map.joint_names[c] == *b)
            .map(|t| t.2)
            .expect("rest offset for every layout link");
        let d = apply(&acc[p], offset);
        pos[c] = [pos[p][0] + d[0], pos[p][1] + d[1], pos[p][2] + d[2]];
        acc[c] = matmul(&acc[p], &local[c]);
    }
    pos
}

/// Generates `n_classes * n_per_class` labelled sequences.
pub fn generate_synthetic<T: Real>(spec: &SyntheticSpec) -> Result<Dataset<T>, DataError> {
    if spec.n_classes < 2 {
        return Err(DataError::Invalid(
            "synthetic data needs at least 2 classes".into(),
        ));
    }
    if spec.n_per_class == 0 {
        return Err(DataError::Invalid("n_per_class must be positive".into()));
    }
    let (lo, hi) = spec.frame_range;
    if lo > hi || lo < 10 || hi > 200 {
        return Err(DataError::Invalid(format!(
            "frame range [{lo}, {hi}] must lie within [10, 200]"
        )));
    }
    if !(spec.noise_sigma >= 0.0 && spec.noise_sigma.is_finite()) {
        return Err(DataError::Invalid(
            "noise_sigma must be finite and non-negative".into(),
        ));
    }
    let map = Arc::new(JointMap::for_joint_count(spec.n_joints).ok_or_else(|| {
        DataError::Invalid(format!(
            "synthetic skeletons have 20 or 15 joints, not {}",
            spec.n_joints
        ))
    })?);
    let noise =
        Normal::new(0.0, spec.noise_sigma).map_err(|e| DataError::Invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut sequences = Vec::with_capacity(spec.n_classes * spec.n_per_class);
    for class in 0..spec.n_classes {
        let proto = class_prototype(class);
        for i in 0..spec.n_per_class {
            let frames_n = rng.random_range(lo..=hi);
            let frames = (0..frames_n)
                .map(|f| {
                    let u = if frames_n > 1 {
                        f as f64 / (frames_n - 1) as f64
                    } else {
                        0.0
                    };
                    let joints = pose(&map, &proto, u)
                        .into_iter()
                        .map(|p| {
                            let mut jitter = || {
                                if spec.noise_sigma > 0.0 {
                                    noise.sample(&mut rng)
                                } else {
                                    0.0
                                }
                            };
                            Joint3D::new(
                                T::lit(p[0] + jitter()),
                                T::lit(p[1] + jitter()),
                                T::lit(p[2] + jitter()),
                            )
                        })
                        .collect();
                    SkeletonFrame::new(joints)
                })
                .collect();
            sequences.push(SkeletonSequence {
                frames,
                label: class,
                subject_id: (i % 10) as u32 + 1,
                event_id: (i / 10) as u32 + 1,
                dataset_tag: "synthetic".into(),
                joint_map: map.clone(),
            });
        }
    }
    let names = (0..spec.n_classes)
        .map(|c| format!("synthetic_{c}"))
        .collect();
    Dataset::new(sequences, names)
}
