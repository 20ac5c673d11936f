//! Joint layouts of the supported skeleton sources.

use serde::{Deserialize, Serialize};

/// The five body-part groups used by attention, in tie-break order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BodyPart {
    LeftArm,
    RightArm,
    LeftLeg,
    RightLeg,
    Base,
}

impl BodyPart {
    pub const ALL: [BodyPart; 5] = [
        BodyPart::LeftArm,
        BodyPart::RightArm,
        BodyPart::LeftLeg,
        BodyPart::RightLeg,
        BodyPart::Base,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            BodyPart::LeftArm => "left_arm",
            BodyPart::RightArm => "right_arm",
            BodyPart::LeftLeg => "left_leg",
            BodyPart::RightLeg => "right_leg",
            BodyPart::Base => "base",
        }
    }
}

/// Joint-index sets for the five body parts. Must be disjoint and cover
/// every joint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BodyPartition {
    pub parts: [Vec<usize>; 5],
}

impl BodyPartition {
    pub fn part(&self, p: BodyPart) -> &[usize] {
        &self.parts[p.index()]
    }

    pub fn validate(&self, joint_count: usize) -> Result<(), String> {
        let mut seen = vec![false; joint_count];
        for (p, joints) in BodyPart::ALL.iter().zip(&self.parts) {
            if joints.is_empty() {
                return Err(format!("body part {} is empty", p.name()));
            }
            for &j in joints {
                if j >= joint_count {
                    return Err(format!(
                        "body part {} references joint {j}, skeleton has {joint_count}",
                        p.name()
                    ));
                }
                if seen[j] {
                    return Err(format!("joint {j} belongs to more than one body part"));
                }
                seen[j] = true;
            }
        }
        if let Some(j) = seen.iter().position(|s| !s) {
            return Err(format!("joint {j} is not assigned to any body part"));
        }
        Ok(())
    }
}

/// Named joints plus the anatomical structure needed by preprocessing:
/// the three ego-frame joints, the body partition and the link tree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointMap {
    pub name: String,
    pub joint_names: Vec<String>,
    pub stomach: usize,
    pub right_hip: usize,
    pub left_hip: usize,
    pub partition: BodyPartition,
    /// Parent-child pairs forming a tree rooted at `stomach`.
    pub links: Vec<(usize, usize)>,
}

const KINECT_NUI: [&str; 20] = [
    "hip_center",
    "spine",
    "shoulder_center",
    "head",
    "left_shoulder",
    "left_elbow",
    "left_wrist",
    "left_hand",
    "right_shoulder",
    "right_elbow",
    "right_wrist",
    "right_hand",
    "left_hip",
    "left_knee",
    "left_ankle",
    "left_foot",
    "right_hip",
    "right_knee",
    "right_ankle",
    "right_foot",
];

const MSR_ACTION3D: [&str; 20] = [
    "right_shoulder",
    "left_shoulder",
    "shoulder_center",
    "spine",
    "right_hip",
    "left_hip",
    "hip_center",
    "right_elbow",
    "left_elbow",
    "right_wrist",
    "left_wrist",
    "right_hand",
    "left_hand",
    "right_knee",
    "left_knee",
    "right_ankle",
    "left_ankle",
    "right_foot",
    "left_foot",
    "head",
];

const FLORENCE: [&str; 15] = [
    "head",
    "shoulder_center",
    "spine",
    "left_shoulder",
    "left_elbow",
    "left_wrist",
    "right_shoulder",
    "right_elbow",
    "right_wrist",
    "left_hip",
    "left_knee",
    "left_ankle",
    "right_hip",
    "right_knee",
    "right_ankle",
];

const TWENTY_LINKS: [(&str, &str); 19] = [
    ("spine", "shoulder_center"),
    ("shoulder_center", "head"),
    ("shoulder_center", "left_shoulder"),
    ("left_shoulder", "left_elbow"),
    ("left_elbow", "left_wrist"),
    ("left_wrist", "left_hand"),
    ("shoulder_center", "right_shoulder"),
    ("right_shoulder", "right_elbow"),
    ("right_elbow", "right_wrist"),
    ("right_wrist", "right_hand"),
    ("spine", "hip_center"),
    ("hip_center", "left_hip"),
    ("left_hip", "left_knee"),
    ("left_knee", "left_ankle"),
    ("left_ankle", "left_foot"),
    ("hip_center", "right_hip"),
    ("right_hip", "right_knee"),
    ("right_knee", "right_ankle"),
    ("right_ankle", "right_foot"),
];

const FIFTEEN_LINKS: [(&str, &str); 14] = [
    ("spine", "shoulder_center"),
    ("shoulder_center", "head"),
    ("shoulder_center", "left_shoulder"),
    ("left_shoulder", "left_elbow"),
    ("left_elbow", "left_wrist"),
    ("shoulder_center", "right_shoulder"),
    ("right_shoulder", "right_elbow"),
    ("right_elbow", "right_wrist"),
    ("spine", "left_hip"),
    ("left_hip", "left_knee"),
    ("left_knee", "left_ankle"),
    ("spine", "right_hip"),
    ("right_hip", "right_knee"),
    ("right_knee", "right_ankle"),
];

const LEFT_ARM: [&str; 4] = ["left_shoulder", "left_elbow", "left_wrist", "left_hand"];
const RIGHT_ARM: [&str; 4] = ["right_shoulder", "right_elbow", "right_wrist", "right_hand"];
const LEFT_LEG: [&str; 3] = ["left_knee", "left_ankle", "left_foot"];
const RIGHT_LEG: [&str; 3] = ["right_knee", "right_ankle", "right_foot"];

impl JointMap {
    /// 20-joint Kinect SDK ordering (UTKinect, synthetic data).
    pub fn kinect20() -> Self {
        Self::build("kinect20", &KINECT_NUI, &TWENTY_LINKS)
    }

    /// 20-joint ordering of the MSRAction3D skeleton files.
    pub fn msr_action3d() -> Self {
        Self::build("msr_action3d", &MSR_ACTION3D, &TWENTY_LINKS)
    }

    /// 15-joint ordering of Florence3DActions.
    pub fn florence15() -> Self {
        Self::build("florence15", &FLORENCE, &FIFTEEN_LINKS)
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "kinect20" => Some(Self::kinect20()),
            "msr_action3d" => Some(Self::msr_action3d()),
            "florence15" => Some(Self::florence15()),
            _ => None,
        }
    }

    /// Default layout for a joint count.
    pub fn for_joint_count(n: usize) -> Option<Self> {
        match n {
            20 => Some(Self::kinect20()),
            15 => Some(Self::florence15()),
            _ => None,
        }
    }

    fn build(name: &str, joints: &[&str], links: &[(&str, &str)]) -> Self {
        let idx = |n: &str| {
            joints
                .iter()
                .position(|j| *j == n)
                .unwrap_or_else(|| panic!("joint {n} missing from layout {name}"))
        };
        let pick = |names: &[&str]| -> Vec<usize> {
            let mut v: Vec<usize> = names
                .iter()
                .filter(|n| joints.contains(n))
                .map(|n| idx(n))
                .collect();
            v.sort_unstable();
            v
        };
        let limbs: Vec<usize> = [&LEFT_ARM[..], &RIGHT_ARM, &LEFT_LEG, &RIGHT_LEG]
            .iter()
            .flat_map(|p| pick(p))
            .collect();
        // Hips, hip center, spine, neck and head form the base.
        let base: Vec<usize> = (0..joints.len()).filter(|j| !limbs.contains(j)).collect();
        let map = JointMap {
            name: name.to_string(),
            joint_names: joints.iter().map(|s| s.to_string()).collect(),
            stomach: idx("spine"),
            right_hip: idx("right_hip"),
            left_hip: idx("left_hip"),
            partition: BodyPartition {
                parts: [
                    pick(&LEFT_ARM),
                    pick(&RIGHT_ARM),
                    pick(&LEFT_LEG),
                    pick(&RIGHT_LEG),
                    base,
                ],
            },
            links: links.iter().map(|(p, c)| (idx(p), idx(c))).collect(),
        };
        debug_assert!(map.validate().is_ok());
        map
    }

    pub fn joint_count(&self) -> usize {
        self.joint_names.len()
    }

    /// Checks index ranges, distinctness of the ego joints, the partition
    /// and the tree shape of `links`.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.joint_count();
        let special = [self.stomach, self.right_hip, self.left_hip];
        if special.iter().any(|&j| j >= n) {
            return Err("stomach/hip index out of range".into());
        }
        if special[0] == special[1] || special[0] == special[2] || special[1] == special[2] {
            return Err("stomach, right hip and left hip must be distinct joints".into());
        }
        self.partition.validate(n)?;
        if self.links.len() + 1 != n {
            return Err(format!(
                "link tree must have {} links for {n} joints, found {}",
                n - 1,
                self.links.len()
            ));
        }
        let mut parent = vec![None; n];
        for &(p, c) in &self.links {
            if p >= n || c >= n || p == c {
                return Err(format!("invalid link {p}-{c}"));
            }
            if c == self.stomach || parent[c].is_some() {
                return Err(format!("joint {c} has more than one parent"));
            }
            parent[c] = Some(p);
        }
        // Every joint must reach the root.
        for start in 0..n {
            let mut j = start;
            let mut steps = 0;
            while j != self.stomach {
                j = parent[j]
                    .ok_or_else(|| format!("joint {start} is not connected to the root"))?;
                steps += 1;
                if steps > n {
                    return Err("link tree contains a cycle".into());
                }
            }
        }
        Ok(())
    }

    /// Links in breadth-first order from the root, so every parent is
    /// visited before its children.
    pub fn links_root_first(&self) -> Vec<(usize, usize)> {
        let mut order = Vec::with_capacity(self.links.len());
        let mut frontier = vec![self.stomach];
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for &p in &frontier {
                for &(lp, c) in &self.links {
                    if lp == p {
                        order.push((lp, c));
                        next.push(c);
                    }
                }
            }
            frontier = next;
        }
        order
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_layouts_are_valid() {
        for m in [
            JointMap::kinect20(),
            JointMap::msr_action3d(),
            JointMap::florence15(),
        ] {
            m.validate().unwrap();
            assert_eq!(m.links_root_first().len(), m.joint_count() - 1);
        }
    }

    #[test]
    fn arm_parts_have_expected_sizes() {
        let m = JointMap::kinect20();
        assert_eq!(m.partition.part(BodyPart::RightArm).len(), 4);
        assert_eq!(m.partition.part(BodyPart::LeftLeg).len(), 3);
        assert_eq!(m.partition.part(BodyPart::Base).len(), 6);
        let f = JointMap::florence15();
        assert_eq!(f.partition.part(BodyPart::LeftArm).len(), 3);
        assert_eq!(f.partition.part(BodyPart::Base).len(), 5);
        assert!(f.partition.part(BodyPart::Base).contains(&f.left_hip));
    }

    #[test]
    fn overlapping_partition_rejected() {
        let mut m = JointMap::kinect20();
        let j = m.partition.parts[0][0];
        m.partition.parts[4].push(j);
        assert!(m.validate().is_err());
    }

    #[test]
    fn cyclic_links_rejected() {
        let mut m = JointMap::florence15();
        let (p, c) = m.links[1];
        m.links[1] = (c, p);
        assert!(m.validate().is_err());
    }
}
