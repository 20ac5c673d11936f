//! Loaders for the public skeleton datasets.
//!
//! The on-disk layouts below are the de-facto formats of the archives as
//! commonly distributed. Each loader documents the exact assumption it
//! makes; the same text is exposed through the `*_FORMAT` constants for
//! the CLI `--describe-format` probe.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use regex::Regex;

use super::{
    check_min_frames, DataError, Dataset, Joint3D, JointMap, SkeletonFrame, SkeletonSequence,
};
use crate::scalar::Real;

pub const MSR_CATEGORIES: [&str; 20] = [
    "High Arm Wave",
    "Horizontal Arm Wave",
    "Using Hammer",
    "Hand Catch",
    "Forward Punch",
    "High Throw",
    "Draw X-Sign",
    "Draw Tick",
    "Draw Circle",
    "Hand Clap",
    "Two Hands Wave",
    "Side Boxing",
    "Forward Bend",
    "Forward Kick",
    "Side Kick",
    "Still Jogging",
    "Tennis Swing",
    "Tennis Serve",
    "Golf Swing",
    "Pick up and Throw",
];

/// MSRAction3D action ids (1-based) of the ten whole-body actions.
pub const MSR_SUBSET_P1: [usize; 10] = [10, 11, 12, 13, 14, 15, 16, 18, 19, 20];

pub const UTKINECT_CATEGORIES: [(&str, &str); 10] = [
    ("walk", "Walk"),
    ("sitDown", "Sit down"),
    ("standUp", "Stand up"),
    ("pickUp", "Pick up"),
    ("carry", "Carry"),
    ("throw", "Throw"),
    ("push", "Push"),
    ("pull", "Pull"),
    ("waveHands", "Wave Hands"),
    ("clapHands", "Clap Hands"),
];

pub const FLORENCE_CATEGORIES: [&str; 9] = [
    "Wave",
    "Drink from a Bottle",
    "Answer Phone",
    "Clap Hands",
    "Tight Lace",
    "Sit down",
    "Stand up",
    "Read Watch",
    "Bow",
];

pub const MSR_FORMAT: &str = "\
MSRAction3D: a directory of text files named aAA_sSS_eEE_skeleton*.txt
(AA = action id 1..20, SS = subject, EE = event). Every non-empty line holds
four reals `x y z confidence`; consecutive groups of 20 lines form one frame in
the order right_shoulder, left_shoulder, shoulder_center, spine, right_hip,
left_hip, hip_center, right_elbow, left_elbow, right_wrist, left_wrist,
right_hand, left_hand, right_knee, left_knee, right_ankle, left_ankle,
right_foot, left_foot, head. The confidence column is dropped. Files whose
stem appears in the exclusion list are skipped.";

pub const UTKINECT_FORMAT: &str = "\
UTKinect-Action3D: a root directory containing actionLabel.txt and the joint
files joints_sSS_eEE.txt (either directly or under joints/). A joint file line
is `frame_number` followed by 60 reals (20 joints x xyz, Kinect SDK order:
hip_center, spine, shoulder_center, head, left arm x4, right arm x4, left leg
x4, right leg x4). actionLabel.txt consists of blocks: a line `sSS_eEE`
followed by lines `actionName: start end` giving inclusive frame-number
ranges. Ranges must not overlap and both endpoints must exist in the joint
file.";

pub const FLORENCE_FORMAT: &str = "\
Florence3DActions: one world-coordinates text file; each row is
`video_id actor_id category_id` followed by 45 reals (15 joints x xyz in the
order head, neck, spine, left shoulder/elbow/wrist, right
shoulder/elbow/wrist, left hip/knee/ankle, right hip/knee/ankle).
Consecutive rows with the same video id form one sequence.";

fn parse_reals<T: Real>(fields: &[&str], path: &Path, line: usize) -> Result<Vec<T>, DataError> {
    fields
        .iter()
        .map(|f| {
            let v: T = f
                .parse()
                .map_err(|_| DataError::parse(path, line, format!("not a number: {f:?}")))?;
            if !v.is_finite() {
                return Err(DataError::parse(path, line, "non-finite coordinate"));
            }
            Ok(v)
        })
        .collect()
}

fn read_text(path: &Path) -> Result<String, DataError> {
    fs::read_to_string(path).map_err(|e| DataError::io(path, e))
}

fn list_dir(dir: &Path) -> Result<Vec<PathBuf>, DataError> {
    let rd = fs::read_dir(dir).map_err(|e| DataError::io(dir, e))?;
    let mut out = Vec::new();
    for entry in rd {
        let entry = entry.map_err(|e| DataError::io(dir, e))?;
        out.push(entry.path());
    }
    out.sort();
    Ok(out)
}

/// Loads MSRAction3D skeleton files from `root`.
///
/// `subset` lists the 1-based action ids to keep (empty keeps all 20);
/// labels are re-indexed in subset order. `exclude` names file stems to
/// skip, e.g. sequences known to be corrupt.
pub fn load_msr_action3d<T: Real>(
    root: &Path,
    subset: &[usize],
    exclude: &[String],
) -> Result<Dataset<T>, DataError> {
    if !root.is_dir() {
        return Err(DataError::Invalid(format!(
            "MSRAction3D directory {} does not exist",
            root.display()
        )));
    }
    let ids: Vec<usize> = if subset.is_empty() {
        (1..=20).collect()
    } else {
        subset.to_vec()
    };
    if let Some(bad) = ids.iter().find(|&&a| a == 0 || a > 20) {
        return Err(DataError::Invalid(format!(
            "MSRAction3D action id {bad} outside 1..=20"
        )));
    }
    let label_of: HashMap<usize, usize> = ids.iter().enumerate().map(|(i, &a)| (a, i)).collect();
    let name_re = Regex::new(r"^a(\d+)_s(\d+)_e(\d+)_skeleton[^.]*\.txt$").expect("valid regex");
    let map = Arc::new(JointMap::msr_action3d());
    let n = map.joint_count();

    let mut sequences = Vec::new();
    let mut matched = 0usize;
    for path in list_dir(root)? {
        let Some(fname) = path.file_name().and_then(|f| f.to_str()) else {
            continue;
        };
        let Some(caps) = name_re.captures(fname) else {
            continue;
        };
        matched += 1;
        let stem = fname.trim_end_matches(".txt");
        if exclude.iter().any(|e| e == stem || e == fname) {
            log::info!("skipping excluded sequence {stem}");
            continue;
        }
        let action: usize = caps[1].parse().expect("digits");
        let Some(&label) = label_of.get(&action) else {
            continue;
        };
        let subject: u32 = caps[2].parse().expect("digits");
        let event: u32 = caps[3].parse().expect("digits");

        let text = read_text(&path)?;
        let mut joints = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if fields.len() != 4 {
                return Err(DataError::parse(
                    &path,
                    lineno + 1,
                    format!(
                        "expected 4 columns (x y z confidence), found {}",
                        fields.len()
                    ),
                ));
            }
            let v = parse_reals::<T>(&fields[..3], &path, lineno + 1)?;
            joints.push(Joint3D::new(v[0], v[1], v[2]));
        }
        if joints.len() % n != 0 {
            return Err(DataError::Invalid(format!(
                "{}: {} joint rows is not a multiple of {n}; last frame has {} joints",
                path.display(),
                joints.len(),
                joints.len() % n
            )));
        }
        let frames: Vec<SkeletonFrame<T>> = joints
            .chunks_exact(n)
            .map(|c| SkeletonFrame::new(c.to_vec()))
            .collect();
        check_min_frames(frames.len(), &path.display().to_string())?;
        sequences.push(SkeletonSequence {
            frames,
            label,
            subject_id: subject,
            event_id: event,
            dataset_tag: "msr_action3d".into(),
            joint_map: map.clone(),
        });
    }
    if matched == 0 {
        return Err(DataError::Invalid(format!(
            "no MSRAction3D skeleton files (aXX_sXX_eXX_skeleton*.txt) in {}",
            root.display()
        )));
    }
    let names = ids
        .iter()
        .map(|&a| MSR_CATEGORIES[a - 1].to_string())
        .collect();
    Dataset::new(sequences, names)
}

/// Labelled frame ranges `(label, start, end, line)` per (subject, event).
type LabelBlocks = BTreeMap<(u32, u32), Vec<(usize, i64, i64, usize)>>;

fn parse_label_file(path: &Path) -> Result<LabelBlocks, DataError> {
    let text = read_text(path)?;
    let header_re = Regex::new(r"^s(\d+)_e(\d+)$").expect("valid regex");
    let mut blocks = LabelBlocks::new();
    let mut current: Option<(u32, u32)> = None;
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = header_re.captures(line) {
            let key = (c[1].parse().expect("digits"), c[2].parse().expect("digits"));
            blocks.entry(key).or_default();
            current = Some(key);
            continue;
        }
        let key = current.ok_or_else(|| {
            DataError::parse(path, lineno, "action range before any sSS_eEE header")
        })?;
        let (name, range) = line
            .split_once(':')
            .ok_or_else(|| DataError::parse(path, lineno, "expected `action: start end`"))?;
        let label = UTKINECT_CATEGORIES
            .iter()
            .position(|(k, _)| k.eq_ignore_ascii_case(name.trim()))
            .ok_or_else(|| {
                DataError::parse(path, lineno, format!("unknown action {:?}", name.trim()))
            })?;
        let nums: Vec<i64> = range
            .split_whitespace()
            .map(|f| f.parse::<i64>())
            .collect::<Result<_, _>>()
            .map_err(|_| DataError::parse(path, lineno, "frame range must be two integers"))?;
        if nums.len() != 2 || nums[0] > nums[1] {
            return Err(DataError::parse(
                path,
                lineno,
                "frame range must be `start end` with start <= end",
            ));
        }
        blocks
            .get_mut(&key)
            .expect("block exists")
            .push((label, nums[0], nums[1], lineno));
    }
    if blocks.is_empty() {
        return Err(DataError::parse(
            path,
            1,
            "label file contains no sSS_eEE blocks",
        ));
    }
    for ranges in blocks.values() {
        let mut sorted = ranges.clone();
        sorted.sort_by_key(|r| r.1);
        for w in sorted.windows(2) {
            if w[1].1 <= w[0].2 {
                return Err(DataError::parse(
                    path,
                    w[1].3,
                    format!(
                        "frame range {}..{} overlaps {}..{}",
                        w[1].1, w[1].2, w[0].1, w[0].2
                    ),
                ));
            }
        }
    }
    Ok(blocks)
}

/// Loads UTKinect-Action3D from `root`.
pub fn load_utkinect<T: Real>(root: &Path) -> Result<Dataset<T>, DataError> {
    if !root.is_dir() {
        return Err(DataError::Invalid(format!(
            "UTKinect directory {} does not exist",
            root.display()
        )));
    }
    let labels = parse_label_file(&root.join("actionLabel.txt"))?;
    let joints_dir = if root.join("joints").is_dir() {
        root.join("joints")
    } else {
        root.to_path_buf()
    };
    let map = Arc::new(JointMap::kinect20());
    let n = map.joint_count();
    let mut sequences = Vec::new();
    for (&(s, e), ranges) in &labels {
        let path = joints_dir.join(format!("joints_s{s:02}_e{e:02}.txt"));
        let text = read_text(&path)?;
        let mut frames: BTreeMap<i64, SkeletonFrame<T>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if fields.len() != 1 + 3 * n {
                return Err(DataError::parse(
                    &path,
                    i + 1,
                    format!(
                        "expected frame number plus {} coordinates, found {} fields",
                        3 * n,
                        fields.len()
                    ),
                ));
            }
            let frame_no: i64 = fields[0]
                .parse::<f64>()
                .ok()
                .filter(|v| v.fract() == 0.0)
                .map(|v| v as i64)
                .ok_or_else(|| DataError::parse(&path, i + 1, "frame number is not an integer"))?;
            let v = parse_reals::<T>(&fields[1..], &path, i + 1)?;
            frames.insert(frame_no, SkeletonFrame::from_flat(&v));
        }
        for &(label, start, end, lineno) in ranges {
            for endpoint in [start, end] {
                if !frames.contains_key(&endpoint) {
                    return Err(DataError::Invalid(format!(
                        "actionLabel.txt:{lineno}: frame {endpoint} not present in {}",
                        path.display()
                    )));
                }
            }
            let seq_frames: Vec<_> = frames.range(start..=end).map(|(_, f)| f.clone()).collect();
            check_min_frames(
                seq_frames.len(),
                &format!("s{s:02}_e{e:02} {}", UTKINECT_CATEGORIES[label].0),
            )?;
            sequences.push(SkeletonSequence {
                frames: seq_frames,
                label,
                subject_id: s,
                event_id: e,
                dataset_tag: "utkinect".into(),
                joint_map: map.clone(),
            });
        }
    }
    let names = UTKINECT_CATEGORIES
        .iter()
        .map(|(_, n)| n.to_string())
        .collect();
    Dataset::new(sequences, names)
}

/// Loads Florence3DActions from its world-coordinates file.
pub fn load_florence3d<T: Real>(file: &Path) -> Result<Dataset<T>, DataError> {
    let text = read_text(file)?;
    let map = Arc::new(JointMap::florence15());
    let n = map.joint_count();
    let width = 3 + 3 * n;

    struct Pending<T> {
        video: i64,
        actor: u32,
        label: usize,
        frames: Vec<SkeletonFrame<T>>,
    }
    let mut pending: Option<Pending<T>> = None;
    let mut done: Vec<Pending<T>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != width {
            return Err(DataError::parse(
                file,
                i + 1,
                format!(
                    "expected {width} columns (3 ids + {} coordinates), found {}",
                    3 * n,
                    fields.len()
                ),
            ));
        }
        let id = |k: usize| -> Result<i64, DataError> {
            fields[k]
                .parse::<f64>()
                .ok()
                .filter(|v| v.fract() == 0.0)
                .map(|v| v as i64)
                .ok_or_else(|| {
                    DataError::parse(
                        file,
                        i + 1,
                        format!("column {} is not an integer id", k + 1),
                    )
                })
        };
        let (video, actor, category) = (id(0)?, id(1)?, id(2)?);
        if !(1..=FLORENCE_CATEGORIES.len() as i64).contains(&category) {
            return Err(DataError::parse(
                file,
                i + 1,
                format!("category {category} outside 1..=9"),
            ));
        }
        let coords = parse_reals::<T>(&fields[3..], file, i + 1)?;
        let frame = SkeletonFrame::from_flat(&coords);
        match pending.as_mut() {
            Some(p) if p.video == video => {
                if p.label != (category - 1) as usize || p.actor as i64 != actor {
                    return Err(DataError::parse(
                        file,
                        i + 1,
                        "actor/category changes within one video",
                    ));
                }
                p.frames.push(frame);
            }
            _ => {
                if let Some(p) = pending.take() {
                    if video != p.video + 1 {
                        log::warn!(
                            "{}:{}: video id jumps from {} to {video}",
                            file.display(),
                            i + 1,
                            p.video
                        );
                    }
                    done.push(p);
                }
                pending = Some(Pending {
                    video,
                    actor: actor as u32,
                    label: (category - 1) as usize,
                    frames: vec![frame],
                });
            }
        }
    }
    done.extend(pending);
    if done.is_empty() {
        return Err(DataError::Invalid(format!(
            "{} contains no rows",
            file.display()
        )));
    }
    let mut events: HashMap<(u32, usize), u32> = HashMap::new();
    let mut sequences = Vec::with_capacity(done.len());
    for p in done {
        check_min_frames(p.frames.len(), &format!("video {}", p.video))?;
        let ev = events.entry((p.actor, p.label)).or_insert(0);
        *ev += 1;
        sequences.push(SkeletonSequence {
            frames: p.frames,
            label: p.label,
            subject_id: p.actor,
            event_id: *ev,
            dataset_tag: "florence3d".into(),
            joint_map: map.clone(),
        });
    }
    Dataset::new(
        sequences,
        FLORENCE_CATEGORIES.iter().map(|s| s.to_string()).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fmt::Write as _;

    fn msr_file(frames: usize, joints_per_frame: usize) -> String {
        let mut s = String::new();
        for f in 0..frames {
            for j in 0..joints_per_frame {
                writeln!(
                    s,
                    "{} {} {} 1.0",
                    f as f64 * 0.01 + j as f64,
                    0.5,
                    2.0 + j as f64 * 0.1
                )
                .unwrap();
            }
        }
        s
    }

    #[test]
    fn msr_loads_and_subsets() {
        let dir = tempfile::tempdir().unwrap();
        for (a, s, e) in [(10, 1, 1), (11, 1, 1), (1, 2, 1), (20, 3, 2)] {
            fs::write(
                dir.path()
                    .join(format!("a{a:02}_s{s:02}_e{e:02}_skeleton3D.txt")),
                msr_file(5, 20),
            )
            .unwrap();
        }
        fs::write(dir.path().join("readme.md"), "ignored").unwrap();
        let full: Dataset<f64> = load_msr_action3d(dir.path(), &[], &[]).unwrap();
        assert_eq!(full.len(), 4);
        assert_eq!(full.category_names.len(), 20);
        let p1: Dataset<f64> = load_msr_action3d(dir.path(), &MSR_SUBSET_P1, &[]).unwrap();
        assert_eq!(p1.len(), 3);
        assert_eq!(p1.category_names[0], "Hand Clap");
        let excl: Dataset<f64> = load_msr_action3d(
            dir.path(),
            &MSR_SUBSET_P1,
            &["a20_s03_e02_skeleton3D".into()],
        )
        .unwrap();
        assert_eq!(excl.len(), 2);
        let seq = &p1.sequences[0];
        assert_eq!(seq.frames.len(), 5);
        assert_eq!(seq.frames[0].joints[1].x, 1.0);
    }

    #[test]
    fn msr_empty_directory_is_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_msr_action3d::<f64>(dir.path(), &[], &[]).is_err());
        assert!(load_msr_action3d::<f64>(&dir.path().join("nope"), &[], &[]).is_err());
    }

    #[test]
    fn msr_rejects_wrong_columns_and_partial_frames() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a01_s01_e01_skeleton.txt");
        fs::write(&p, "1 2 3\n").unwrap();
        let err = load_msr_action3d::<f64>(dir.path(), &[], &[]).unwrap_err();
        assert!(err.to_string().contains(":1:"), "{err}");
        fs::write(&p, msr_file(4, 20) + &msr_file(1, 19)).unwrap();
        let err = load_msr_action3d::<f64>(dir.path(), &[], &[]).unwrap_err();
        assert!(err.to_string().contains("19 joints"), "{err}");
    }

    fn utk_joint_file(frames: std::ops::RangeInclusive<i64>) -> String {
        let mut s = String::new();
        for f in frames {
            write!(s, "{f}").unwrap();
            for k in 0..60 {
                write!(s, " {}", (f as f64) * 0.001 + k as f64 * 0.01).unwrap();
            }
            s.push('\n');
        }
        s
    }

    #[test]
    fn utkinect_loads_ranges() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("joints")).unwrap();
        fs::write(
            dir.path().join("joints/joints_s01_e01.txt"),
            utk_joint_file(100..=140),
        )
        .unwrap();
        fs::write(
            dir.path().join("actionLabel.txt"),
            "s01_e01\nwalk: 100 110\nsitDown: 115 125\nclapHands: 130 140\n",
        )
        .unwrap();
        let d: Dataset<f64> = load_utkinect(dir.path()).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.sequences[0].frames.len(), 11);
        assert_eq!(d.sequences[2].label, 9);
        assert_eq!(d.sequences[0].frames[0].flatten().len(), 60);
    }

    #[test]
    fn utkinect_rejects_overlap_and_missing_frames() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("joints_s01_e01.txt"),
            utk_joint_file(100..=140),
        )
        .unwrap();
        fs::write(
            dir.path().join("actionLabel.txt"),
            "s01_e01\nwalk: 100 120\npush: 115 125\n",
        )
        .unwrap();
        let err = load_utkinect::<f64>(dir.path()).unwrap_err();
        assert!(err.to_string().contains("overlaps"), "{err}");
        fs::write(
            dir.path().join("actionLabel.txt"),
            "s01_e01\nwalk: 100 150\n",
        )
        .unwrap();
        let err = load_utkinect::<f64>(dir.path()).unwrap_err();
        assert!(err.to_string().contains("frame 150"), "{err}");
        fs::write(
            dir.path().join("actionLabel.txt"),
            "s01_e01\nwalk 100 150\n",
        )
        .unwrap();
        assert!(load_utkinect::<f64>(dir.path()).is_err());
    }

    fn florence_rows(video: i64, actor: i64, cat: i64, frames: usize) -> String {
        let mut s = String::new();
        for f in 0..frames {
            write!(s, "{video} {actor} {cat}").unwrap();
            for k in 0..45 {
                write!(s, " {}", f as f64 + k as f64 * 0.1).unwrap();
            }
            s.push('\n');
        }
        s
    }

    #[test]
    fn florence_groups_by_video() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("Florence_dataset_WorldCoordinates.txt");
        let text =
            florence_rows(1, 1, 1, 4) + &florence_rows(2, 1, 2, 5) + &florence_rows(4, 2, 1, 3);
        fs::write(&p, text).unwrap();
        let d: Dataset<f64> = load_florence3d(&p).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.category_names.len(), 9);
        assert_eq!(d.sequences[1].frames.len(), 5);
        assert_eq!(d.sequences[1].frames[0].flatten().len(), 45);
        assert_eq!(d.sequences[2].subject_id, 2);
    }

    #[test]
    fn florence_malformed_row_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.txt");
        let mut text = florence_rows(1, 1, 1, 4);
        text.push_str("2 1 1 0.5 0.5\n");
        fs::write(&p, text).unwrap();
        let err = load_florence3d::<f64>(&p).unwrap_err();
        assert!(err.to_string().contains(":5:"), "{err}");
    }
}
