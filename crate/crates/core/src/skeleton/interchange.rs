//! Versioned text interchange format for datasets.
//!
//! ```text
//! # comment
//! version=1 joints=<n> layout=<name> categories=<comma list>
//! seq label=<k> subject=<s> event=<e> tag=<dataset tag>
//! <3n space-separated reals, one line per frame>
//! ```
//!
//! `layout` and `tag` are optional on read. `categories` must be the last
//! header key; names may contain spaces but not commas.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use super::{check_min_frames, DataError, Dataset, JointMap, SkeletonFrame, SkeletonSequence};
use crate::scalar::Real;

pub const INTERCHANGE_VERSION: u32 = 1;

pub fn write_interchange<T: Real>(dataset: &Dataset<T>, path: &Path) -> Result<(), DataError> {
    let text = to_interchange_string(dataset)?;
    fs::write(path, text).map_err(|e| DataError::io(path, e))
}

pub fn to_interchange_string<T: Real>(dataset: &Dataset<T>) -> Result<String, DataError> {
    let first = dataset
        .sequences
        .first()
        .ok_or_else(|| DataError::Invalid("cannot serialize an empty dataset".into()))?;
    if let Some(bad) = dataset
        .category_names
        .iter()
        .find(|c| c.contains(',') || c.contains('\n'))
    {
        return Err(DataError::Invalid(format!(
            "category name {bad:?} contains a comma or newline"
        )));
    }
    let map = &first.joint_map;
    let mut out = String::new();
    out.push_str("# gridact skeleton interchange\n");
    writeln!(
        out,
        "version={INTERCHANGE_VERSION} joints={} layout={} categories={}",
        map.joint_count(),
        map.name,
        dataset.category_names.join(",")
    )
    .unwrap();
    for s in &dataset.sequences {
        if s.joint_map.name != map.name {
            return Err(DataError::Invalid(
                "all sequences must share one joint layout".into(),
            ));
        }
        let tag = if s.dataset_tag.is_empty() {
            "-"
        } else {
            s.dataset_tag.as_str()
        };
        if tag.contains(char::is_whitespace) {
            return Err(DataError::Invalid(format!(
                "dataset tag {tag:?} contains whitespace"
            )));
        }
        writeln!(
            out,
            "seq label={} subject={} event={} tag={tag}",
            s.label, s.subject_id, s.event_id
        )
        .unwrap();
        for f in &s.frames {
            let mut first = true;
            for j in &f.joints {
                for v in j.to_array() {
                    if !first {
                        out.push(' ');
                    }
                    first = false;
                    write!(out, "{v}").unwrap();
                }
            }
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn read_interchange<T: Real>(path: &Path) -> Result<Dataset<T>, DataError> {
    let text = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    parse_interchange(&text, path)
}

fn key_values(line: &str) -> impl Iterator<Item = (&str, &str)> {
    line.split_whitespace().filter_map(|kv| kv.split_once('='))
}

pub(crate) fn parse_interchange<T: Real>(text: &str, path: &Path) -> Result<Dataset<T>, DataError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines
        .next()
        .ok_or_else(|| DataError::parse(path, 1, "missing header line"))?;
    let (head, categories) = header
        .split_once("categories=")
        .ok_or_else(|| DataError::parse(path, hline, "header lacks categories="))?;
    let mut version = None;
    let mut joints = None;
    let mut layout = None;
    for (k, v) in key_values(head) {
        match k {
            "version" => version = v.parse::<u32>().ok(),
            "joints" => joints = v.parse::<usize>().ok(),
            "layout" => layout = Some(v.to_string()),
            other => {
                return Err(DataError::parse(
                    path,
                    hline,
                    format!("unknown header key {other:?}"),
                ))
            }
        }
    }
    match version {
        Some(INTERCHANGE_VERSION) => {}
        Some(v) => {
            return Err(DataError::parse(
                path,
                hline,
                format!("unsupported interchange version {v}, expected {INTERCHANGE_VERSION}"),
            ))
        }
        None => {
            return Err(DataError::parse(
                path,
                hline,
                "header lacks a valid version=",
            ))
        }
    }
    let joints =
        joints.ok_or_else(|| DataError::parse(path, hline, "header lacks a valid joints="))?;
    let map = match layout {
        Some(name) => JointMap::by_name(&name)
            .ok_or_else(|| DataError::parse(path, hline, format!("unknown layout {name:?}")))?,
        None => JointMap::for_joint_count(joints).ok_or_else(|| {
            DataError::parse(
                path,
                hline,
                format!("no default layout for {joints} joints"),
            )
        })?,
    };
    if map.joint_count() != joints {
        return Err(DataError::parse(
            path,
            hline,
            format!(
                "layout {} has {} joints, header says {joints}",
                map.name,
                map.joint_count()
            ),
        ));
    }
    let map = Arc::new(map);
    let category_names: Vec<String> = categories
        .split(',')
        .map(|c| c.trim().to_string())
        .collect();

    let mut sequences: Vec<SkeletonSequence<T>> = Vec::new();
    let mut seq_line = 0;
    for (lineno, line) in lines {
        if let Some(rest) = line.strip_prefix("seq") {
            if let Some(prev) = sequences.last() {
                check_min_frames(prev.frames.len(), &format!("{}:{seq_line}", path.display()))?;
            }
            seq_line = lineno;
            let mut label: Option<usize> = None;
            let mut subject: Option<u32> = None;
            let mut event: Option<u32> = None;
            let mut tag = "interchange".to_string();
            for (k, v) in key_values(rest) {
                match k {
                    "label" => label = v.parse().ok(),
                    "subject" => subject = v.parse().ok(),
                    "event" => event = v.parse().ok(),
                    "tag" => {
                        tag = if v == "-" {
                            String::new()
                        } else {
                            v.to_string()
                        }
                    }
                    other => {
                        return Err(DataError::parse(
                            path,
                            lineno,
                            format!("unknown sequence key {other:?}"),
                        ))
                    }
                }
            }
            let missing =
                |what: &str| DataError::parse(path, lineno, format!("missing or invalid {what}="));
            sequences.push(SkeletonSequence {
                frames: Vec::new(),
                label: label.ok_or_else(|| missing("label"))?,
                subject_id: subject.ok_or_else(|| missing("subject"))?,
                event_id: event.ok_or_else(|| missing("event"))?,
                dataset_tag: tag,
                joint_map: map.clone(),
            });
            continue;
        }
        let seq = sequences.last_mut().ok_or_else(|| {
            DataError::parse(path, lineno, "frame data before the first seq line")
        })?;
        let values: Vec<T> = line
            .split_whitespace()
            .map(|f| {
                f.parse::<T>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        DataError::parse(path, lineno, format!("invalid coordinate {f:?}"))
                    })
            })
            .collect::<Result<_, _>>()?;
        if values.len() != 3 * joints {
            return Err(DataError::parse(
                path,
                lineno,
                format!("frame has {} values, expected {}", values.len(), 3 * joints),
            ));
        }
        seq.frames.push(SkeletonFrame::from_flat(&values));
    }
    if let Some(prev) = sequences.last() {
        check_min_frames(prev.frames.len(), &format!("{}:{seq_line}", path.display()))?;
    }
    Dataset::new(sequences, category_names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::{generate_synthetic, SyntheticSpec};

    #[test]
    fn round_trip_is_bitwise() {
        let d: Dataset<f64> = generate_synthetic(&SyntheticSpec {
            n_classes: 3,
            n_per_class: 2,
            n_joints: 15,
            frame_range: (10, 12),
            noise_sigma: 0.02,
            seed: 3,
        })
        .unwrap();
        let text = to_interchange_string(&d).unwrap();
        let back: Dataset<f64> = parse_interchange(&text, Path::new("mem")).unwrap();
        assert_eq!(back, d);
        for (a, b) in d.sequences.iter().zip(&back.sequences) {
            for (fa, fb) in a.frames.iter().zip(&b.frames) {
                for (x, y) in fa.flatten().iter().zip(fb.flatten()) {
                    assert_eq!(x.to_bits(), y.to_bits());
                }
            }
        }
    }

    #[test]
    fn rejects_wrong_version_and_width() {
        let p = Path::new("mem");
        let bad_version = "version=2 joints=15 categories=a,b\n";
        assert!(parse_interchange::<f64>(bad_version, p)
            .unwrap_err()
            .to_string()
            .contains("version"));
        let row = vec!["0.5"; 44].join(" ");
        let bad_width =
            format!("version=1 joints=15 categories=a,b\nseq label=0 subject=1 event=1\n{row}\n");
        let err = parse_interchange::<f64>(&bad_width, p).unwrap_err();
        assert!(err.to_string().contains("mem:3"), "{err}");
    }

    #[test]
    fn comments_are_ignored_and_defaults_apply() {
        let row = vec!["0.25"; 45].join(" ");
        let text = format!(
            "# hello\nversion=1 joints=15 categories=Wave,Bow\n# frames follow\nseq label=1 subject=2 event=3\n{row}\n{row}\n{row}\n"
        );
        let d: Dataset<f32> = parse_interchange(&text, Path::new("mem")).unwrap();
        assert_eq!(d.sequences[0].label, 1);
        assert_eq!(d.sequences[0].joint_map.name, "florence15");
        assert_eq!(d.category_names, vec!["Wave", "Bow"]);
    }
}
