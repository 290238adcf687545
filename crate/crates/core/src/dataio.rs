//! Annotation records, finger labels, and leakage-free partitioning.
//!
//! Annotation files are JSON Lines: one record object per line, angles in
//! degrees. Blank lines are ignored.
//!
//! ```text
//! {"image":"s001.pgm","width":640,"height":480,"hand":"left","provenance":"bonafide",
//!  "source_id":"s001","augment_angle_deg":0.0,
//!  "fingers":[{"label":"Left-Index","cx":120.0,"cy":80.0,"w":40.0,"h":60.0,"theta_deg":10.0}]}
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::OrientedBox;

/// The ten finger positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FingerLabel {
    #[serde(rename = "Left-Index")]
    LeftIndex,
    #[serde(rename = "Left-Middle")]
    LeftMiddle,
    #[serde(rename = "Left-Ring")]
    LeftRing,
    #[serde(rename = "Left-Little")]
    LeftLittle,
    #[serde(rename = "Left-Thumb")]
    LeftThumb,
    #[serde(rename = "Right-Index")]
    RightIndex,
    #[serde(rename = "Right-Middle")]
    RightMiddle,
    #[serde(rename = "Right-Ring")]
    RightRing,
    #[serde(rename = "Right-Little")]
    RightLittle,
    #[serde(rename = "Right-Thumb")]
    RightThumb,
}

impl FingerLabel {
    pub const ALL: [FingerLabel; 10] = [
        FingerLabel::LeftIndex,
        FingerLabel::LeftMiddle,
        FingerLabel::LeftRing,
        FingerLabel::LeftLittle,
        FingerLabel::LeftThumb,
        FingerLabel::RightIndex,
        FingerLabel::RightMiddle,
        FingerLabel::RightRing,
        FingerLabel::RightLittle,
        FingerLabel::RightThumb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FingerLabel::LeftIndex => "Left-Index",
            FingerLabel::LeftMiddle => "Left-Middle",
            FingerLabel::LeftRing => "Left-Ring",
            FingerLabel::LeftLittle => "Left-Little",
            FingerLabel::LeftThumb => "Left-Thumb",
            FingerLabel::RightIndex => "Right-Index",
            FingerLabel::RightMiddle => "Right-Middle",
            FingerLabel::RightRing => "Right-Ring",
            FingerLabel::RightLittle => "Right-Little",
            FingerLabel::RightThumb => "Right-Thumb",
        }
    }

    pub fn hand(self) -> Hand {
        if (self as usize) < 5 {
            Hand::Left
        } else {
            Hand::Right
        }
    }
}

impl fmt::Display for FingerLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for FingerLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FingerLabel::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown finger label `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hand {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Bonafide,
    Augmented,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Finger {
    pub label: FingerLabel,
    pub bbox: OrientedBox,
}

/// One fingerphoto with its labeled fingertip boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedFingerphoto {
    /// Relative path of the image; also the record identifier.
    pub image: String,
    pub width: u32,
    pub height: u32,
    pub hand: Hand,
    pub fingers: Vec<Finger>,
    pub provenance: Provenance,
    /// Identifier of the originating bonafide image.
    pub source_id: String,
    /// Degrees; zero for bonafide records.
    pub augment_angle: f64,
}

impl AnnotatedFingerphoto {
    pub fn id(&self) -> &str {
        &self.image
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| Error::Validation {
            record: self.image.clone(),
            message,
        };
        if self.image.is_empty() {
            return Err(fail("empty image path".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(fail(format!(
                "image dimensions must be positive, got {}x{}",
                self.width, self.height
            )));
        }
        if self.fingers.is_empty() || self.fingers.len() > 5 {
            return Err(fail(format!(
                "expected 1 to 5 fingers, got {}",
                self.fingers.len()
            )));
        }
        let mut seen = HashSet::new();
        for f in &self.fingers {
            if !seen.insert(f.label) {
                return Err(fail(format!("duplicate label {}", f.label)));
            }
            if f.label.hand() != self.hand {
                return Err(fail(format!("label {} on a {:?} hand", f.label, self.hand)));
            }
        }
        if !self.augment_angle.is_finite() {
            return Err(fail("augment angle is not finite".into()));
        }
        if self.provenance == Provenance::Bonafide && self.augment_angle != 0.0 {
            return Err(fail(format!(
                "bonafide record with augment angle {}",
                self.augment_angle
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FingerLine {
    label: String,
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
    theta_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    image: String,
    width: u32,
    height: u32,
    hand: Hand,
    provenance: Provenance,
    source_id: String,
    augment_angle_deg: f64,
    fingers: Vec<FingerLine>,
}

impl RecordLine {
    fn into_record(self) -> Result<AnnotatedFingerphoto> {
        let image = self.image;
        let fail = |message: String| Error::Validation {
            record: image.clone(),
            message,
        };
        let fingers = self
            .fingers
            .into_iter()
            .map(|f| {
                let label: FingerLabel = f
                    .label
                    .parse()
                    .map_err(|_| fail(format!("unknown label `{}`", f.label)))?;
                let bbox = OrientedBox::from_degrees(f.cx, f.cy, f.w, f.h, f.theta_deg)
                    .map_err(|e| fail(format!("{label}: {e}")))?;
                Ok(Finger { label, bbox })
            })
            .collect::<Result<Vec<_>>>()?;
        let record = AnnotatedFingerphoto {
            image: image.clone(),
            width: self.width,
            height: self.height,
            hand: self.hand,
            fingers,
            provenance: self.provenance,
            source_id: self.source_id,
            augment_angle: self.augment_angle_deg,
        };
        record.validate()?;
        Ok(record)
    }

    fn from_record(r: &AnnotatedFingerphoto) -> Self {
        RecordLine {
            image: r.image.clone(),
            width: r.width,
            height: r.height,
            hand: r.hand,
            provenance: r.provenance,
            source_id: r.source_id.clone(),
            augment_angle_deg: r.augment_angle,
            fingers: r
                .fingers
                .iter()
                .map(|f| FingerLine {
                    label: f.label.name().to_string(),
                    cx: f.bbox.cx(),
                    cy: f.bbox.cy(),
                    w: f.bbox.w(),
                    h: f.bbox.h(),
                    theta_deg: f.bbox.theta_deg(),
                })
                .collect(),
        }
    }
}

/// Parses an annotation document held in memory.
pub fn parse_annotations_str(text: &str) -> Result<Vec<AnnotatedFingerphoto>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: RecordLine = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(raw.into_record()?);
    }
    Ok(out)
}

pub fn parse_annotations(path: &Path) -> Result<Vec<AnnotatedFingerphoto>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotations_str(&text)
}

pub fn serialize_annotations(records: &[AnnotatedFingerphoto]) -> String {
    let mut out = String::new();
    for r in records {
        // RecordLine holds only strings, integers and finite floats.
        out.push_str(
            &serde_json::to_string(&RecordLine::from_record(r)).expect("record serializes"),
        );
        out.push('\n');
    }
    out
}

pub fn write_annotations(path: &Path, records: &[AnnotatedFingerphoto]) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(serialize_annotations(records).as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// Train / validation / test record identifiers.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    /// Indices into the input record list.
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

pub const DEFAULT_SPLIT_RATIOS: [f64; 3] = [0.8, 0.1, 0.1];

pub const DEFAULT_FOLDS: usize = 10;

/// Record indices grouped by source id, groups shuffled with `seed`.
fn shuffled_groups(records: &[AnnotatedFingerphoto], seed: u64) -> Vec<Vec<usize>> {
    let mut by_source: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_source.entry(r.source_id.as_str()).or_default().push(i);
    }
    let mut groups: Vec<Vec<usize>> = by_source.into_values().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    groups.shuffle(&mut rng);
    groups
}

/// Largest-remainder apportionment of `total` items, every part at least one.
fn apportion(total: usize, ratios: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = ratios.iter().map(|r| r * total as f64).collect();
    // The nudge keeps products like 0.8 · 2150 = 1719.9999… on the right integer.
    let mut sizes: Vec<usize> = exact.iter().map(|e| (e + 1e-9).floor() as usize).collect();
    let mut remaining = total - sizes.iter().sum::<usize>();
    let mut by_remainder: Vec<usize> = (0..ratios.len()).collect();
    by_remainder.sort_by(|&a, &b| {
        let ra = exact[a] - sizes[a] as f64;
        let rb = exact[b] - sizes[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in by_remainder.iter().cycle() {
        if remaining == 0 {
            break;
        }
        sizes[i] += 1;
        remaining -= 1;
    }
    while let Some(empty) = sizes.iter().position(|&s| s == 0) {
        let largest = (0..sizes.len())
            .max_by_key(|&i| (sizes[i], usize::MAX - i))
            .unwrap_or(0);
        sizes[largest] -= 1;
        sizes[empty] += 1;
    }
    sizes
}

/// Splits records into train/validation/test at the source-image level.
///
/// All records sharing a `source_id` (a bonafide image and its rotations)
/// land in the same partition.
pub fn split_dataset(
    records: &[AnnotatedFingerphoto],
    ratios: [f64; 3],
    seed: u64,
) -> Result<DatasetSplit> {
    if ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::invalid(format!(
            "split ratios must be positive, got {ratios:?}"
        )));
    }
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "split ratios must sum to 1, got {sum}"
        )));
    }
    let groups = shuffled_groups(records, seed);
    if groups.len() < 3 {
        return Err(Error::invalid(format!(
            "need at least 3 source groups to split, got {}",
            groups.len()
        )));
    }
    let sizes = apportion(groups.len(), &ratios);

    let ids = |gs: &[Vec<usize>]| -> Vec<String> {
        gs.iter()
            .flatten()
            .map(|&i| records[i].image.clone())
            .collect()
    };
    let (train, rest) = groups.split_at(sizes[0]);
    let (validation, test) = rest.split_at(sizes[1]);
    Ok(DatasetSplit {
        train: ids(train),
        validation: ids(validation),
        test: ids(test),
    })
}

/// Deals shuffled source groups round-robin into `k` folds.
pub fn kfold(records: &[AnnotatedFingerphoto], k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::invalid(format!("k-fold needs k >= 2, got {k}")));
    }
    let groups = shuffled_groups(records, seed);
    if groups.len() < k {
        return Err(Error::invalid(format!(
            "need at least {k} source groups for {k} folds, got {}",
            groups.len()
        )));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (g, group) in groups.iter().enumerate() {
        members[g % k].extend(group);
    }
    Ok((0..k)
        .map(|i| Fold {
            test: members[i].clone(),
            train: members
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .flat_map(|(_, m)| m.iter().copied())
                .collect(),
        })
        .collect())
}
