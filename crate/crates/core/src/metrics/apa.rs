//! Affordance point accuracy: the share of predicted points that land on
//! the ground-truth target mask, macro-averaged per clutter level.

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::mask::BinaryMask;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClutterLevel {
    #[serde(rename = "LC")]
    Low,
    #[serde(rename = "MC")]
    Medium,
    #[serde(rename = "HC")]
    High,
    #[serde(rename = "UNCLASSIFIED")]
    Unclassified,
}

impl ClutterLevel {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClutterLevel::Low => "LC",
            ClutterLevel::Medium => "MC",
            ClutterLevel::High => "HC",
            ClutterLevel::Unclassified => "UNCLASSIFIED",
        }
    }
}

impl fmt::Display for ClutterLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// 1-2 objects is low clutter, 5-8 medium, 11-15 high. Counts in the gaps
/// between bands are not guessed.
pub fn clutter_level(object_count: usize) -> ClutterLevel {
    match object_count {
        1..=2 => ClutterLevel::Low,
        5..=8 => ClutterLevel::Medium,
        11..=15 => ClutterLevel::High,
        _ => ClutterLevel::Unclassified,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ApaSample {
    pub frame_id: String,
    /// `(x, y)` in pixel coordinates; fractional values are floored.
    pub points: Vec<(f64, f64)>,
    pub target_mask: BinaryMask,
    pub clutter_level: ClutterLevel,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleScore {
    pub inside: usize,
    pub total: usize,
    /// Points outside the image; they count as misses.
    pub out_of_bounds: usize,
}

impl SampleScore {
    pub fn fraction(&self) -> f64 {
        self.inside as f64 / self.total as f64
    }
}

fn point_inside(mask: &BinaryMask, (x, y): (f64, f64)) -> Option<bool> {
    if !(x.is_finite() && y.is_finite()) {
        return None;
    }
    let (px, py) = (x.floor(), y.floor());
    if px < 0.0 || py < 0.0 || px >= mask.width() as f64 || py >= mask.height() as f64 {
        return None;
    }
    Some(mask.get(px as u32, py as u32))
}

/// `None` for a sample with no points.
pub fn score_sample(sample: &ApaSample) -> Option<SampleScore> {
    if sample.points.is_empty() {
        return None;
    }
    let mut score = SampleScore {
        inside: 0,
        total: sample.points.len(),
        out_of_bounds: 0,
    };
    for &p in &sample.points {
        match point_inside(&sample.target_mask, p) {
            Some(true) => score.inside += 1,
            Some(false) => {}
            None => score.out_of_bounds += 1,
        }
    }
    Some(score)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ApaWarningKind {
    NoPoints,
    EmptyMask,
    PointsOutOfBounds(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ApaWarning {
    pub frame_id: String,
    pub kind: ApaWarningKind,
}

impl fmt::Display for ApaWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ApaWarningKind::NoPoints => write!(f, "{}: no predicted points, sample excluded", self.frame_id),
            ApaWarningKind::EmptyMask => write!(f, "{}: empty target mask, sample excluded", self.frame_id),
            ApaWarningKind::PointsOutOfBounds(n) => {
                write!(f, "{}: {n} point(s) outside the image, counted as misses", self.frame_id)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelApa {
    /// Mean of per-sample fractions, in percent.
    pub percent: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ApaReport {
    pub levels: BTreeMap<ClutterLevel, LevelApa>,
    pub warnings: Vec<ApaWarning>,
}

impl ApaReport {
    pub fn percent(&self, level: ClutterLevel) -> Option<f64> {
        self.levels.get(&level).map(|l| l.percent)
    }
}

/// Per clutter level, the mean over samples of the inside fraction, x100.
pub fn apa(samples: &[ApaSample]) -> ApaReport {
    let mut report = ApaReport::default();
    let mut sums: BTreeMap<ClutterLevel, (f64, usize)> = BTreeMap::new();
    for sample in samples {
        let warn = |kind| ApaWarning {
            frame_id: sample.frame_id.clone(),
            kind,
        };
        if sample.target_mask.is_empty() {
            report.warnings.push(warn(ApaWarningKind::EmptyMask));
            continue;
        }
        let Some(score) = score_sample(sample) else {
            report.warnings.push(warn(ApaWarningKind::NoPoints));
            continue;
        };
        if score.out_of_bounds > 0 {
            report
                .warnings
                .push(warn(ApaWarningKind::PointsOutOfBounds(score.out_of_bounds)));
        }
        let entry = sums.entry(sample.clutter_level).or_default();
        entry.0 += score.fraction();
        entry.1 += 1;
    }
    report.levels = sums
        .into_iter()
        .map(|(level, (sum, n))| {
            (
                level,
                LevelApa {
                    percent: 100.0 * sum / n as f64,
                    samples: n,
                },
            )
        })
        .collect();
    report
}

/// One line of the JSONL input. `mask_path` is relative to the JSONL file.
/// Without `clutter_level`, `object_count` decides the band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApaRecord {
    pub frame_id: String,
    pub points: Vec<[f64; 2]>,
    pub mask_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clutter_level: Option<ClutterLevel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_count: Option<usize>,
}

impl ApaRecord {
    pub fn level(&self) -> ClutterLevel {
        self.clutter_level
            .or(self.object_count.map(clutter_level))
            .unwrap_or(ClutterLevel::Unclassified)
    }
}

pub fn load_apa_jsonl(path: &Path) -> Result<Vec<ApaSample>, MetricError> {
    let input_err = |message: String| MetricError::Input {
        path: path.to_path_buf(),
        message,
    };
    let file = std::fs::File::open(path).map_err(|e| input_err(e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut samples = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| input_err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ApaRecord =
            serde_json::from_str(&line).map_err(|e| input_err(format!("line {}: {e}", i + 1)))?;
        let mask_path = base.join(&record.mask_path);
        let mask = BinaryMask::load_png(&mask_path)
            .map_err(|e| input_err(format!("line {}: {}: {e}", i + 1, mask_path.display())))?;
        samples.push(ApaSample {
            clutter_level: record.level(),
            frame_id: record.frame_id,
            points: record.points.into_iter().map(|[x, y]| (x, y)).collect(),
            target_mask: mask,
        });
    }
    Ok(samples)
}
