//! Scene decomposition: detect and segment objects, pick the target named
//! by the instruction, and set aside objects too large to edit cleanly.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{BackendError, Detector, Segmenter};
use crate::dataset::DemonstrationFrame;
use crate::mask::{BBox, BinaryMask};

/// Largest allowed bbox side, as a fraction of the image side.
pub const LARGE_OBJECT_THRESHOLD: f64 = 0.40;

/// How far a segmentation mask may spill past its detection box.
pub const MASK_BOX_TOLERANCE_PX: u32 = 2;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("backend failure on frame {frame_id}: {source}")]
    Backend {
        frame_id: String,
        #[source]
        source: BackendError,
    },
    #[error("no object matches target phrase `{phrase}`")]
    TargetNotFound { phrase: String },
    #[error("size threshold must be in (0, 1], got {0}")]
    InvalidThreshold(f64),
}

impl SceneError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, SceneError::Backend { source, .. } if source.is_retriable() || matches!(source, BackendError::Exhausted { .. }))
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectedObject {
    pub object_id: u32,
    pub label: String,
    pub bbox: BBox,
    pub detection_confidence: f64,
    /// Set when the detector's box reached past the image and was clipped.
    #[serde(default, skip_serializing_if = "is_false")]
    pub clipped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentedObject {
    pub base: DetectedObject,
    pub mask: BinaryMask,
    pub segmentation_confidence: f64,
}

impl SegmentedObject {
    pub fn id(&self) -> u32 {
        self.base.object_id
    }

    pub fn label(&self) -> &str {
        &self.base.label
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    EmptyMask,
    MaskOutsideBox,
    WrongDimensions,
}

/// A detection that did not become a [`SegmentedObject`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DroppedObject {
    pub object_id: u32,
    pub label: String,
    pub reason: DropReason,
}

#[derive(Clone, Debug, Default)]
pub struct ParsedObjects {
    pub objects: Vec<SegmentedObject>,
    pub dropped: Vec<DroppedObject>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub frame_id: String,
    pub target: SegmentedObject,
    pub candidates: Vec<SegmentedObject>,
    pub excluded_large: Vec<SegmentedObject>,
    /// `(height, width)`.
    pub image_size: (u32, u32),
    #[serde(default)]
    pub dropped: Vec<DroppedObject>,
}

impl SceneGraph {
    pub fn candidate(&self, object_id: u32) -> Option<&SegmentedObject> {
        self.candidates.iter().find(|c| c.id() == object_id)
    }

    pub fn candidate_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.candidates.iter().map(SegmentedObject::id).collect();
        ids.sort_unstable();
        ids
    }

    pub fn object_count(&self) -> usize {
        1 + self.candidates.len() + self.excluded_large.len()
    }

    /// Checks the partition and size-filter invariants.
    pub fn validate(&self) -> Result<(), String> {
        let mut seen = BTreeSet::new();
        seen.insert(self.target.id());
        for o in self.candidates.iter().chain(&self.excluded_large) {
            if !seen.insert(o.id()) {
                return Err(format!("object {} appears twice", o.id()));
            }
        }
        for c in &self.candidates {
            if is_large(c.base.bbox, self.image_size, LARGE_OBJECT_THRESHOLD) {
                return Err(format!("candidate {} exceeds the size filter", c.id()));
            }
        }
        Ok(())
    }
}

/// Detect every object, then segment all boxes in one call. Detections whose
/// mask comes back empty, mis-sized, or spilling more than
/// [`MASK_BOX_TOLERANCE_PX`] past the box are dropped and reported.
pub fn parse_objects(
    frame: &DemonstrationFrame,
    detector: &dyn Detector,
    segmenter: &dyn Segmenter,
) -> Result<ParsedObjects, SceneError> {
    let backend_err = |source| SceneError::Backend {
        frame_id: frame.frame_id.clone(),
        source,
    };
    let detections = detector
        .detect(&frame.frame_id, &frame.image, None)
        .map_err(backend_err)?;
    if detections.is_empty() {
        return Ok(ParsedObjects::default());
    }
    let boxes: Vec<BBox> = detections.iter().map(|d| d.bbox).collect();
    let masks = segmenter.segment(&frame.image, &boxes).map_err(backend_err)?;
    if masks.len() != detections.len() {
        return Err(backend_err(BackendError::Protocol(format!(
            "segmenter returned {} masks for {} boxes",
            masks.len(),
            detections.len()
        ))));
    }

    let dims = (frame.image.height(), frame.image.width());
    let mut parsed = ParsedObjects::default();
    for (det, (mask, confidence)) in detections.into_iter().zip(masks) {
        let reason = if mask.dims() != dims {
            Some(DropReason::WrongDimensions)
        } else if mask.is_empty() {
            Some(DropReason::EmptyMask)
        } else if !mask.within(det.bbox.expand(MASK_BOX_TOLERANCE_PX)) {
            Some(DropReason::MaskOutsideBox)
        } else {
            None
        };
        match reason {
            Some(reason) => {
                log::warn!(
                    "frame {}: dropping object {} `{}`: {:?}",
                    frame.frame_id,
                    det.object_id,
                    det.label,
                    reason
                );
                parsed.dropped.push(DroppedObject {
                    object_id: det.object_id,
                    label: det.label,
                    reason,
                });
            }
            None => parsed.objects.push(SegmentedObject {
                base: det,
                mask,
                segmentation_confidence: confidence.clamp(0.0, 1.0),
            }),
        }
    }
    Ok(parsed)
}

/// Words that carry no object identity in a manipulation instruction.
const INSTRUCTION_STOPWORDS: &[&str] = &[
    "a", "an", "the", "this", "that", "it", "its", "of", "to", "on", "onto", "in", "into", "at",
    "from", "with", "and", "up", "down", "off", "over", "under", "near", "next", "close",
    "closer", "top", "pick", "grab", "grasp", "lift", "take", "put", "place", "move", "push",
    "pull", "stack", "set", "please", "then",
];

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Target phrase tokens: the explicit phrase when given, otherwise the
/// instruction with verbs, articles and prepositions removed.
pub fn target_tokens(instruction: &str, target_phrase: Option<&str>) -> BTreeSet<String> {
    match target_phrase.filter(|p| !p.trim().is_empty()) {
        Some(phrase) => tokenize(phrase).into_iter().collect(),
        None => tokenize(instruction)
            .into_iter()
            .filter(|t| !INSTRUCTION_STOPWORDS.contains(&t.as_str()))
            .collect(),
    }
}

/// Pick the object whose label shares the most tokens with the target
/// phrase. Ties go to the higher detection confidence, then the lower id.
pub fn identify_target(
    objects: &[SegmentedObject],
    instruction: &str,
    target_phrase: Option<&str>,
) -> Result<u32, SceneError> {
    let phrase = target_tokens(instruction, target_phrase);
    let not_found = || SceneError::TargetNotFound {
        phrase: target_phrase.unwrap_or(instruction).to_string(),
    };
    objects
        .iter()
        .filter_map(|o| {
            let label: BTreeSet<String> = tokenize(o.label()).into_iter().collect();
            let overlap = label.intersection(&phrase).count();
            (overlap >= 1).then_some((overlap, o))
        })
        .max_by(|(oa, a), (ob, b)| {
            oa.cmp(ob)
                .then(
                    a.base
                        .detection_confidence
                        .total_cmp(&b.base.detection_confidence),
                )
                .then(b.id().cmp(&a.id()))
        })
        .map(|(_, o)| o.id())
        .ok_or_else(not_found)
}

fn is_large(bbox: BBox, image_size: (u32, u32), threshold: f64) -> bool {
    let (height, width) = image_size;
    bbox.w as f64 / width as f64 > threshold || bbox.h as f64 / height as f64 > threshold
}

/// Split objects into `(kept, excluded)`; excluded iff the box is wider or
/// taller than `threshold` of the image side. Input order is preserved.
pub fn filter_large_objects(
    objects: Vec<SegmentedObject>,
    image_size: (u32, u32),
    threshold: f64,
) -> Result<(Vec<SegmentedObject>, Vec<SegmentedObject>), SceneError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(SceneError::InvalidThreshold(threshold));
    }
    Ok(objects
        .into_iter()
        .partition(|o| !is_large(o.base.bbox, image_size, threshold)))
}

/// Identify the target first, then size-filter only the remaining objects,
/// so an oversized target is still the target.
pub fn build_scene_graph(
    frame: &DemonstrationFrame,
    detector: &dyn Detector,
    segmenter: &dyn Segmenter,
) -> Result<SceneGraph, SceneError> {
    let parsed = parse_objects(frame, detector, segmenter)?;
    let target_id = identify_target(
        &parsed.objects,
        &frame.instruction,
        frame.target_phrase.as_deref(),
    )?;
    let image_size = (frame.image.height(), frame.image.width());
    let (targets, rest): (Vec<_>, Vec<_>) =
        parsed.objects.into_iter().partition(|o| o.id() == target_id);
    let target = targets.into_iter().next().expect("identified target is present");
    let (candidates, excluded_large) = filter_large_objects(rest, image_size, LARGE_OBJECT_THRESHOLD)?;
    Ok(SceneGraph {
        frame_id: frame.frame_id.clone(),
        target,
        candidates,
        excluded_large,
        image_size,
        dropped: parsed.dropped,
    })
}
