//! Model backend interfaces.
//!
//! Every learned component (detection, segmentation, inpainting, object
//! suggestion, feature extraction) sits behind one of the traits below.
//! [`stubs`] provides deterministic offline implementations and [`remote`]
//! a blocking HTTP client for the JSON protocol described in [`wire`].

pub mod remote;
pub mod stubs;
pub mod wire;

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mask::{BBox, BinaryMask};
use crate::scene::DetectedObject;

/// Implementation id used by every HTTP-backed client.
pub const REMOTE_IMPLEMENTATION_ID: &str = "remote-http";

#[derive(Debug, Error)]
pub enum BackendError {
    /// Transient failure (5xx, timeout, connection reset). Safe to retry.
    #[error("retriable backend failure: {0}")]
    Retriable(String),
    /// Request rejected (4xx) or a stub could not serve it.
    #[error("backend rejected request ({code}): {message}")]
    Permanent { code: String, message: String },
    #[error("backend still failing after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("malformed backend response: {0}")]
    Protocol(String),
    #[error("backend io: {0}")]
    Io(#[from] std::io::Error),
}

impl BackendError {
    pub fn permanent(code: &str, message: impl Into<String>) -> Self {
        BackendError::Permanent {
            code: code.to_string(),
            message: message.into(),
        }
    }

    pub fn is_retriable(&self) -> bool {
        matches!(self, BackendError::Retriable(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Detector,
    Segmenter,
    MaskInpainter,
    PromptedInpainter,
    Suggester,
    FeatureExtractor,
}

impl BackendKind {
    pub const ALL: [BackendKind; 6] = [
        BackendKind::Detector,
        BackendKind::Segmenter,
        BackendKind::MaskInpainter,
        BackendKind::PromptedInpainter,
        BackendKind::Suggester,
        BackendKind::FeatureExtractor,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BackendKind::Detector => "detector",
            BackendKind::Segmenter => "segmenter",
            BackendKind::MaskInpainter => "mask_inpainter",
            BackendKind::PromptedInpainter => "prompted_inpainter",
            BackendKind::Suggester => "suggester",
            BackendKind::FeatureExtractor => "feature_extractor",
        }
    }
}

/// Identifies a backend implementation in manifests.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub kind: BackendKind,
    pub implementation_id: String,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
}

impl BackendDescriptor {
    pub fn local(kind: BackendKind, implementation_id: &str, version: &str) -> Self {
        Self {
            kind,
            implementation_id: implementation_id.to_string(),
            version: version.to_string(),
            endpoint: None,
        }
    }

    pub fn is_remote(&self) -> bool {
        self.implementation_id == REMOTE_IMPLEMENTATION_ID
    }

    /// An endpoint is required for remote implementations and forbidden
    /// for local ones.
    pub fn validate(&self) -> Result<(), String> {
        match (self.is_remote(), &self.endpoint) {
            (true, None) => Err(format!("{} backend is remote but has no endpoint", self.kind.as_str())),
            (false, Some(e)) => Err(format!(
                "{} backend `{}` is local but names endpoint {e}",
                self.kind.as_str(),
                self.implementation_id
            )),
            _ => Ok(()),
        }
    }
}

/// Coarse object size, used to keep suggested replacements comparable to
/// the object they replace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeClass {
    Small,
    Medium,
    Large,
}

impl SizeClass {
    /// Box area below this fraction of the image is small.
    pub const SMALL_MAX_FRACTION: f64 = 0.01;
    /// Box area below this fraction of the image (and not small) is medium.
    pub const MEDIUM_MAX_FRACTION: f64 = 0.06;

    pub fn of_bbox(bbox: BBox, image_size: (u32, u32)) -> SizeClass {
        let total = image_size.0 as f64 * image_size.1 as f64;
        let fraction = bbox.area() as f64 / total;
        if fraction < Self::SMALL_MAX_FRACTION {
            SizeClass::Small
        } else if fraction < Self::MEDIUM_MAX_FRACTION {
            SizeClass::Medium
        } else {
            SizeClass::Large
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    pub name: String,
    pub description: String,
    pub size_class: SizeClass,
}

pub trait Detector: Send + Sync {
    fn descriptor(&self) -> BackendDescriptor;

    /// `frame_id` identifies the frame for annotation-backed detectors and
    /// error reporting; model backends see only the image and prompt.
    fn detect(
        &self,
        frame_id: &str,
        image: &RgbImage,
        prompt: Option<&str>,
    ) -> Result<Vec<DetectedObject>, BackendError>;
}

pub trait Segmenter: Send + Sync {
    fn descriptor(&self) -> BackendDescriptor;

    /// One `(mask, confidence)` per box, in box order.
    fn segment(&self, image: &RgbImage, boxes: &[BBox])
        -> Result<Vec<(BinaryMask, f64)>, BackendError>;
}

pub trait MaskInpainter: Send + Sync {
    fn descriptor(&self) -> BackendDescriptor;

    /// Output has the input dimensions and is byte-identical wherever the
    /// mask is unset.
    fn inpaint(&self, image: &RgbImage, mask: &BinaryMask) -> Result<RgbImage, BackendError>;
}

pub trait PromptedInpainter: Send + Sync {
    fn descriptor(&self) -> BackendDescriptor;

    fn inpaint(
        &self,
        image: &RgbImage,
        mask: &BinaryMask,
        prompt: &str,
    ) -> Result<RgbImage, BackendError>;
}

pub trait ObjectSuggester: Send + Sync {
    fn descriptor(&self) -> BackendDescriptor;

    fn suggest(&self, object_label: &str, context: &str) -> Result<Suggestion, BackendError>;
}

pub trait FeatureExtractor: Send + Sync {
    fn descriptor(&self) -> BackendDescriptor;

    /// One row per image; every row has the same length.
    fn embed(&self, images: &[RgbImage]) -> Result<Vec<Vec<f64>>, BackendError>;
}

/// Copy `generated` into `source` wherever `mask` is set. Used to enforce
/// inpainter locality regardless of what a backend returned.
pub fn composite_masked(
    source: &RgbImage,
    generated: &RgbImage,
    mask: &BinaryMask,
) -> Result<RgbImage, BackendError> {
    if source.dimensions() != generated.dimensions() {
        return Err(BackendError::Protocol(format!(
            "inpainter returned {:?}, expected {:?}",
            generated.dimensions(),
            source.dimensions()
        )));
    }
    if mask.dims() != (source.height(), source.width()) {
        return Err(BackendError::Protocol(format!(
            "mask is {:?}, image is {:?}",
            mask.dims(),
            (source.height(), source.width())
        )));
    }
    let mut out = source.clone();
    for (x, y, px) in out.enumerate_pixels_mut() {
        if mask.get(x, y) {
            *px = *generated.get_pixel(x, y);
        }
    }
    Ok(out)
}
