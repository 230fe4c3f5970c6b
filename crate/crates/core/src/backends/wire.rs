//! JSON bodies of the backend HTTP protocol.
//!
//! | route            | request                         | response                              |
//! |------------------|---------------------------------|---------------------------------------|
//! | `POST /v1/detect`  | `{image, prompt?}`            | `{objects:[{x,y,w,h,label,score}]}`   |
//! | `POST /v1/segment` | `{image, boxes:[{x,y,w,h}]}`  | `{masks:[{rle,score}]}`               |
//! | `POST /v1/inpaint` | `{image, mask_rle, prompt?}`  | `{image}`                             |
//! | `POST /v1/suggest` | `{label, context}`            | `{name, description, size_class}`     |
//! | `POST /v1/embed`   | `{images:[...]}`              | `{features:[[...]]}`                  |
//!
//! Images are base64-encoded PNG. Masks are row-major run lengths starting
//! with an unset run, sized like the request image. Errors carry
//! `{error:{code,message}}`; 4xx is permanent and 5xx retriable.

use serde::{Deserialize, Serialize};

use super::SizeClass;
use crate::mask::BBox;
use crate::scene::DetectedObject;

pub const DETECT_PATH: &str = "/v1/detect";
pub const SEGMENT_PATH: &str = "/v1/segment";
pub const INPAINT_PATH: &str = "/v1/inpaint";
pub const SUGGEST_PATH: &str = "/v1/suggest";
pub const EMBED_PATH: &str = "/v1/embed";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectRequest {
    pub image: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
}

/// Box coordinates may be fractional or reach past the image; see
/// [`objects_from_wire`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireObject {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub label: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectResponse {
    pub objects: Vec<WireObject>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl From<BBox> for WireBox {
    fn from(b: BBox) -> Self {
        WireBox {
            x: b.x,
            y: b.y,
            w: b.w,
            h: b.h,
        }
    }
}

impl From<WireBox> for BBox {
    fn from(b: WireBox) -> Self {
        BBox::new(b.x, b.y, b.w, b.h)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentRequest {
    pub image: String,
    pub boxes: Vec<WireBox>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireMask {
    pub rle: Vec<u32>,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentResponse {
    pub masks: Vec<WireMask>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InpaintRequest {
    pub image: String,
    pub mask_rle: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InpaintResponse {
    pub image: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuggestRequest {
    pub label: String,
    pub context: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuggestResponse {
    pub name: String,
    pub description: String,
    pub size_class: SizeClass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub images: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub features: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub code: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

/// Convert wire detections into objects with ids in response order.
///
/// Fractional boxes are expanded outward to whole pixels. Boxes reaching
/// past the image are clipped and flagged; boxes entirely outside, with
/// empty labels, or scoring below `min_score` are discarded. Scores are
/// clamped into `[0, 1]`.
pub fn objects_from_wire(
    objects: &[WireObject],
    image_size: (u32, u32),
    min_score: f64,
) -> Vec<DetectedObject> {
    let (height, width) = image_size;
    let mut out = Vec::new();
    for (index, obj) in objects.iter().enumerate() {
        let label = obj.label.trim();
        if label.is_empty() || !obj.score.is_finite() || obj.score < min_score {
            continue;
        }
        let x0 = obj.x.floor() as i64;
        let y0 = obj.y.floor() as i64;
        let x1 = (obj.x + obj.w).ceil() as i64;
        let y1 = (obj.y + obj.h).ceil() as i64;
        let Some(bbox) = BBox::clip_signed(x0, y0, x1 - x0, y1 - y0, height, width) else {
            continue;
        };
        let clipped = bbox.x as i64 != x0
            || bbox.y as i64 != y0
            || bbox.right() as i64 != x1
            || bbox.bottom() as i64 != y1;
        out.push(DetectedObject {
            object_id: index as u32,
            label: label.to_string(),
            bbox,
            detection_confidence: obj.score.clamp(0.0, 1.0),
            clipped,
        });
    }
    out
}
