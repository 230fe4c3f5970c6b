//! Deterministic offline backends.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};

use super::wire::{objects_from_wire, DetectResponse};
use super::{
    composite_masked, BackendDescriptor, BackendError, BackendKind, Detector, FeatureExtractor,
    MaskInpainter, ObjectSuggester, PromptedInpainter, Segmenter, SizeClass, Suggestion,
};
use crate::mask::{BBox, BinaryMask};
use crate::scene::DetectedObject;

const STUB_VERSION: &str = "1";

/// Reads detections from `<dir>/<frame_id>.detections.json`, which uses the
/// `/v1/detect` response body format.
#[derive(Clone, Debug)]
pub struct AnnotationDetector {
    dir: PathBuf,
}

impl AnnotationDetector {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn sidecar_path(&self, frame_id: &str) -> PathBuf {
        sidecar_path(&self.dir, frame_id)
    }
}

pub fn sidecar_path(dir: &Path, frame_id: &str) -> PathBuf {
    dir.join(format!("{frame_id}.detections.json"))
}

impl Detector for AnnotationDetector {
    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor::local(BackendKind::Detector, "annotation", STUB_VERSION)
    }

    fn detect(
        &self,
        frame_id: &str,
        image: &RgbImage,
        _prompt: Option<&str>,
    ) -> Result<Vec<DetectedObject>, BackendError> {
        let path = self.sidecar_path(frame_id);
        let text = std::fs::read_to_string(&path).map_err(|e| {
            BackendError::permanent("missing_annotation", format!("{}: {e}", path.display()))
        })?;
        let parsed: DetectResponse = serde_json::from_str(&text)
            .map_err(|e| BackendError::Protocol(format!("{}: {e}", path.display())))?;
        Ok(objects_from_wire(
            &parsed.objects,
            (image.height(), image.width()),
            f64::NEG_INFINITY,
        ))
    }
}

/// Fixed detections, independent of the image. Handy for synthetic scenes.
#[derive(Clone, Debug, Default)]
pub struct StaticDetector {
    pub objects: Vec<DetectedObject>,
}

impl Detector for StaticDetector {
    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor::local(BackendKind::Detector, "static", STUB_VERSION)
    }

    fn detect(
        &self,
        _frame_id: &str,
        _image: &RgbImage,
        _prompt: Option<&str>,
    ) -> Result<Vec<DetectedObject>, BackendError> {
        Ok(self.objects.clone())
    }
}

/// Returns each box as a filled rectangle with confidence 1.
#[derive(Clone, Copy, Debug, Default)]
pub struct RectMaskSegmenter;

impl Segmenter for RectMaskSegmenter {
    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor::local(BackendKind::Segmenter, "rect-mask", STUB_VERSION)
    }

    fn segment(
        &self,
        image: &RgbImage,
        boxes: &[BBox],
    ) -> Result<Vec<(BinaryMask, f64)>, BackendError> {
        boxes
            .iter()
            .map(|b| {
                BinaryMask::from_bbox(image.height(), image.width(), *b)
                    .map(|m| (m, 1.0))
                    .map_err(|e| BackendError::Protocol(e.to_string()))
            })
            .collect()
    }
}

/// Value given to masked pixels when the mask covers the whole image and
/// there is nothing to propagate from.
pub const RING_FILL_FALLBACK: [u8; 3] = [127, 127, 127];

/// Fills the mask from its boundary inward: each round, every masked pixel
/// with at least one known 8-neighbour takes the mean of those neighbours,
/// then becomes known. Rounds are synchronous, so the result does not
/// depend on scan order.
#[derive(Clone, Copy, Debug, Default)]
pub struct RingMeanFill;

impl RingMeanFill {
    pub fn fill(image: &RgbImage, mask: &BinaryMask) -> RgbImage {
        let (w, h) = image.dimensions();
        let (wu, hu) = (w as usize, h as usize);
        let mut values: Vec<[f64; 3]> = image
            .pixels()
            .map(|p| [p[0] as f64, p[1] as f64, p[2] as f64])
            .collect();
        let mut known: Vec<bool> = mask.bits().iter().map(|&b| !b).collect();
        let mut pending: Vec<usize> = (0..wu * hu).filter(|&i| !known[i]).collect();
        if pending.is_empty() {
            return image.clone();
        }
        if pending.len() == wu * hu {
            return RgbImage::from_pixel(w, h, Rgb(RING_FILL_FALLBACK));
        }

        let mut updates: Vec<(usize, [f64; 3])> = Vec::new();
        while !pending.is_empty() {
            updates.clear();
            let mut still = Vec::with_capacity(pending.len());
            for &i in &pending {
                let (x, y) = ((i % wu) as i64, (i / wu) as i64);
                let mut sum = [0.0; 3];
                let mut n = 0u32;
                for dy in -1..=1i64 {
                    for dx in -1..=1i64 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let (nx, ny) = (x + dx, y + dy);
                        if nx < 0 || ny < 0 || nx >= wu as i64 || ny >= hu as i64 {
                            continue;
                        }
                        let j = ny as usize * wu + nx as usize;
                        if known[j] {
                            for c in 0..3 {
                                sum[c] += values[j][c];
                            }
                            n += 1;
                        }
                    }
                }
                if n > 0 {
                    updates.push((i, sum.map(|s| s / n as f64)));
                } else {
                    still.push(i);
                }
            }
            for &(i, v) in &updates {
                values[i] = v;
                known[i] = true;
            }
            pending = still;
        }

        let mut out = image.clone();
        for (x, y, px) in out.enumerate_pixels_mut() {
            if mask.get(x, y) {
                let v = values[(y * w + x) as usize];
                *px = Rgb(v.map(|c| c.round().clamp(0.0, 255.0) as u8));
            }
        }
        out
    }
}

impl MaskInpainter for RingMeanFill {
    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor::local(BackendKind::MaskInpainter, "ring-mean-fill", STUB_VERSION)
    }

    fn inpaint(&self, image: &RgbImage, mask: &BinaryMask) -> Result<RgbImage, BackendError> {
        check_mask_dims(image, mask)?;
        Ok(Self::fill(image, mask))
    }
}

fn check_mask_dims(image: &RgbImage, mask: &BinaryMask) -> Result<(), BackendError> {
    if mask.dims() != (image.height(), image.width()) {
        return Err(BackendError::permanent(
            "bad_mask",
            format!("mask {:?} vs image {:?}", mask.dims(), (image.height(), image.width())),
        ));
    }
    Ok(())
}

/// Colour names understood by [`FlatColorObject`].
pub const COLOR_WORDS: &[(&str, [u8; 3])] = &[
    ("red", [220, 30, 30]),
    ("orange", [245, 140, 20]),
    ("yellow", [240, 220, 30]),
    ("green", [40, 160, 60]),
    ("blue", [30, 60, 220]),
    ("purple", [130, 50, 160]),
    ("pink", [240, 120, 180]),
    ("white", [245, 245, 245]),
    ("black", [20, 20, 20]),
    ("gray", [128, 128, 128]),
    ("grey", [128, 128, 128]),
    ("brown", [130, 80, 40]),
];

/// Used when the prompt names no known colour.
pub const DEFAULT_OBJECT_COLOR: [u8; 3] = [128, 128, 128];

pub fn color_from_prompt(prompt: &str) -> Option<[u8; 3]> {
    prompt
        .split(|c: char| !c.is_alphanumeric())
        .map(|t| t.to_lowercase())
        .find_map(|t| COLOR_WORDS.iter().find(|(w, _)| *w == t).map(|(_, c)| *c))
}

/// Reconstructs the masked background with [`RingMeanFill`], then paints
/// the ellipse inscribed in the mask's bounding box (restricted to the mask)
/// with the first colour named in the prompt.
#[derive(Clone, Copy, Debug, Default)]
pub struct FlatColorObject;

impl FlatColorObject {
    pub fn ellipse_mask(mask: &BinaryMask) -> BinaryMask {
        let Some(b) = mask.bounding_box() else {
            return mask.clone();
        };
        let (cx, cy) = (b.x as f64 + b.w as f64 / 2.0, b.y as f64 + b.h as f64 / 2.0);
        let (rx, ry) = (b.w as f64 / 2.0, b.h as f64 / 2.0);
        let mut out = mask.clone();
        for y in b.y..b.bottom() {
            for x in b.x..b.right() {
                let dx = (x as f64 + 0.5 - cx) / rx;
                let dy = (y as f64 + 0.5 - cy) / ry;
                out.set(x, y, mask.get(x, y) && dx * dx + dy * dy <= 1.0);
            }
        }
        out
    }
}

impl PromptedInpainter for FlatColorObject {
    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor::local(BackendKind::PromptedInpainter, "flat-color-object", STUB_VERSION)
    }

    fn inpaint(
        &self,
        image: &RgbImage,
        mask: &BinaryMask,
        prompt: &str,
    ) -> Result<RgbImage, BackendError> {
        check_mask_dims(image, mask)?;
        let color = Rgb(color_from_prompt(prompt).unwrap_or(DEFAULT_OBJECT_COLOR));
        let mut out = RingMeanFill::fill(image, mask);
        let ellipse = Self::ellipse_mask(mask);
        for (x, y, px) in out.enumerate_pixels_mut() {
            if ellipse.get(x, y) {
                *px = color;
            }
        }
        composite_masked(image, &out, mask)
    }
}

/// Fixed label → replacement table.
#[derive(Clone, Debug)]
pub struct DictionarySuggester {
    entries: BTreeMap<String, Suggestion>,
}

fn normalize_label(label: &str) -> String {
    label
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

impl Default for DictionarySuggester {
    fn default() -> Self {
        let mut s = Self {
            entries: BTreeMap::new(),
        };
        use SizeClass::*;
        for (label, name, description, size) in [
            ("cooking pan", "dish cloth", "a gray folded dish cloth", Medium),
            ("orange", "apple", "a red apple", Small),
            ("apple", "orange", "a ripe orange", Small),
            ("spoon", "fork", "a metal fork", Small),
            ("fork", "spoon", "a metal spoon", Small),
            ("cup", "mug", "a ceramic mug", Small),
            ("mug", "cup", "a paper cup", Small),
            ("bowl", "plate", "a round ceramic plate", Medium),
            ("plate", "bowl", "a shallow bowl", Medium),
            ("block", "sponge", "a kitchen sponge", Small),
            ("cube", "sponge", "a kitchen sponge", Small),
            ("bottle", "can", "a soda can", Small),
            ("can", "bottle", "a small plastic bottle", Small),
            ("towel", "dish cloth", "a striped dish cloth", Medium),
            ("pot", "cooking pan", "a graphite cooking pan", Medium),
            ("cutting board", "baking tray", "a metal baking tray", Large),
        ] {
            s.insert(label, name, description, size);
        }
        s
    }
}

impl DictionarySuggester {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, label: &str, name: &str, description: &str, size_class: SizeClass) {
        self.entries.insert(
            normalize_label(label),
            Suggestion {
                name: name.to_string(),
                description: description.to_string(),
                size_class,
            },
        );
    }

    /// Exact normalized label first, then the longest table key that the
    /// label ends with ("graphite cooking pan" finds "cooking pan").
    pub fn lookup(&self, label: &str) -> Option<&Suggestion> {
        let key = normalize_label(label);
        if let Some(s) = self.entries.get(&key) {
            return Some(s);
        }
        self.entries
            .iter()
            .filter(|(k, _)| key.ends_with(&format!(" {k}")))
            .max_by_key(|(k, _)| k.len())
            .map(|(_, s)| s)
    }
}

impl ObjectSuggester for DictionarySuggester {
    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor::local(BackendKind::Suggester, "dictionary", STUB_VERSION)
    }

    fn suggest(&self, object_label: &str, _context: &str) -> Result<Suggestion, BackendError> {
        self.lookup(object_label)
            .cloned()
            .ok_or_else(|| BackendError::permanent("unknown_label", object_label))
    }
}

/// 8 bins per RGB channel, each channel normalized to unit mass (D = 24).
#[derive(Clone, Copy, Debug, Default)]
pub struct ColorHistogram;

impl ColorHistogram {
    pub const BINS: usize = 8;
    pub const DIM: usize = 3 * Self::BINS;

    pub fn histogram(image: &RgbImage) -> Vec<f64> {
        let mut counts = vec![0u64; Self::DIM];
        for p in image.pixels() {
            for c in 0..3 {
                counts[c * Self::BINS + p[c] as usize / (256 / Self::BINS)] += 1;
            }
        }
        let n = (image.width() as u64 * image.height() as u64).max(1) as f64;
        counts.into_iter().map(|c| c as f64 / n).collect()
    }
}

impl FeatureExtractor for ColorHistogram {
    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor::local(BackendKind::FeatureExtractor, "color-histogram-8", STUB_VERSION)
    }

    fn embed(&self, images: &[RgbImage]) -> Result<Vec<Vec<f64>>, BackendError> {
        Ok(images.iter().map(Self::histogram).collect())
    }
}
