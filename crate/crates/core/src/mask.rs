//! Binary mask algebra: union, square dilation, overlap and the edit safety
//! check, plus the two mask encodings used on disk and on the wire
//! (single-channel 0/255 PNG and row-major run-length encoding).

use std::io::Cursor;
use std::path::Path;

use image::{GrayImage, ImageFormat, Luma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::planner::EditOperation;

#[derive(Debug, Error)]
pub enum MaskError {
    #[error("mask dimensions must be positive, got {height}x{width}")]
    EmptyDimensions { height: u32, width: u32 },
    #[error("mask dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (u32, u32),
        found: (u32, u32),
    },
    #[error("overlap fraction undefined for an empty reference mask")]
    EmptyReference,
    #[error("run lengths cover {found} pixels, expected {expected}")]
    RleLength { expected: u64, found: u64 },
    #[error("mask image error: {0}")]
    Image(#[from] image::ImageError),
}

/// Axis-aligned pixel box, `x`/`y` is the top-left corner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl BBox {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    /// Exclusive right edge.
    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    /// Exclusive bottom edge.
    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn is_valid(&self) -> bool {
        self.w >= 1 && self.h >= 1
    }

    pub fn fits_in(&self, height: u32, width: u32) -> bool {
        self.is_valid() && self.right() <= width && self.bottom() <= height
    }

    /// Grow by `margin` pixels on each side, saturating at zero on the
    /// top-left. The result is not clipped to any image.
    pub fn expand(&self, margin: u32) -> BBox {
        let x = self.x.saturating_sub(margin);
        let y = self.y.saturating_sub(margin);
        BBox {
            x,
            y,
            w: self.right() + margin - x,
            h: self.bottom() + margin - y,
        }
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x && x < self.right() && y >= self.y && y < self.bottom()
    }

    /// Clip a box given in signed coordinates to an image. Returns `None`
    /// when nothing of the box remains inside.
    pub fn clip_signed(x: i64, y: i64, w: i64, h: i64, height: u32, width: u32) -> Option<BBox> {
        let x0 = x.max(0);
        let y0 = y.max(0);
        let x1 = (x + w).min(width as i64);
        let y1 = (y + h).min(height as i64);
        if x1 <= x0 || y1 <= y0 {
            return None;
        }
        Some(BBox::new(
            x0 as u32,
            y0 as u32,
            (x1 - x0) as u32,
            (y1 - y0) as u32,
        ))
    }
}

/// Row-major boolean raster.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "MaskRle", try_from = "MaskRle")]
pub struct BinaryMask {
    height: u32,
    width: u32,
    bits: Vec<bool>,
}

impl std::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BinaryMask")
            .field("height", &self.height)
            .field("width", &self.width)
            .field("popcount", &self.popcount())
            .finish()
    }
}

impl BinaryMask {
    /// All-false mask.
    pub fn new(height: u32, width: u32) -> Result<Self, MaskError> {
        if height == 0 || width == 0 {
            return Err(MaskError::EmptyDimensions { height, width });
        }
        Ok(Self {
            height,
            width,
            bits: vec![false; height as usize * width as usize],
        })
    }

    pub fn from_fn(
        height: u32,
        width: u32,
        mut f: impl FnMut(u32, u32) -> bool,
    ) -> Result<Self, MaskError> {
        let mut mask = Self::new(height, width)?;
        for y in 0..height {
            for x in 0..width {
                mask.bits[(y * width + x) as usize] = f(x, y);
            }
        }
        Ok(mask)
    }

    pub fn from_bits(height: u32, width: u32, bits: Vec<bool>) -> Result<Self, MaskError> {
        let mut mask = Self::new(height, width)?;
        if bits.len() != mask.bits.len() {
            return Err(MaskError::RleLength {
                expected: mask.bits.len() as u64,
                found: bits.len() as u64,
            });
        }
        mask.bits = bits;
        Ok(mask)
    }

    /// Filled rectangle, clipped to the mask bounds.
    pub fn from_bbox(height: u32, width: u32, bbox: BBox) -> Result<Self, MaskError> {
        Self::from_fn(height, width, |x, y| bbox.contains(x, y))
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.height, self.width)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[(y * self.width + x) as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.bits[(y * self.width + x) as usize] = value;
    }

    pub fn popcount(&self) -> u64 {
        self.bits.iter().filter(|&&b| b).count() as u64
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Tight bounding box of the set pixels.
    pub fn bounding_box(&self) -> Option<BBox> {
        let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x);
                    y1 = y1.max(y);
                }
            }
        }
        (x0 != u32::MAX).then(|| BBox::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1))
    }

    /// True when every set pixel lies inside `bbox`.
    pub fn within(&self, bbox: BBox) -> bool {
        (0..self.height).all(|y| (0..self.width).all(|x| !self.get(x, y) || bbox.contains(x, y)))
    }

    pub fn ensure_same_dims(&self, other: &BinaryMask) -> Result<(), MaskError> {
        if self.dims() != other.dims() {
            return Err(MaskError::DimensionMismatch {
                expected: self.dims(),
                found: other.dims(),
            });
        }
        Ok(())
    }

    pub fn intersection(&self, other: &BinaryMask) -> Result<BinaryMask, MaskError> {
        self.ensure_same_dims(other)?;
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect();
        Ok(BinaryMask {
            height: self.height,
            width: self.width,
            bits,
        })
    }

    pub fn intersects(&self, other: &BinaryMask) -> Result<bool, MaskError> {
        self.ensure_same_dims(other)?;
        Ok(self.bits.iter().zip(&other.bits).any(|(a, b)| *a && *b))
    }

    /// True when every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> Result<bool, MaskError> {
        self.ensure_same_dims(other)?;
        Ok(self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b))
    }

    pub fn to_gray_image(&self) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |x, y| {
            Luma([if self.get(x, y) { 255 } else { 0 }])
        })
    }

    /// Pixels at or above mid-scale count as set.
    pub fn from_gray_image(image: &GrayImage) -> Result<Self, MaskError> {
        Self::from_fn(image.height(), image.width(), |x, y| image.get_pixel(x, y)[0] >= 128)
    }

    pub fn to_png_bytes(&self) -> Result<Vec<u8>, MaskError> {
        let mut out = Cursor::new(Vec::new());
        self.to_gray_image().write_to(&mut out, ImageFormat::Png)?;
        Ok(out.into_inner())
    }

    pub fn save_png(&self, path: &Path) -> Result<(), MaskError> {
        self.to_gray_image().save_with_format(path, ImageFormat::Png)?;
        Ok(())
    }

    pub fn load_png(path: &Path) -> Result<Self, MaskError> {
        let image = image::open(path)?.into_luma8();
        Self::from_gray_image(&image)
    }

    /// Alternating run lengths over the row-major raster, starting with a
    /// run of unset pixels (which is zero when the first pixel is set).
    pub fn to_rle(&self) -> Vec<u32> {
        let mut runs = Vec::new();
        let mut current = false;
        let mut len = 0u32;
        for &bit in &self.bits {
            if bit == current {
                len += 1;
            } else {
                runs.push(len);
                current = bit;
                len = 1;
            }
        }
        runs.push(len);
        runs
    }

    pub fn from_rle(height: u32, width: u32, runs: &[u32]) -> Result<Self, MaskError> {
        let mut mask = Self::new(height, width)?;
        let expected = mask.bits.len() as u64;
        let found: u64 = runs.iter().map(|&r| r as u64).sum();
        if found != expected {
            return Err(MaskError::RleLength { expected, found });
        }
        let mut pos = 0usize;
        for (i, &run) in runs.iter().enumerate() {
            let value = i % 2 == 1;
            let end = pos + run as usize;
            if value {
                mask.bits[pos..end].fill(true);
            }
            pos = end;
        }
        Ok(mask)
    }
}

/// Serialized form of a mask: dimensions plus run lengths.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MaskRle {
    pub height: u32,
    pub width: u32,
    pub rle: Vec<u32>,
}

impl From<BinaryMask> for MaskRle {
    fn from(mask: BinaryMask) -> Self {
        MaskRle {
            height: mask.height,
            width: mask.width,
            rle: mask.to_rle(),
        }
    }
}

impl TryFrom<MaskRle> for BinaryMask {
    type Error = MaskError;

    fn try_from(value: MaskRle) -> Result<Self, Self::Error> {
        BinaryMask::from_rle(value.height, value.width, &value.rle)
    }
}

/// Pixelwise OR. The union of no masks is the all-false mask of `dims`.
pub fn union(masks: &[&BinaryMask], dims: (u32, u32)) -> Result<BinaryMask, MaskError> {
    let mut out = BinaryMask::new(dims.0, dims.1)?;
    for mask in masks {
        out.ensure_same_dims(mask)?;
        for (o, &b) in out.bits.iter_mut().zip(&mask.bits) {
            *o |= b;
        }
    }
    Ok(out)
}

/// Dilation by a `(2*dil+1)` square structuring element, clipped at the
/// borders. Separable: a horizontal then a vertical running-window pass.
pub fn dilate(mask: &BinaryMask, dil: u32) -> BinaryMask {
    if dil == 0 {
        return mask.clone();
    }
    let (h, w) = (mask.height as usize, mask.width as usize);
    let r = dil as usize;
    let mut horizontal = vec![false; h * w];
    let mut prefix = vec![0u32; w.max(h) + 1];

    for y in 0..h {
        let row = &mask.bits[y * w..(y + 1) * w];
        for x in 0..w {
            prefix[x + 1] = prefix[x] + row[x] as u32;
        }
        for x in 0..w {
            let lo = x.saturating_sub(r);
            let hi = (x + r + 1).min(w);
            horizontal[y * w + x] = prefix[hi] > prefix[lo];
        }
    }

    let mut out = vec![false; h * w];
    for x in 0..w {
        for y in 0..h {
            prefix[y + 1] = prefix[y] + horizontal[y * w + x] as u32;
        }
        for y in 0..h {
            let lo = y.saturating_sub(r);
            let hi = (y + r + 1).min(h);
            out[y * w + x] = prefix[hi] > prefix[lo];
        }
    }

    BinaryMask {
        height: mask.height,
        width: mask.width,
        bits: out,
    }
}

/// `|a ∩ b| / |a|`.
pub fn overlap_fraction(a: &BinaryMask, b: &BinaryMask) -> Result<f64, MaskError> {
    a.ensure_same_dims(b)?;
    let total = a.popcount();
    if total == 0 {
        return Err(MaskError::EmptyReference);
    }
    let shared = a.bits.iter().zip(&b.bits).filter(|(x, y)| **x && **y).count() as u64;
    Ok(shared as f64 / total as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SafetyVerdict {
    Ok,
    TargetConflict,
    TrajectoryConflict,
}

impl std::fmt::Display for SafetyVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SafetyVerdict::Ok => "ok",
            SafetyVerdict::TargetConflict => "target_conflict",
            SafetyVerdict::TrajectoryConflict => "trajectory_conflict",
        })
    }
}

/// Target overlap always wins. Trajectory overlap only matters for edits
/// that put new content into the scene; removing an object cannot obstruct
/// a recorded motion.
pub fn check_edit_safety(
    edit_region: &BinaryMask,
    target_mask: &BinaryMask,
    trajectory_footprint: Option<&BinaryMask>,
    operation: EditOperation,
) -> Result<SafetyVerdict, MaskError> {
    if edit_region.intersects(target_mask)? {
        return Ok(SafetyVerdict::TargetConflict);
    }
    if let Some(footprint) = trajectory_footprint {
        if operation.adds_content() && edit_region.intersects(footprint)? {
            return Ok(SafetyVerdict::TrajectoryConflict);
        }
    }
    Ok(SafetyVerdict::Ok)
}
