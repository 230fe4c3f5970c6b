//! Colour-space helpers for restyling: HSV jitter and the luminance /
//! chroma split (BT.601 YCbCr) used by the texture composite.
//! All conversions work on `f64` channels in `[0, 255]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HsvJitter {
    /// Fraction of the hue circle, in `[-0.5, 0.5)`.
    pub hue_shift: f64,
    pub saturation_scale: f64,
    pub value_scale: f64,
}

impl HsvJitter {
    pub const IDENTITY: HsvJitter = HsvJitter {
        hue_shift: 0.0,
        saturation_scale: 1.0,
        value_scale: 1.0,
    };

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(-0.5..0.5).contains(&self.hue_shift) {
            return Err(format!("hue_shift {} outside [-0.5, 0.5)", self.hue_shift));
        }
        if !(self.saturation_scale > 0.0 && self.value_scale > 0.0) {
            return Err("saturation and value scales must be positive".into());
        }
        Ok(())
    }

    pub fn apply(&self, rgb: [f64; 3]) -> [f64; 3] {
        if self.is_identity() {
            return rgb;
        }
        let [h, s, v] = rgb_to_hsv(rgb);
        let h = (h + self.hue_shift).rem_euclid(1.0);
        let s = (s * self.saturation_scale).clamp(0.0, 1.0);
        let v = (v * self.value_scale).clamp(0.0, 1.0);
        hsv_to_rgb([h, s, v])
    }
}

/// Sampling ranges for [`HsvJitter`]; each is `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JitterRanges {
    pub hue: (f64, f64),
    pub saturation: (f64, f64),
    pub value: (f64, f64),
}

impl Default for JitterRanges {
    fn default() -> Self {
        Self {
            hue: (-0.1, 0.1),
            saturation: (0.7, 1.3),
            value: (0.7, 1.3),
        }
    }
}

impl JitterRanges {
    pub fn validate(&self) -> Result<(), String> {
        let ordered = |(lo, hi): (f64, f64)| lo <= hi;
        if !(ordered(self.hue) && ordered(self.saturation) && ordered(self.value)) {
            return Err("jitter range with lo > hi".into());
        }
        if self.hue.0 < -0.5 || self.hue.1 >= 0.5 {
            return Err(format!("hue range {:?} outside [-0.5, 0.5)", self.hue));
        }
        if self.saturation.0 <= 0.0 || self.value.0 <= 0.0 {
            return Err("scale ranges must be positive".into());
        }
        Ok(())
    }

    pub fn contains(&self, j: &HsvJitter) -> bool {
        let within = |(lo, hi): (f64, f64), v: f64| lo <= v && v <= hi;
        within(self.hue, j.hue_shift)
            && within(self.saturation, j.saturation_scale)
            && within(self.value, j.value_scale)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> HsvJitter {
        let draw = |rng: &mut R, (lo, hi): (f64, f64)| {
            if lo == hi {
                lo
            } else {
                rng.gen_range(lo..=hi)
            }
        };
        HsvJitter {
            hue_shift: draw(rng, self.hue),
            saturation_scale: draw(rng, self.saturation),
            value_scale: draw(rng, self.value),
        }
    }
}

/// `[h, s, v]` with every component in `[0, 1]`.
pub fn rgb_to_hsv([r, g, b]: [f64; 3]) -> [f64; 3] {
    let (r, g, b) = (r / 255.0, g / 255.0, b / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / delta).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / delta + 2.0) / 6.0
    } else {
        ((r - g) / delta + 4.0) / 6.0
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    [h, s, max]
}

pub fn hsv_to_rgb([h, s, v]: [f64; 3]) -> [f64; 3] {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let c = v * s;
    let x = c * (1.0 - (h6.rem_euclid(2.0) - 1.0).abs());
    let m = v - c;
    let (r, g, b) = match h6 as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    [(r + m) * 255.0, (g + m) * 255.0, (b + m) * 255.0]
}

/// BT.601 luma. Also the grayscale conversion used by SSIM.
pub fn luma([r, g, b]: [f64; 3]) -> f64 {
    0.299 * r + 0.587 * g + 0.114 * b
}

/// Full-range BT.601 `[Y, Cb, Cr]` with chroma centred on zero.
pub fn rgb_to_ycbcr(rgb: [f64; 3]) -> [f64; 3] {
    let [r, _, b] = rgb;
    let y = luma(rgb);
    [y, (b - y) / 1.772, (r - y) / 1.402]
}

pub fn ycbcr_to_rgb([y, cb, cr]: [f64; 3]) -> [f64; 3] {
    let r = y + 1.402 * cr;
    let b = y + 1.772 * cb;
    let g = (y - 0.299 * r - 0.114 * b) / 0.587;
    [r, g, b]
}

pub fn to_u8(rgb: [f64; 3]) -> [u8; 3] {
    rgb.map(|c| c.round().clamp(0.0, 255.0) as u8)
}

pub fn to_f64(rgb: [u8; 3]) -> [f64; 3] {
    rgb.map(f64::from)
}
