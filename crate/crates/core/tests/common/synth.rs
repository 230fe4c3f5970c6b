//! Synthetic cluttered tabletop scenes with known clean renders.

use image::{Rgb, RgbImage};
use rand::Rng;

use sceneaug_core::mask::{BBox, BinaryMask};
use sceneaug_core::scene::DetectedObject;
use sceneaug_core::DemonstrationFrame;

pub const COLORS: [(&str, [u8; 3]); 8] = [
    ("red", [200, 30, 30]),
    ("green", [40, 170, 60]),
    ("blue", [30, 60, 200]),
    ("yellow", [230, 210, 40]),
    ("purple", [130, 50, 160]),
    ("orange", [240, 140, 20]),
    ("black", [15, 15, 15]),
    ("white", [245, 245, 245]),
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Background {
    Flat([u8; 3]),
    /// Linear ramp from left to right.
    Gradient([u8; 3], [u8; 3]),
}

impl Background {
    pub fn at(&self, x: u32, width: u32) -> [u8; 3] {
        match *self {
            Background::Flat(c) => c,
            Background::Gradient(a, b) => {
                let t = x as f64 / (width - 1).max(1) as f64;
                let mut out = [0u8; 3];
                for c in 0..3 {
                    out[c] = (a[c] as f64 + t * (b[c] as f64 - a[c] as f64)).round() as u8;
                }
                out
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Block,
    Disc,
}

#[derive(Clone, Debug)]
pub struct SynthObject {
    pub label: String,
    pub bbox: BBox,
    pub shape: Shape,
    pub color: [u8; 3],
}

impl SynthObject {
    pub fn covers(&self, x: u32, y: u32) -> bool {
        if !self.bbox.contains(x, y) {
            return false;
        }
        match self.shape {
            Shape::Block => true,
            Shape::Disc => {
                let b = self.bbox;
                let (cx, cy) = (b.x as f64 + b.w as f64 / 2.0, b.y as f64 + b.h as f64 / 2.0);
                let (rx, ry) = (b.w as f64 / 2.0, b.h as f64 / 2.0);
                let (dx, dy) = ((x as f64 + 0.5 - cx) / rx, (y as f64 + 0.5 - cy) / ry);
                dx * dx + dy * dy <= 1.0
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct SynthScene {
    pub width: u32,
    pub height: u32,
    pub background: Background,
    pub objects: Vec<SynthObject>,
}

impl SynthScene {
    /// `n` objects (at most 8) placed without overlap, each box at least
    /// `gap` pixels from every other box and from the border.
    pub fn random(rng: &mut impl Rng, width: u32, height: u32, n: usize, gap: u32) -> Self {
        assert!(n <= COLORS.len());
        let background = if rng.gen_bool(0.5) {
            let g = rng.gen_range(90..200);
            Background::Flat([g, g.saturating_sub(10), g.saturating_sub(25)])
        } else {
            let a = [rng.gen_range(60..120), rng.gen_range(60..120), rng.gen_range(60..120)];
            let b = [rng.gen_range(140..220), rng.gen_range(140..220), rng.gen_range(140..220)];
            Background::Gradient(a, b)
        };
        let mut objects: Vec<SynthObject> = Vec::new();
        'place: while objects.len() < n {
            let w = rng.gen_range(10..=28);
            let h = rng.gen_range(10..=28);
            let x = rng.gen_range(gap..width - gap - w);
            let y = rng.gen_range(gap..height - gap - h);
            let bbox = BBox::new(x, y, w, h);
            let grown = bbox.expand(gap);
            for o in &objects {
                let b = o.bbox;
                let disjoint = grown.right() <= b.x
                    || b.right() <= grown.x
                    || grown.bottom() <= b.y
                    || b.bottom() <= grown.y;
                if !disjoint {
                    continue 'place;
                }
            }
            let shape = if rng.gen_bool(0.5) { Shape::Block } else { Shape::Disc };
            let (name, color) = COLORS[objects.len()];
            let noun = match shape {
                Shape::Block => "block",
                Shape::Disc => "disc",
            };
            objects.push(SynthObject {
                label: format!("{name} {noun}"),
                bbox,
                shape,
                color,
            });
        }
        Self {
            width,
            height,
            background,
            objects,
        }
    }

    /// Render every object except those in `skip`.
    pub fn render_without(&self, skip: &[usize]) -> RgbImage {
        RgbImage::from_fn(self.width, self.height, |x, y| {
            let hit = self
                .objects
                .iter()
                .enumerate()
                .rev()
                .find(|(i, o)| !skip.contains(i) && o.covers(x, y));
            Rgb(match hit {
                Some((_, o)) => o.color,
                None => self.background.at(x, self.width),
            })
        })
    }

    pub fn render(&self) -> RgbImage {
        self.render_without(&[])
    }

    pub fn shape_mask(&self, i: usize) -> BinaryMask {
        let o = &self.objects[i];
        BinaryMask::from_fn(self.height, self.width, |x, y| o.covers(x, y)).unwrap()
    }

    pub fn detections(&self) -> Vec<DetectedObject> {
        self.objects
            .iter()
            .enumerate()
            .map(|(i, o)| DetectedObject {
                object_id: i as u32,
                label: o.label.clone(),
                bbox: o.bbox,
                detection_confidence: 0.9,
                clipped: false,
            })
            .collect()
    }

    pub fn frame(&self, frame_id: &str, target: usize) -> DemonstrationFrame {
        let instruction = format!("pick up the {}", self.objects[target].label);
        DemonstrationFrame::new(frame_id, "synthetic", self.render(), &instruction).unwrap()
    }
}
