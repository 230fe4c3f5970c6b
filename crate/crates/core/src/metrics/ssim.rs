//! Windowed SSIM with a uniform (box) window over valid positions only.
//!
//! Local means, variances and covariance are population statistics of each
//! `w x w` window. Window sums are taken with a separable box filter
//! summed directly, which avoids the cancellation of integral images on
//! large frames.

use image::{GrayImage, RgbImage};
use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::editors::color::luma;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub window: usize,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 11,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 255.0,
        }
    }
}

impl SsimParams {
    pub fn validate(&self) -> Result<(), MetricError> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(MetricError::InvalidParams(format!(
                "window must be odd and >= 3, got {}",
                self.window
            )));
        }
        if !(self.k1 > 0.0 && self.k2 > 0.0 && self.dynamic_range > 0.0) {
            return Err(MetricError::InvalidParams(
                "k1, k2 and dynamic range must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }
}

/// Single-channel `f64` raster, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayRaster {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayRaster {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, MetricError> {
        if data.len() != width * height || width == 0 || height == 0 {
            return Err(MetricError::Dimension(format!(
                "{} values for a {width}x{height} raster",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(MetricError::NonFinite);
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    /// BT.601 luminance.
    pub fn from_rgb(image: &RgbImage) -> Self {
        Self {
            width: image.width() as usize,
            height: image.height() as usize,
            data: image.pixels().map(|p| luma(p.0.map(f64::from))).collect(),
        }
    }

    pub fn from_gray(image: &GrayImage) -> Self {
        Self {
            width: image.width() as usize,
            height: image.height() as usize,
            data: image.pixels().map(|p| f64::from(p.0[0])).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Sum of every `w x w` window. Output is `(W-w+1) x (H-w+1)`.
fn box_sums(values: &[f64], width: usize, height: usize, w: usize) -> Vec<f64> {
    let ow = width - w + 1;
    let oh = height - w + 1;
    let mut rows = vec![0.0; ow * height];
    for y in 0..height {
        let row = &values[y * width..(y + 1) * width];
        for x in 0..ow {
            rows[y * ow + x] = row[x..x + w].iter().sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (y..y + w).map(|yy| rows[yy * ow + x]).sum();
        }
    }
    out
}

/// Per-window SSIM values, row-major over window positions.
pub fn ssim_map(a: &GrayRaster, b: &GrayRaster, params: &SsimParams) -> Result<Vec<f64>, MetricError> {
    params.validate()?;
    if (a.width, a.height) != (b.width, b.height) {
        return Err(MetricError::Dimension(format!(
            "{}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let w = params.window;
    if a.width < w || a.height < w {
        return Err(MetricError::Dimension(format!(
            "{}x{} image is smaller than the {w}x{w} window",
            a.width, a.height
        )));
    }
    let (width, height) = (a.width, a.height);
    let product = |f: fn(f64, f64) -> f64| -> Vec<f64> {
        a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect()
    };
    let sa = box_sums(&a.data, width, height, w);
    let sb = box_sums(&b.data, width, height, w);
    let saa = box_sums(&product(|x, _| x * x), width, height, w);
    let sbb = box_sums(&product(|_, y| y * y), width, height, w);
    let sab = box_sums(&product(|x, y| x * y), width, height, w);

    let n = (w * w) as f64;
    let (c1, c2) = (params.c1(), params.c2());
    Ok((0..sa.len())
        .map(|i| {
            let (mu_a, mu_b) = (sa[i] / n, sb[i] / n);
            let var_a = saa[i] / n - mu_a * mu_a;
            let var_b = sbb[i] / n - mu_b * mu_b;
            let cov = sab[i] / n - mu_a * mu_b;
            ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
                / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2))
        })
        .collect())
}

/// Mean SSIM over all valid window positions.
pub fn ssim(a: &GrayRaster, b: &GrayRaster, params: &SsimParams) -> Result<f64, MetricError> {
    let map = ssim_map(a, b, params)?;
    Ok(map.iter().sum::<f64>() / map.len() as f64)
}

pub fn ssim_rgb(a: &RgbImage, b: &RgbImage, params: &SsimParams) -> Result<f64, MetricError> {
    ssim(&GrayRaster::from_rgb(a), &GrayRaster::from_rgb(b), params)
}
