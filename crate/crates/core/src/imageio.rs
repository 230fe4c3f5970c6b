//! PNG and base64 helpers shared by the dataset layer and the wire protocol.

use std::io::Cursor;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use image::{ImageFormat, RgbImage};

pub fn encode_png(image: &RgbImage) -> Result<Vec<u8>, image::ImageError> {
    let mut out = Cursor::new(Vec::new());
    image.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

pub fn decode_png(bytes: &[u8]) -> Result<RgbImage, image::ImageError> {
    Ok(image::load_from_memory_with_format(bytes, ImageFormat::Png)?.into_rgb8())
}

pub fn png_to_base64(image: &RgbImage) -> Result<String, image::ImageError> {
    Ok(BASE64.encode(encode_png(image)?))
}

#[derive(Debug, thiserror::Error)]
pub enum Base64ImageError {
    #[error("invalid base64: {0}")]
    Base64(#[from] base64::DecodeError),
    #[error("invalid png: {0}")]
    Image(#[from] image::ImageError),
}

pub fn png_from_base64(text: &str) -> Result<RgbImage, Base64ImageError> {
    let bytes = BASE64.decode(text.trim())?;
    Ok(decode_png(&bytes)?)
}

pub fn bytes_to_base64(bytes: &[u8]) -> String {
    BASE64.encode(bytes)
}

pub fn bytes_from_base64(text: &str) -> Result<Vec<u8>, base64::DecodeError> {
    BASE64.decode(text.trim())
}
