//! Texture store: a directory of PNG patches plus `index.json`:
//!
//! ```json
//! {"textures": [{"texture_id": "striped_0001", "file": "striped_0001.png", "category": "striped"}]}
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TEXTURE_INDEX_FILE: &str = "index.json";
pub const MIN_TEXTURE_SIDE: u32 = 32;

#[derive(Debug, Error)]
pub enum TextureError {
    #[error("texture index {path}: {message}")]
    Index { path: PathBuf, message: String },
    #[error("texture `{id}` image {path}: {source}")]
    Image {
        id: String,
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("texture `{id}` is {w}x{h}, smaller than {MIN_TEXTURE_SIDE}x{MIN_TEXTURE_SIDE}")]
    TooSmall { id: String, w: u32, h: u32 },
    #[error("duplicate texture id `{0}`")]
    Duplicate(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TextureRecord {
    pub texture_id: String,
    pub image: RgbImage,
    pub category: String,
}

impl TextureRecord {
    pub fn new(texture_id: &str, image: RgbImage, category: &str) -> Result<Self, TextureError> {
        if image.width() < MIN_TEXTURE_SIDE || image.height() < MIN_TEXTURE_SIDE {
            return Err(TextureError::TooSmall {
                id: texture_id.to_string(),
                w: image.width(),
                h: image.height(),
            });
        }
        Ok(Self {
            texture_id: texture_id.to_string(),
            image,
            category: category.to_string(),
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TextureIndexEntry {
    pub texture_id: String,
    pub file: String,
    pub category: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TextureIndex {
    pub textures: Vec<TextureIndexEntry>,
}

#[derive(Clone, Debug, Default)]
pub struct TextureStore {
    textures: BTreeMap<String, TextureRecord>,
}

impl TextureStore {
    pub fn from_records(records: Vec<TextureRecord>) -> Result<Self, TextureError> {
        let mut textures = BTreeMap::new();
        for r in records {
            if textures.contains_key(&r.texture_id) {
                return Err(TextureError::Duplicate(r.texture_id));
            }
            textures.insert(r.texture_id.clone(), r);
        }
        Ok(Self { textures })
    }

    pub fn load(dir: &Path) -> Result<Self, TextureError> {
        let index_path = dir.join(TEXTURE_INDEX_FILE);
        let index_err = |message: String| TextureError::Index {
            path: index_path.clone(),
            message,
        };
        let text = std::fs::read_to_string(&index_path).map_err(|e| index_err(e.to_string()))?;
        let index: TextureIndex =
            serde_json::from_str(&text).map_err(|e| index_err(e.to_string()))?;
        let records = index
            .textures
            .into_iter()
            .map(|entry| {
                let path = dir.join(&entry.file);
                let image = image::open(&path)
                    .map_err(|source| TextureError::Image {
                        id: entry.texture_id.clone(),
                        path: path.clone(),
                        source,
                    })?
                    .into_rgb8();
                TextureRecord::new(&entry.texture_id, image, &entry.category)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_records(records)
    }

    pub fn get(&self, texture_id: &str) -> Option<&TextureRecord> {
        self.textures.get(texture_id)
    }

    /// Sorted ids, suitable as a planner texture pool.
    pub fn ids(&self) -> Vec<String> {
        self.textures.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.textures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.textures.is_empty()
    }
}
