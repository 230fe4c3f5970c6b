//! Demonstration datasets on disk and the edited frames derived from them.
//!
//! Input layout:
//!
//! ```text
//! <root>/meta.json                  {"schema_version": "1", "episodes": [{"episode_id": .., "frames": [..]}]}
//! <root>/frames/<frame_id>.png
//! <root>/frames/<frame_id>.json     {"instruction": .., "target_phrase"?: .., "state"?: b64, "action"?: b64}
//! <root>/footprints/<frame_id>.png  optional single-channel mask
//! ```
//!
//! Edits go to `<root>/edits/<frame_id>/<op>_<plan_hash>_<variant>.png`
//! with a `.json` sidecar next to each image. Robot state and action blobs
//! are carried through byte-for-byte and never interpreted.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::BackendDescriptor;
use crate::editors::ReplacementPrompt;
use crate::mask::{BinaryMask, MaskError};
use crate::planner::{EditOperation, EditPlan};

pub const SCHEMA_VERSION: &str = "1";
pub const META_FILE: &str = "meta.json";
pub const FRAMES_DIR: &str = "frames";
pub const FOOTPRINTS_DIR: &str = "footprints";
pub const EDITS_DIR: &str = "edits";
pub const MIN_IMAGE_SIDE: u32 = 64;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("dataset manifest {0} not found")]
    MissingMeta(PathBuf),
    #[error("unsupported schema version `{0}`")]
    SchemaVersion(String),
    #[error("frame {frame_id} is {width}x{height}; both sides must be at least {MIN_IMAGE_SIDE}")]
    TooSmall {
        frame_id: String,
        width: u32,
        height: u32,
    },
    #[error("frame {frame_id}: footprint is {footprint:?}, image is {image:?} (h, w)")]
    FootprintMismatch {
        frame_id: String,
        image: (u32, u32),
        footprint: (u32, u32),
    },
    #[error("unknown frame `{0}`")]
    UnknownFrame(String),
    #[error("frame {frame_id}: invalid {field} blob: {message}")]
    Blob {
        frame_id: String,
        field: &'static str,
        message: String,
    },
    #[error("only lossless PNG output is supported, got `{0}`")]
    LossyFormat(String),
    #[error("{0} already exists; set overwrite to replace it")]
    Collision(PathBuf),
    #[error("edited frame is inconsistent: {0}")]
    InvalidEdit(String),
    #[error(transparent)]
    Mask(#[from] MaskError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| DatasetError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), DatasetError> {
    let text = serde_json::to_string_pretty(value).map_err(|source| DatasetError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    std::fs::write(path, text + "\n").map_err(io_err(path))
}

fn create_dir(path: &Path) -> Result<(), DatasetError> {
    std::fs::create_dir_all(path).map_err(io_err(path))
}

/// Optional byte blobs as base64 strings.
mod b64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vec<u8>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(bytes) => s.serialize_some(&crate::imageio::bytes_to_base64(bytes)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<u8>>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|t| crate::imageio::bytes_from_base64(&t).map_err(serde::de::Error::custom))
            .transpose()
    }
}

/// One RGB observation with its instruction and pass-through robot data.
#[derive(Clone, Debug, PartialEq)]
pub struct DemonstrationFrame {
    pub frame_id: String,
    pub episode_id: String,
    pub image: RgbImage,
    pub instruction: String,
    pub target_phrase: Option<String>,
    pub trajectory_footprint: Option<BinaryMask>,
    pub state: Option<Vec<u8>>,
    pub action: Option<Vec<u8>>,
}

impl DemonstrationFrame {
    pub fn new(
        frame_id: &str,
        episode_id: &str,
        image: RgbImage,
        instruction: &str,
    ) -> Result<Self, DatasetError> {
        if image.width() < MIN_IMAGE_SIDE || image.height() < MIN_IMAGE_SIDE {
            return Err(DatasetError::TooSmall {
                frame_id: frame_id.to_string(),
                width: image.width(),
                height: image.height(),
            });
        }
        Ok(Self {
            frame_id: frame_id.to_string(),
            episode_id: episode_id.to_string(),
            image,
            instruction: instruction.to_string(),
            target_phrase: None,
            trajectory_footprint: None,
            state: None,
            action: None,
        })
    }

    pub fn with_target_phrase(mut self, phrase: &str) -> Self {
        self.target_phrase = Some(phrase.to_string());
        self
    }

    pub fn with_footprint(mut self, footprint: BinaryMask) -> Result<Self, DatasetError> {
        if footprint.dims() != self.dims() {
            return Err(DatasetError::FootprintMismatch {
                frame_id: self.frame_id,
                image: (self.image.height(), self.image.width()),
                footprint: footprint.dims(),
            });
        }
        self.trajectory_footprint = Some(footprint);
        Ok(self)
    }

    pub fn with_blobs(mut self, state: Option<Vec<u8>>, action: Option<Vec<u8>>) -> Self {
        self.state = state;
        self.action = action;
        self
    }

    /// `(height, width)`.
    pub fn dims(&self) -> (u32, u32) {
        (self.image.height(), self.image.width())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextureRef {
    pub texture_id: String,
    pub category: String,
}

/// What an editor did beyond what the plan already records.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditProvenance {
    /// Labels of the edited objects, in plan order.
    pub labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub texture: Option<TextureRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<ReplacementPrompt>,
    /// Why a suggested replacement fell back to the same-category prompt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replacement_fallback: Option<String>,
    #[serde(default)]
    pub backends: Vec<BackendDescriptor>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EditedFrame {
    pub source_frame_id: String,
    pub episode_id: String,
    pub image: RgbImage,
    pub plan: EditPlan,
    pub variant_index: u32,
    pub edited_region: BinaryMask,
    pub provenance: EditProvenance,
    pub state: Option<Vec<u8>>,
    pub action: Option<Vec<u8>>,
}

impl EditedFrame {
    /// `<op>_<plan_hash>_<variant>`, the file stem under `edits/<frame_id>/`.
    pub fn file_stem(&self) -> String {
        edit_file_stem(self.plan.operation, &self.plan.plan_hash, self.variant_index)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let dims = (self.image.height(), self.image.width());
        if self.edited_region.dims() != dims {
            return Err(DatasetError::InvalidEdit(format!(
                "edited region is {:?}, image is {dims:?}",
                self.edited_region.dims()
            )));
        }
        if !self.plan.hash_is_current() {
            return Err(DatasetError::InvalidEdit(format!(
                "plan hash {} does not match plan content",
                self.plan.plan_hash
            )));
        }
        Ok(())
    }
}

pub fn edit_file_stem(op: EditOperation, plan_hash: &str, variant_index: u32) -> String {
    format!("{op}_{plan_hash}_{variant_index}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeEntry {
    pub episode_id: String,
    pub frames: Vec<String>,
}

/// Contents of `meta.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub schema_version: String,
    #[serde(default)]
    pub episodes: Vec<EpisodeEntry>,
}

/// Contents of `frames/<frame_id>.json`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameSidecar {
    pub instruction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_phrase: Option<String>,
    #[serde(default, with = "b64", skip_serializing_if = "Option::is_none")]
    pub state: Option<Vec<u8>>,
    #[serde(default, with = "b64", skip_serializing_if = "Option::is_none")]
    pub action: Option<Vec<u8>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_id: String,
    pub episode_id: String,
    /// `(height, width)` read from the PNG header.
    pub dims: (u32, u32),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub footprint_dims: Option<(u32, u32)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditRecord {
    pub source_frame_id: String,
    pub operation: EditOperation,
    pub plan_hash: String,
    pub variant_index: u32,
    pub image_path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: String,
    pub frames: Vec<FrameRecord>,
    pub edits: Vec<EditRecord>,
}

/// A per-entry problem found while loading; the entry is left out of the
/// manifest and everything else still loads.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoadError {
    /// Frame id, or the edit sidecar path for malformed edits.
    pub frame_id: String,
    pub message: String,
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.frame_id, self.message)
    }
}

/// Manifest plus on-demand access to frame pixels.
#[derive(Clone, Debug)]
pub struct LoadedDataset {
    pub root: PathBuf,
    pub manifest: DatasetManifest,
    pub errors: Vec<LoadError>,
}

impl LoadedDataset {
    pub fn frame_ids(&self) -> impl Iterator<Item = &str> {
        self.manifest.frames.iter().map(|f| f.frame_id.as_str())
    }

    pub fn len(&self) -> usize {
        self.manifest.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.frames.is_empty()
    }

    /// Decode one frame. Safe to call from several threads at once.
    pub fn frame(&self, frame_id: &str) -> Result<DemonstrationFrame, DatasetError> {
        let record = self
            .manifest
            .frames
            .iter()
            .find(|f| f.frame_id == frame_id)
            .ok_or_else(|| DatasetError::UnknownFrame(frame_id.to_string()))?;
        read_frame(&self.root, &record.frame_id, &record.episode_id)
    }
}

fn frame_paths(root: &Path, frame_id: &str) -> (PathBuf, PathBuf, PathBuf) {
    let frames = root.join(FRAMES_DIR);
    (
        frames.join(format!("{frame_id}.png")),
        frames.join(format!("{frame_id}.json")),
        root.join(FOOTPRINTS_DIR).join(format!("{frame_id}.png")),
    )
}

fn read_frame(root: &Path, frame_id: &str, episode_id: &str) -> Result<DemonstrationFrame, DatasetError> {
    let (png, json, footprint) = frame_paths(root, frame_id);
    let sidecar: FrameSidecar = read_json(&json)?;
    let image = image::open(&png)
        .map_err(|source| DatasetError::Image {
            path: png.clone(),
            source,
        })?
        .into_rgb8();
    let mut frame = DemonstrationFrame::new(frame_id, episode_id, image, &sidecar.instruction)?
        .with_blobs(sidecar.state, sidecar.action);
    frame.target_phrase = sidecar.target_phrase;
    if footprint.exists() {
        frame = frame.with_footprint(BinaryMask::load_png(&footprint)?)?;
    }
    Ok(frame)
}

/// Cheap per-frame checks: files present, sidecar parses, PNG header readable.
fn probe_frame(root: &Path, frame_id: &str, episode_id: &str) -> Result<FrameRecord, String> {
    let (png, json, footprint) = frame_paths(root, frame_id);
    read_json::<FrameSidecar>(&json).map_err(|e| e.to_string())?;
    let (w, h) = image::image_dimensions(&png).map_err(|e| format!("{}: {e}", png.display()))?;
    let footprint_dims = if footprint.exists() {
        let (fw, fh) = image::image_dimensions(&footprint)
            .map_err(|e| format!("{}: {e}", footprint.display()))?;
        Some((fh, fw))
    } else {
        None
    };
    Ok(FrameRecord {
        frame_id: frame_id.to_string(),
        episode_id: episode_id.to_string(),
        dims: (h, w),
        footprint_dims,
    })
}

/// Read `meta.json`, probe every listed frame and index existing edits.
/// Pixels are decoded later through [`LoadedDataset::frame`]. Nothing on
/// disk is modified.
pub fn load_dataset(root: &Path) -> Result<LoadedDataset, DatasetError> {
    let meta_path = root.join(META_FILE);
    if !meta_path.is_file() {
        return Err(DatasetError::MissingMeta(meta_path));
    }
    let meta: DatasetMeta = read_json(&meta_path)?;
    if meta.schema_version != SCHEMA_VERSION {
        return Err(DatasetError::SchemaVersion(meta.schema_version));
    }
    let mut frames = Vec::new();
    let mut errors = Vec::new();
    for episode in &meta.episodes {
        for frame_id in &episode.frames {
            match probe_frame(root, frame_id, &episode.episode_id) {
                Ok(record) => frames.push(record),
                Err(message) => errors.push(LoadError {
                    frame_id: frame_id.clone(),
                    message,
                }),
            }
        }
    }
    let edits = index_edits(root, &mut errors)?;
    Ok(LoadedDataset {
        root: root.to_path_buf(),
        manifest: DatasetManifest {
            schema_version: meta.schema_version,
            frames,
            edits,
        },
        errors,
    })
}

/// Records for every `edits/<frame_id>/*.json` sidecar under `root`, sorted
/// by path. Unreadable sidecars are pushed onto `errors`. A missing
/// `edits/` directory yields no records.
pub fn index_edits(
    root: &Path,
    errors: &mut Vec<LoadError>,
) -> Result<Vec<EditRecord>, DatasetError> {
    let edits_dir = root.join(EDITS_DIR);
    if !edits_dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut sidecars = Vec::new();
    for dir in std::fs::read_dir(&edits_dir).map_err(io_err(&edits_dir))? {
        let dir = dir.map_err(io_err(&edits_dir))?.path();
        if !dir.is_dir() {
            continue;
        }
        for entry in std::fs::read_dir(&dir).map_err(io_err(&dir))? {
            let path = entry.map_err(io_err(&dir))?.path();
            if path.extension().is_some_and(|e| e == "json") {
                sidecars.push(path);
            }
        }
    }
    sidecars.sort();
    let mut records = Vec::new();
    for path in sidecars {
        match read_json::<EditSidecar>(&path) {
            Ok(s) => records.push(EditRecord {
                source_frame_id: s.source_frame_id,
                operation: s.plan.operation,
                plan_hash: s.plan.plan_hash,
                variant_index: s.variant_index,
                image_path: path.with_extension("png"),
            }),
            Err(e) => errors.push(LoadError {
                frame_id: path.display().to_string(),
                message: e.to_string(),
            }),
        }
    }
    Ok(records)
}

/// Write frames in the input layout. Used to build datasets
/// programmatically; existing `meta.json` is replaced.
pub fn write_dataset(root: &Path, frames: &[DemonstrationFrame]) -> Result<(), DatasetError> {
    let frames_dir = root.join(FRAMES_DIR);
    create_dir(&frames_dir)?;
    let mut episodes: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for frame in frames {
        let (png, json, footprint) = frame_paths(root, &frame.frame_id);
        frame.image.save(&png).map_err(|source| DatasetError::Image {
            path: png.clone(),
            source,
        })?;
        let sidecar = FrameSidecar {
            instruction: frame.instruction.clone(),
            target_phrase: frame.target_phrase.clone(),
            state: frame.state.clone(),
            action: frame.action.clone(),
        };
        write_json(&json, &sidecar)?;
        if let Some(fp) = &frame.trajectory_footprint {
            create_dir(&root.join(FOOTPRINTS_DIR))?;
            fp.save_png(&footprint)?;
        }
        episodes
            .entry(frame.episode_id.as_str())
            .or_default()
            .push(frame.frame_id.clone());
    }
    let meta = DatasetMeta {
        schema_version: SCHEMA_VERSION.to_string(),
        episodes: episodes
            .into_iter()
            .map(|(episode_id, frames)| EpisodeEntry {
                episode_id: episode_id.to_string(),
                frames,
            })
            .collect(),
    };
    write_json(&root.join(META_FILE), &meta)
}

/// Contents of an edit's `.json` sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EditSidecar {
    pub schema_version: String,
    pub source_frame_id: String,
    pub episode_id: String,
    pub variant_index: u32,
    pub plan: EditPlan,
    pub edited_region: BinaryMask,
    pub provenance: EditProvenance,
    #[serde(default, with = "b64", skip_serializing_if = "Option::is_none")]
    pub state: Option<Vec<u8>>,
    #[serde(default, with = "b64", skip_serializing_if = "Option::is_none")]
    pub action: Option<Vec<u8>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SaveOptions {
    pub overwrite: bool,
    /// Output image format; only `png` is accepted.
    pub format: String,
}

impl Default for SaveOptions {
    fn default() -> Self {
        Self {
            overwrite: false,
            format: "png".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WrittenPaths {
    pub image: PathBuf,
    pub sidecar: PathBuf,
}

pub fn edit_paths(root: &Path, source_frame_id: &str, stem: &str) -> WrittenPaths {
    let dir = root.join(EDITS_DIR).join(source_frame_id);
    WrittenPaths {
        image: dir.join(format!("{stem}.png")),
        sidecar: dir.join(format!("{stem}.json")),
    }
}

/// Write the edited image as PNG plus its sidecar. Distinct workers may
/// write distinct frames concurrently; one frame's directory needs a single
/// writer.
pub fn save_edited(
    edited: &EditedFrame,
    root: &Path,
    options: &SaveOptions,
) -> Result<WrittenPaths, DatasetError> {
    if !options.format.eq_ignore_ascii_case("png") {
        return Err(DatasetError::LossyFormat(options.format.clone()));
    }
    edited.validate()?;
    let paths = edit_paths(root, &edited.source_frame_id, &edited.file_stem());
    if !options.overwrite {
        for p in [&paths.image, &paths.sidecar] {
            if p.exists() {
                return Err(DatasetError::Collision(p.clone()));
            }
        }
    }
    create_dir(paths.image.parent().expect("edit path has a parent"))?;
    edited
        .image
        .save_with_format(&paths.image, image::ImageFormat::Png)
        .map_err(|source| DatasetError::Image {
            path: paths.image.clone(),
            source,
        })?;
    let sidecar = EditSidecar {
        schema_version: SCHEMA_VERSION.to_string(),
        source_frame_id: edited.source_frame_id.clone(),
        episode_id: edited.episode_id.clone(),
        variant_index: edited.variant_index,
        plan: edited.plan.clone(),
        edited_region: edited.edited_region.clone(),
        provenance: edited.provenance.clone(),
        state: edited.state.clone(),
        action: edited.action.clone(),
    };
    write_json(&paths.sidecar, &sidecar)?;
    Ok(paths)
}

/// Read an edit back from its sidecar (the image sits next to it).
pub fn load_edited(sidecar_path: &Path) -> Result<EditedFrame, DatasetError> {
    let sidecar: EditSidecar = read_json(sidecar_path)?;
    let image_path = sidecar_path.with_extension("png");
    let image = image::open(&image_path)
        .map_err(|source| DatasetError::Image {
            path: image_path.clone(),
            source,
        })?
        .into_rgb8();
    let edited = EditedFrame {
        source_frame_id: sidecar.source_frame_id,
        episode_id: sidecar.episode_id,
        image,
        plan: sidecar.plan,
        variant_index: sidecar.variant_index,
        edited_region: sidecar.edited_region,
        provenance: sidecar.provenance,
        state: sidecar.state,
        action: sidecar.action,
    };
    edited.validate()?;
    Ok(edited)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    DuplicateFrameId(String),
    ImageTooSmall {
        frame_id: String,
        dims: (u32, u32),
    },
    FootprintDimensionMismatch {
        frame_id: String,
        image: (u32, u32),
        footprint: (u32, u32),
    },
    DanglingEdit {
        source_frame_id: String,
        image_path: PathBuf,
    },
    DuplicateEdit {
        source_frame_id: String,
        plan_hash: String,
        variant_index: u32,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateFrameId(id) => write!(f, "duplicate frame id `{id}`"),
            Violation::ImageTooSmall { frame_id, dims } => write!(
                f,
                "frame `{frame_id}` is {}x{} (w x h), below {MIN_IMAGE_SIDE} px",
                dims.1, dims.0
            ),
            Violation::FootprintDimensionMismatch {
                frame_id,
                image,
                footprint,
            } => write!(
                f,
                "frame `{frame_id}`: footprint {}x{} does not match image {}x{} (w x h)",
                footprint.1, footprint.0, image.1, image.0
            ),
            Violation::DanglingEdit {
                source_frame_id,
                image_path,
            } => write!(
                f,
                "edit {} references missing frame `{source_frame_id}`",
                image_path.display()
            ),
            Violation::DuplicateEdit {
                source_frame_id,
                plan_hash,
                variant_index,
            } => write!(
                f,
                "edit ({source_frame_id}, {plan_hash}, {variant_index}) recorded twice"
            ),
        }
    }
}

/// Every invariant violation in the manifest, in a stable order. Pure.
pub fn validate_dataset(manifest: &DatasetManifest) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for frame in &manifest.frames {
        let count = seen.entry(frame.frame_id.as_str()).or_default();
        *count += 1;
        if *count == 2 {
            violations.push(Violation::DuplicateFrameId(frame.frame_id.clone()));
        }
        if frame.dims.0 < MIN_IMAGE_SIDE || frame.dims.1 < MIN_IMAGE_SIDE {
            violations.push(Violation::ImageTooSmall {
                frame_id: frame.frame_id.clone(),
                dims: frame.dims,
            });
        }
        if let Some(fp) = frame.footprint_dims.filter(|fp| *fp != frame.dims) {
            violations.push(Violation::FootprintDimensionMismatch {
                frame_id: frame.frame_id.clone(),
                image: frame.dims,
                footprint: fp,
            });
        }
    }
    let mut edit_keys = BTreeMap::new();
    for edit in &manifest.edits {
        if !seen.contains_key(edit.source_frame_id.as_str()) {
            violations.push(Violation::DanglingEdit {
                source_frame_id: edit.source_frame_id.clone(),
                image_path: edit.image_path.clone(),
            });
        }
        let key = (&edit.source_frame_id, &edit.plan_hash, edit.variant_index);
        if edit_keys.insert(key, ()).is_some() {
            violations.push(Violation::DuplicateEdit {
                source_frame_id: edit.source_frame_id.clone(),
                plan_hash: edit.plan_hash.clone(),
                variant_index: edit.variant_index,
            });
        }
    }
    violations
}
