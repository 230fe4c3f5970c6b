//! Backend construction from configuration. Each worker builds its own set,
//! so remote mode gives every worker its own client session.

use std::path::Path;

use anyhow::Result;

use sceneaug_core::backends::remote::RemoteBackend;
use sceneaug_core::backends::stubs::{
    AnnotationDetector, ColorHistogram, DictionarySuggester, FlatColorObject, RectMaskSegmenter,
    RingMeanFill,
};
use sceneaug_core::backends::{
    BackendKind, Detector, FeatureExtractor, MaskInpainter, ObjectSuggester, PromptedInpainter,
    Segmenter,
};
use sceneaug_core::editors::texture::TextureStore;
use sceneaug_core::editors::EditBackends;

use crate::config::{BackendMode, PipelineConfig};

pub const ANNOTATIONS_DIR: &str = "annotations";

pub struct BackendSet {
    pub detector: Box<dyn Detector>,
    pub segmenter: Box<dyn Segmenter>,
    pub mask_inpainter: Box<dyn MaskInpainter>,
    pub prompted_inpainter: Box<dyn PromptedInpainter>,
    pub suggester: Box<dyn ObjectSuggester>,
    pub features: Box<dyn FeatureExtractor>,
}

fn remote(config: &PipelineConfig, kind: BackendKind) -> Result<RemoteBackend> {
    Ok(RemoteBackend::new(config.backends.remote_config(kind)?))
}

impl BackendSet {
    /// Stub mode reads detections from the annotation directory (default
    /// `<dataset>/annotations`). Remote mode needs an endpoint per role;
    /// roles without one fall back to the stub so commands that never use
    /// them still run.
    pub fn build(config: &PipelineConfig, dataset: Option<&Path>) -> Result<Self> {
        let annotations = config
            .backends
            .annotations
            .clone()
            .or_else(|| dataset.map(|d| d.join(ANNOTATIONS_DIR)))
            .unwrap_or_else(|| ANNOTATIONS_DIR.into());
        let mut set = BackendSet {
            detector: Box::new(AnnotationDetector::new(annotations)),
            segmenter: Box::new(RectMaskSegmenter),
            mask_inpainter: Box::new(RingMeanFill),
            prompted_inpainter: Box::new(FlatColorObject),
            suggester: Box::new(DictionarySuggester::default()),
            features: Box::new(ColorHistogram),
        };
        if config.backends.mode == BackendMode::Remote {
            let has = |k| config.backends.endpoint(k).is_some();
            if has(BackendKind::Detector) {
                set.detector = Box::new(remote(config, BackendKind::Detector)?);
            }
            if has(BackendKind::Segmenter) {
                set.segmenter = Box::new(remote(config, BackendKind::Segmenter)?);
            }
            if has(BackendKind::MaskInpainter) {
                set.mask_inpainter = Box::new(remote(config, BackendKind::MaskInpainter)?);
            }
            if has(BackendKind::PromptedInpainter) {
                set.prompted_inpainter = Box::new(remote(config, BackendKind::PromptedInpainter)?);
            }
            if has(BackendKind::Suggester) {
                set.suggester = Box::new(remote(config, BackendKind::Suggester)?);
            }
            if has(BackendKind::FeatureExtractor) {
                set.features = Box::new(remote(config, BackendKind::FeatureExtractor)?);
            }
        }
        Ok(set)
    }

    pub fn editors<'a>(&'a self, textures: &'a TextureStore) -> EditBackends<'a> {
        EditBackends {
            mask_inpainter: self.mask_inpainter.as_ref(),
            prompted_inpainter: self.prompted_inpainter.as_ref(),
            suggester: self.suggester.as_ref(),
            textures,
        }
    }
}
