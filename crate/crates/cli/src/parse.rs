//! `parse`: one cached scene graph per frame.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;

use sceneaug_core::backends::BackendKind;
use sceneaug_core::dataset::{load_dataset, LoadedDataset};
use sceneaug_core::scene::build_scene_graph;
use sceneaug_core::SceneGraph;

use crate::backends::BackendSet;
use crate::config::PipelineConfig;
use crate::{ensure_dir, worker_pool, write_json, SkipEntry, Status};

pub const SCENES_DIR: &str = "scenes";
pub const PARSE_SKIPS_FILE: &str = "parse_skips.json";

pub fn scene_cache_path(out: &Path, frame_id: &str) -> PathBuf {
    out.join(SCENES_DIR).join(format!("{frame_id}.json"))
}

pub fn load_error_skips(loaded: &LoadedDataset, stage: &str) -> Vec<SkipEntry> {
    loaded
        .errors
        .iter()
        .map(|e| SkipEntry {
            frame_id: e.frame_id.clone(),
            stage: stage.to_string(),
            reason: e.message.clone(),
        })
        .collect()
}

/// Decode the frame and build its scene graph.
pub fn parse_frame(
    loaded: &LoadedDataset,
    frame_id: &str,
    backends: &BackendSet,
) -> Result<SceneGraph, SkipEntry> {
    let skip = |reason: String| SkipEntry {
        frame_id: frame_id.to_string(),
        stage: "parse".into(),
        reason,
    };
    let frame = loaded.frame(frame_id).map_err(|e| skip(e.to_string()))?;
    build_scene_graph(&frame, backends.detector.as_ref(), backends.segmenter.as_ref())
        .map_err(|e| skip(e.to_string()))
}

pub fn write_scene(out: &Path, scene: &SceneGraph) -> Result<()> {
    write_json(&scene_cache_path(out, &scene.frame_id), scene)
}

pub fn read_scene(path: &Path) -> Result<SceneGraph> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn run(dataset: &Path, out: &Path, config: &PipelineConfig) -> Result<Status> {
    config.require_endpoints(&[BackendKind::Detector, BackendKind::Segmenter])?;
    let loaded = load_dataset(dataset)
        .with_context(|| format!("loading dataset {}", dataset.display()))?;
    ensure_dir(&out.join(SCENES_DIR))?;
    BackendSet::build(config, Some(dataset))?;

    let ids: Vec<String> = loaded.frame_ids().map(str::to_string).collect();
    let pool = worker_pool(config.workers)?;
    let results: Vec<Result<Result<(), SkipEntry>>> = pool.install(|| {
        ids.par_iter()
            .map_init(
                || BackendSet::build(config, Some(dataset)),
                |backends, id| {
                    let backends = backends.as_ref().map_err(|e| anyhow::anyhow!("{e}"))?;
                    match parse_frame(&loaded, id, backends) {
                        Ok(scene) => write_scene(out, &scene).map(Ok),
                        Err(skip) => {
                            // Drop a cache left by an earlier successful run.
                            let _ = std::fs::remove_file(scene_cache_path(out, id));
                            Ok(Err(skip))
                        }
                    }
                },
            )
            .collect()
    });

    let mut skips = load_error_skips(&loaded, "parse");
    let mut parsed = 0;
    for r in results {
        match r? {
            Ok(()) => parsed += 1,
            Err(skip) => skips.push(skip),
        }
    }
    skips.sort();
    write_json(&out.join(PARSE_SKIPS_FILE), &skips)?;
    println!("parsed {parsed} frame(s), skipped {}", skips.len());
    for s in &skips {
        log::warn!("skipped {}: {}", s.frame_id, s.reason);
    }
    Ok(Status::from_skips(skips.len()))
}
