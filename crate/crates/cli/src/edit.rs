//! `edit`: plan and execute edits for every frame.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use sceneaug_core::backends::BackendKind;
use sceneaug_core::dataset::{load_dataset, save_edited, LoadedDataset, SaveOptions};
use sceneaug_core::editors::texture::TextureStore;
use sceneaug_core::editors::{self, EditError};
use sceneaug_core::planner::{keyed_seed, plan_edits};
use sceneaug_core::{EditOperation, PlannerConfig, SceneGraph};

use crate::backends::BackendSet;
use crate::config::{PipelineConfig, PlanScope};
use crate::parse::{load_error_skips, parse_frame, read_scene, scene_cache_path, write_scene, SCENES_DIR};
use crate::{ensure_dir, worker_pool, write_json, SkipEntry, Status};

pub const EDIT_SUMMARY_FILE: &str = "edit_summary.json";
pub const EDIT_SKIPS_FILE: &str = "edit_skips.json";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    /// Frames that produced at least one plan for this operation.
    pub frames: usize,
    pub plans: usize,
    pub written: usize,
    pub rejected_by_safety: usize,
    pub failed: usize,
}

impl OpCounts {
    fn add(&mut self, other: &OpCounts) {
        self.frames += other.frames;
        self.plans += other.plans;
        self.written += other.written;
        self.rejected_by_safety += other.rejected_by_safety;
        self.failed += other.failed;
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditSummary {
    pub seed: u64,
    pub frames_total: usize,
    pub frames_edited: usize,
    pub frames_skipped: usize,
    pub operations: BTreeMap<EditOperation, OpCounts>,
    pub warnings: Vec<String>,
}

impl EditSummary {
    pub fn total(&self) -> OpCounts {
        let mut t = OpCounts::default();
        for c in self.operations.values() {
            t.add(c);
        }
        t
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<10} {:>7} {:>7} {:>8} {:>9} {:>7}",
            "operation", "frames", "plans", "written", "rejected", "failed"
        );
        let mut row = |name: &str, c: &OpCounts| {
            let _ = writeln!(
                s,
                "{:<10} {:>7} {:>7} {:>8} {:>9} {:>7}",
                name, c.frames, c.plans, c.written, c.rejected_by_safety, c.failed
            );
        };
        for (op, c) in &self.operations {
            row(op.as_str(), c);
        }
        row("total", &self.total());
        let _ = writeln!(
            s,
            "frames: {} total, {} edited, {} skipped",
            self.frames_total, self.frames_edited, self.frames_skipped
        );
        s
    }
}

struct FrameOutcome {
    counts: BTreeMap<EditOperation, OpCounts>,
    warnings: Vec<String>,
    skips: Vec<SkipEntry>,
    edited: bool,
}

/// Cached scene graph when it matches the frame, otherwise a fresh parse
/// that refreshes the cache.
fn scene_for(
    loaded: &LoadedDataset,
    frame_id: &str,
    dims: (u32, u32),
    out: &Path,
    backends: &BackendSet,
) -> Result<Result<SceneGraph, SkipEntry>> {
    let cache = scene_cache_path(out, frame_id);
    if cache.is_file() {
        let scene = read_scene(&cache)?;
        if scene.frame_id == frame_id && scene.image_size == dims {
            return Ok(Ok(scene));
        }
        log::warn!("scene cache {} does not match its frame; reparsing", cache.display());
    }
    match parse_frame(loaded, frame_id, backends) {
        Ok(scene) => {
            write_scene(out, &scene)?;
            Ok(Ok(scene))
        }
        Err(skip) => Ok(Err(skip)),
    }
}

struct EditContext<'a> {
    loaded: &'a LoadedDataset,
    out: &'a Path,
    planner: &'a PlannerConfig,
    textures: &'a TextureStore,
    seed: u64,
    scope: PlanScope,
}

fn edit_frame(ctx: &EditContext, frame_id: &str, backends: &BackendSet) -> Result<FrameOutcome> {
    let mut outcome = FrameOutcome {
        counts: BTreeMap::new(),
        warnings: Vec::new(),
        skips: Vec::new(),
        edited: false,
    };
    let frame = match ctx.loaded.frame(frame_id) {
        Ok(f) => f,
        Err(e) => {
            outcome.skips.push(SkipEntry {
                frame_id: frame_id.to_string(),
                stage: "load".into(),
                reason: e.to_string(),
            });
            return Ok(outcome);
        }
    };
    let scene = match scene_for(ctx.loaded, frame_id, frame.dims(), ctx.out, backends)? {
        Ok(s) => s,
        Err(skip) => {
            outcome.skips.push(skip);
            return Ok(outcome);
        }
    };
    let key = match ctx.scope {
        PlanScope::Frame => &frame.frame_id,
        PlanScope::Episode => &frame.episode_id,
    };
    let plans = plan_edits(&scene, ctx.planner, keyed_seed(ctx.seed, key))?;
    outcome.warnings = plans.warnings;
    let editors = backends.editors(ctx.textures);
    let save = SaveOptions {
        overwrite: true,
        ..SaveOptions::default()
    };
    for planned in &plans.plans {
        let op = planned.plan.operation;
        let counts = outcome.counts.entry(op).or_default();
        counts.frames = 1;
        counts.plans += 1;
        match editors::execute(&frame, &scene, planned, editors) {
            Ok(edited) => {
                save_edited(&edited, ctx.out, &save)?;
                counts.written += 1;
            }
            Err(EditError::Rejected(verdict)) => {
                log::info!("{frame_id}: {op} variant {} rejected: {verdict:?}", planned.variant_index);
                counts.rejected_by_safety += 1;
            }
            Err(e) => {
                counts.failed += 1;
                outcome.skips.push(SkipEntry {
                    frame_id: frame_id.to_string(),
                    stage: "edit".into(),
                    reason: format!("{op} variant {}: {e}", planned.variant_index),
                });
            }
        }
    }
    outcome.edited = true;
    Ok(outcome)
}

pub fn run(dataset: &Path, out: &Path, config: &PipelineConfig) -> Result<Status> {
    let Some(seed) = config.seed else {
        bail!("edit runs need a seed: pass --seed or set `seed` in the config file");
    };
    let mut roles = vec![BackendKind::Detector, BackendKind::Segmenter];
    for op in &config.planner.operations_enabled {
        match op {
            EditOperation::Remove => roles.push(BackendKind::MaskInpainter),
            EditOperation::Replace => {
                roles.extend([BackendKind::PromptedInpainter, BackendKind::Suggester])
            }
            EditOperation::Restyle => {}
        }
    }
    config.require_endpoints(&roles)?;
    let textures = match &config.textures {
        Some(dir) => TextureStore::load(dir)
            .with_context(|| format!("loading texture store {}", dir.display()))?,
        None => TextureStore::default(),
    };
    let mut planner = config.planner.clone();
    if planner.texture_pool.is_empty() {
        planner.texture_pool = textures.ids();
    }
    if let Some(missing) = planner.texture_pool.iter().find(|t| textures.get(t).is_none()) {
        bail!("texture `{missing}` in the planner pool is not in the texture store");
    }
    let loaded = load_dataset(dataset)
        .with_context(|| format!("loading dataset {}", dataset.display()))?;
    ensure_dir(&out.join(SCENES_DIR))?;
    BackendSet::build(config, Some(dataset))?;

    let ctx = EditContext {
        loaded: &loaded,
        out,
        planner: &planner,
        textures: &textures,
        seed,
        scope: config.plan_scope,
    };
    let ids: Vec<String> = loaded.frame_ids().map(str::to_string).collect();
    let pool = worker_pool(config.workers)?;
    let results: Vec<Result<FrameOutcome>> = pool.install(|| {
        ids.par_iter()
            .map_init(
                || BackendSet::build(config, Some(dataset)),
                |backends, id| {
                    let backends = backends.as_ref().map_err(|e| anyhow::anyhow!("{e}"))?;
                    edit_frame(&ctx, id, backends).with_context(|| format!("frame {id}"))
                },
            )
            .collect()
    });

    let mut summary = EditSummary {
        seed,
        frames_total: ids.len() + loaded.errors.len(),
        ..EditSummary::default()
    };
    let mut skips = load_error_skips(&loaded, "load");
    for r in results {
        let outcome = r?;
        for (op, c) in &outcome.counts {
            summary.operations.entry(*op).or_default().add(c);
        }
        summary.warnings.extend(outcome.warnings);
        if outcome.edited {
            summary.frames_edited += 1;
        }
        skips.extend(outcome.skips);
    }
    summary.frames_skipped = summary.frames_total - summary.frames_edited;
    skips.sort();
    write_json(&out.join(EDIT_SUMMARY_FILE), &summary)?;
    write_json(&out.join(EDIT_SKIPS_FILE), &skips)?;
    print!("{}", summary.table());
    for s in &skips {
        log::warn!("{} ({}): {}", s.frame_id, s.stage, s.reason);
    }
    Ok(Status::from_skips(skips.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_totals_rows() {
        let mut s = EditSummary {
            frames_total: 3,
            frames_edited: 3,
            ..EditSummary::default()
        };
        s.operations.insert(
            EditOperation::Remove,
            OpCounts {
                frames: 3,
                plans: 6,
                written: 5,
                rejected_by_safety: 1,
                failed: 0,
            },
        );
        s.operations.insert(
            EditOperation::Replace,
            OpCounts {
                frames: 3,
                plans: 6,
                written: 4,
                rejected_by_safety: 1,
                failed: 1,
            },
        );
        let t = s.total();
        assert_eq!((t.plans, t.written, t.rejected_by_safety, t.failed), (12, 9, 2, 1));
        let table = s.table();
        assert!(table.lines().any(|l| l.starts_with("total") && l.split_whitespace().eq(["total", "6", "12", "9", "2", "1"])));
    }
}
