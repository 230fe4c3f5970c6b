//! `eval`: SSIM, Fréchet distance and APA tables.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use sceneaug_core::backends::{BackendKind, FeatureExtractor};
use sceneaug_core::dataset::{index_edits, load_dataset, load_edited, LoadedDataset, META_FILE};
use sceneaug_core::metrics::apa::{apa, load_apa_jsonl, ApaWarningKind};
use sceneaug_core::metrics::frechet::fid;
use sceneaug_core::metrics::ssim::{ssim_rgb, SsimParams};

use crate::backends::BackendSet;
use crate::config::PipelineConfig;
use crate::{ensure_dir, plot, write_json, SkipEntry, Status};

pub const SSIM_CSV: &str = "ssim.csv";
pub const FID_CSV: &str = "fid.csv";
pub const APA_CSV: &str = "apa.csv";
pub const SSIM_FIGURE: &str = "ssim_histogram.svg";
pub const FID_FIGURE: &str = "fid_by_operation.svg";
/// Group name for plain dataset frames, as opposed to edit operations.
pub const FRAMES_GROUP: &str = "frames";
const EMBED_BATCH: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsimRow {
    pub frame_id: String,
    pub group: String,
    pub item: String,
    pub ssim: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidRow {
    pub group: String,
    pub fid: f64,
    pub reference_count: usize,
    pub candidate_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApaRow {
    pub level: String,
    pub apa_percent: f64,
    pub samples: usize,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .with_context(|| format!("parsing {}", path.display()))
}

/// An image to compare against the reference frame with the same id.
struct CandidateItem {
    frame_id: String,
    group: String,
    item: String,
    source: ItemSource,
}

enum ItemSource {
    Frame,
    Edit(std::path::PathBuf),
}

struct Candidates {
    dataset: Option<LoadedDataset>,
    items: Vec<CandidateItem>,
    skips: Vec<SkipEntry>,
}

impl Candidates {
    /// Frames from `meta.json` when present, plus every indexed edit.
    fn collect(root: &Path) -> Result<Self> {
        let mut skips = Vec::new();
        let mut items = Vec::new();
        let dataset = if root.join(META_FILE).is_file() {
            let d = load_dataset(root).with_context(|| format!("loading {}", root.display()))?;
            for e in &d.errors {
                skips.push(SkipEntry {
                    frame_id: e.frame_id.clone(),
                    stage: "load".into(),
                    reason: e.message.clone(),
                });
            }
            items.extend(d.frame_ids().map(|id| CandidateItem {
                frame_id: id.to_string(),
                group: FRAMES_GROUP.into(),
                item: id.to_string(),
                source: ItemSource::Frame,
            }));
            Some(d)
        } else {
            None
        };
        let mut errors = Vec::new();
        let edits = index_edits(root, &mut errors)?;
        for e in errors {
            skips.push(SkipEntry {
                frame_id: e.frame_id,
                stage: "load".into(),
                reason: e.message,
            });
        }
        for e in edits {
            let item = e
                .image_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            items.push(CandidateItem {
                frame_id: e.source_frame_id,
                group: e.operation.as_str().to_string(),
                item,
                source: ItemSource::Edit(e.image_path.with_extension("json")),
            });
        }
        if items.is_empty() {
            bail!("{} holds neither dataset frames nor edits", root.display());
        }
        Ok(Self {
            dataset,
            items,
            skips,
        })
    }

    fn image(&self, item: &CandidateItem) -> Result<RgbImage> {
        match &item.source {
            ItemSource::Frame => Ok(self
                .dataset
                .as_ref()
                .expect("frame items come from a dataset")
                .frame(&item.frame_id)?
                .image),
            ItemSource::Edit(sidecar) => Ok(load_edited(sidecar)?.image),
        }
    }
}

fn skip(frame_id: &str, stage: &str, reason: impl ToString) -> SkipEntry {
    SkipEntry {
        frame_id: frame_id.to_string(),
        stage: stage.to_string(),
        reason: reason.to_string(),
    }
}

fn finish(out: &Path, name: &str, mut skips: Vec<SkipEntry>) -> Result<Status> {
    skips.sort();
    write_json(&out.join(format!("{name}_skips.json")), &skips)?;
    for s in &skips {
        log::warn!("{} ({}): {}", s.frame_id, s.stage, s.reason);
    }
    Ok(Status::from_skips(skips.len()))
}

pub fn run_ssim(reference: &Path, candidate: &Path, out: &Path, plot_figure: bool) -> Result<Status> {
    let reference = load_dataset(reference)
        .with_context(|| format!("loading reference {}", reference.display()))?;
    let candidates = Candidates::collect(candidate)?;
    ensure_dir(out)?;
    let params = SsimParams::default();
    let results: Vec<Result<SsimRow, SkipEntry>> = candidates
        .items
        .par_iter()
        .map(|item| {
            let stage = "ssim";
            let truth = reference
                .frame(&item.frame_id)
                .map_err(|e| skip(&item.frame_id, stage, format!("reference: {e}")))?;
            let image = candidates
                .image(item)
                .map_err(|e| skip(&item.frame_id, stage, format!("{}: {e}", item.item)))?;
            let value = ssim_rgb(&truth.image, &image, &params)
                .map_err(|e| skip(&item.frame_id, stage, format!("{}: {e}", item.item)))?;
            Ok(SsimRow {
                frame_id: item.frame_id.clone(),
                group: item.group.clone(),
                item: item.item.clone(),
                ssim: value,
            })
        })
        .collect();
    let mut rows = Vec::new();
    let mut skips = candidates.skips;
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(s) => skips.push(s),
        }
    }
    rows.sort_by(|a, b| (&a.group, &a.frame_id, &a.item).cmp(&(&b.group, &b.frame_id, &b.item)));
    write_csv(&out.join(SSIM_CSV), &rows)?;
    if plot_figure && !rows.is_empty() {
        let values: Vec<f64> = rows.iter().map(|r| r.ssim).collect();
        plot::ssim_histogram(&out.join(SSIM_FIGURE), &values)?;
    }
    println!("ssim: {} pair(s), {} skipped", rows.len(), skips.len());
    finish(out, "ssim", skips)
}

fn embed_all(extractor: &dyn FeatureExtractor, images: &[RgbImage]) -> Result<Vec<Vec<f64>>> {
    let mut features = Vec::with_capacity(images.len());
    for chunk in images.chunks(EMBED_BATCH) {
        features.extend(extractor.embed(chunk)?);
    }
    Ok(features)
}

pub fn run_fid(
    reference: &Path,
    candidate: &Path,
    out: &Path,
    plot_figure: bool,
    config: &PipelineConfig,
) -> Result<Status> {
    config.require_endpoints(&[BackendKind::FeatureExtractor])?;
    let backends = BackendSet::build(config, None)?;
    let extractor = backends.features.as_ref();
    let reference_set = load_dataset(reference)
        .with_context(|| format!("loading reference {}", reference.display()))?;
    let candidates = Candidates::collect(candidate)?;
    ensure_dir(out)?;
    let mut skips = candidates.skips.clone();

    let mut reference_images = Vec::new();
    for id in reference_set.frame_ids() {
        match reference_set.frame(id) {
            Ok(f) => reference_images.push(f.image),
            Err(e) => skips.push(skip(id, "fid", e)),
        }
    }
    let reference_features = embed_all(extractor, &reference_images)?;

    let mut groups: BTreeMap<&str, Vec<RgbImage>> = BTreeMap::new();
    for item in &candidates.items {
        match candidates.image(item) {
            Ok(img) => groups.entry(item.group.as_str()).or_default().push(img),
            Err(e) => skips.push(skip(&item.frame_id, "fid", e)),
        }
    }
    let mut rows = Vec::new();
    for (group, images) in groups {
        let features = embed_all(extractor, &images)?;
        match fid(&reference_features, &features) {
            Ok(value) => rows.push(FidRow {
                group: group.to_string(),
                fid: value,
                reference_count: reference_features.len(),
                candidate_count: features.len(),
            }),
            Err(e) => skips.push(skip(group, "fid", e)),
        }
    }
    write_csv(&out.join(FID_CSV), &rows)?;
    if plot_figure && !rows.is_empty() {
        let bars: Vec<(String, f64)> = rows.iter().map(|r| (r.group.clone(), r.fid)).collect();
        plot::bar_chart(&out.join(FID_FIGURE), "FID by operation", "FID", &bars)?;
    }
    for r in &rows {
        println!("fid {:<10} {:.6} ({} vs {})", r.group, r.fid, r.reference_count, r.candidate_count);
    }
    finish(out, "fid", skips)
}

pub fn run_apa(predictions: &Path, out: &Path) -> Result<Status> {
    let samples = load_apa_jsonl(predictions)
        .with_context(|| format!("loading predictions {}", predictions.display()))?;
    ensure_dir(out)?;
    let report = apa(&samples);
    let rows: Vec<ApaRow> = report
        .levels
        .iter()
        .map(|(level, l)| ApaRow {
            level: level.as_str().to_string(),
            apa_percent: l.percent,
            samples: l.samples,
        })
        .collect();
    write_csv(&out.join(APA_CSV), &rows)?;
    for r in &rows {
        println!("apa {:<13} {:>8.3}% over {} sample(s)", r.level, r.apa_percent, r.samples);
    }
    let mut skips = Vec::new();
    for w in &report.warnings {
        match w.kind {
            ApaWarningKind::NoPoints | ApaWarningKind::EmptyMask => {
                skips.push(skip(&w.frame_id, "apa", w))
            }
            _ => log::warn!("{w}"),
        }
    }
    finish(out, "apa", skips)
}
