//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any failed.

// Negated comparisons make NaN fail the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use image::{Rgb, RgbImage};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use common::mock::{oracle_rle_decode, MockServer, PLAIN_FILL, PROMPTED_FILL};
use common::synth::SynthScene;
use sceneaug_core::backends::remote::RetryPolicy;
use sceneaug_core::backends::stubs::{
    ColorHistogram, DictionarySuggester, FlatColorObject, RectMaskSegmenter, RingMeanFill,
    StaticDetector,
};
use sceneaug_core::backends::wire::*;
use sceneaug_core::backends::{
    BackendDescriptor, BackendError, BackendKind, Detector, FeatureExtractor, MaskInpainter,
    ObjectSuggester, PromptedInpainter, Segmenter, SizeClass,
};
use sceneaug_core::editors::texture::{TextureRecord, TextureStore};
use sceneaug_core::editors::{self, EditBackends, EditError};
use sceneaug_core::mask::{dilate, union, BBox, BinaryMask};
use sceneaug_core::metrics::apa::{apa, clutter_level, load_apa_jsonl, ApaSample, ClutterLevel};
use sceneaug_core::metrics::frechet::{fid, fit_gaussian, frechet_distance, GaussianSummary};
use sceneaug_core::metrics::ssim::{ssim, ssim_rgb, GrayRaster, SsimParams};
use sceneaug_core::planner::{default_dil, plan_edits, DilationConfig, EditOperation, EditPlan};
use sceneaug_core::scene::{build_scene_graph, DetectedObject, SceneGraph, SegmentedObject};
use sceneaug_core::{DemonstrationFrame, PlannerConfig};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("mask-morphology oracle", mask_morphology),
        ("ssim correctness", ssim_correctness),
        ("frechet distance", frechet),
        ("safety invariant fuzz", safety_fuzz),
        ("planner distribution and determinism", planner_distribution),
        ("end-to-end removal ssim", end_to_end_removal),
        ("editor locality", locality),
        ("clutter classifier and apa fixtures", apa_fixtures),
        ("wire protocol", wire_protocol),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, run) in &criteria {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|p| {
                let msg = p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Err(format!("panicked: {msg}"))
            });
        let elapsed = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS  {name} ({elapsed:.2?}): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name} ({elapsed:.2?}): {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------- masks

fn brute_dilate(mask: &BinaryMask, dil: u32) -> Vec<bool> {
    let (h, w) = (mask.height() as i64, mask.width() as i64);
    let d = dil as i64;
    let mut out = vec![false; (h * w) as usize];
    for y in 0..h {
        for x in 0..w {
            'search: for yy in (y - d).max(0)..=(y + d).min(h - 1) {
                for xx in (x - d).max(0)..=(x + d).min(w - 1) {
                    if mask.get(xx as u32, yy as u32) {
                        out[(y * w + x) as usize] = true;
                        break 'search;
                    }
                }
            }
        }
    }
    out
}

fn random_mask(rng: &mut ChaCha8Rng, h: u32, w: u32) -> BinaryMask {
    let density = rng.gen_range(0.0..0.3);
    BinaryMask::from_fn(h, w, |_, _| rng.gen_bool(density)).unwrap()
}

fn mask_morphology() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d61736b);
    let mut compared = 0;
    for _ in 0..200 {
        let mask = random_mask(&mut rng, 64, 64);
        for dil in [0, 1, 2, 5] {
            let fast = dilate(&mask, dil);
            ensure!(
                fast.bits() == brute_dilate(&mask, dil).as_slice(),
                "mismatch at dil {dil} (popcount {})",
                mask.popcount()
            );
            compared += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:.2?}, limit 10 s");
    Ok(format!("{compared} mask/radius pairs exactly equal in {elapsed:.2?}"))
}

// ---------------------------------------------------------------- ssim

/// Reference SSIM: luma from RGB, then per-window two-pass statistics.
fn reference_ssim(a: &RgbImage, b: &RgbImage, window: usize) -> f64 {
    let gray = |img: &RgbImage| -> Vec<Vec<f64>> {
        (0..img.height())
            .map(|y| {
                (0..img.width())
                    .map(|x| {
                        let p = img.get_pixel(x, y).0;
                        0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64
                    })
                    .collect()
            })
            .collect()
    };
    let (ga, gb) = (gray(a), gray(b));
    let (c1, c2) = ((0.01f64 * 255.0).powi(2), (0.03f64 * 255.0).powi(2));
    let n = (window * window) as f64;
    let mut values = Vec::new();
    for y0 in 0..=ga.len() - window {
        for x0 in 0..=ga[0].len() - window {
            let mut pa = Vec::with_capacity(window * window);
            let mut pb = Vec::with_capacity(window * window);
            for row in y0..y0 + window {
                pa.extend_from_slice(&ga[row][x0..x0 + window]);
                pb.extend_from_slice(&gb[row][x0..x0 + window]);
            }
            let ma = pa.iter().sum::<f64>() / n;
            let mb = pb.iter().sum::<f64>() / n;
            let va = pa.iter().map(|v| (v - ma) * (v - ma)).sum::<f64>() / n;
            let vb = pb.iter().map(|v| (v - mb) * (v - mb)).sum::<f64>() / n;
            let cov = pa.iter().zip(&pb).map(|(p, q)| (p - ma) * (q - mb)).sum::<f64>() / n;
            values.push(
                ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                    / ((ma * ma + mb * mb + c1) * (va + vb + c2)),
            );
        }
    }
    values.iter().sum::<f64>() / values.len() as f64
}

fn random_image(rng: &mut ChaCha8Rng, w: u32, h: u32) -> RgbImage {
    RgbImage::from_fn(w, h, |_, _| Rgb([rng.gen(), rng.gen(), rng.gen()]))
}

/// `base` plus bounded noise, so pairs are correlated.
fn perturbed(rng: &mut ChaCha8Rng, base: &RgbImage, amplitude: i32) -> RgbImage {
    RgbImage::from_fn(base.width(), base.height(), |x, y| {
        let p = base.get_pixel(x, y).0;
        Rgb(p.map(|c| (c as i32 + rng.gen_range(-amplitude..=amplitude)).clamp(0, 255) as u8))
    })
}

fn ssim_correctness() -> Outcome {
    let params = SsimParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5517);

    let a = random_image(&mut rng, 80, 60);
    let identity = ssim_rgb(&a, &a, &params).map_err(|e| e.to_string())?;
    ensure!(identity == 1.0, "ssim(A, A) = {identity:.17}, expected exactly 1");

    let black = GrayRaster::from_fn(64, 64, |_, _| 0.0);
    let white = GrayRaster::from_fn(64, 64, |_, _| 255.0);
    let constant = ssim(&black, &white, &params).map_err(|e| e.to_string())?;
    ensure!(
        (constant - 1.0e-4).abs() <= 1.0e-5,
        "constant pair gave {constant:e}, expected 1e-4 +- 1e-5"
    );

    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let w = rng.gen_range(24..72);
        let h = rng.gen_range(24..72);
        let a = random_image(&mut rng, w, h);
        let b = if i % 2 == 0 {
            let amplitude = rng.gen_range(1..80);
            perturbed(&mut rng, &a, amplitude)
        } else {
            random_image(&mut rng, w, h)
        };
        let fast = ssim_rgb(&a, &b, &params).map_err(|e| e.to_string())?;
        let reference = reference_ssim(&a, &b, params.window);
        worst = worst.max((fast - reference).abs());
    }
    ensure!(worst <= 1e-6, "max deviation from reference {worst:e} > 1e-6");
    Ok(format!(
        "identity = 1 exactly; constant pair = {constant:.6e}; max |diff| vs reference over 50 pairs = {worst:.1e}"
    ))
}

// ---------------------------------------------------------------- frechet

fn random_psd(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d + rng.gen_range(0..3), |_, _| rng.gen_range(-1.5..1.5));
    let m = &a * a.transpose();
    (&m + m.transpose()) * 0.5
}

fn random_gaussian(rng: &mut ChaCha8Rng, d: usize) -> GaussianSummary {
    let mean = DVector::from_fn(d, |_, _| rng.gen_range(-3.0..3.0));
    GaussianSummary::new(mean, random_psd(rng, d), 50).unwrap()
}

fn frechet() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xf1d);
    let dist = |a: &GaussianSummary, b: &GaussianSummary| frechet_distance(a, b).map_err(|e| e.to_string());

    let mut self_max: f64 = 0.0;
    for _ in 0..50 {
        let d = rng.gen_range(1..10);
        let g = random_gaussian(&mut rng, d);
        self_max = self_max.max(dist(&g, &g)?);
    }
    ensure!(self_max <= 1e-9, "d(g, g) up to {self_max:e}");

    let u = |m, v| GaussianSummary::univariate(m, v, 10).unwrap();
    let shift = dist(&u(0.0, 1.0), &u(3.0, 1.0))?;
    let scale = dist(&u(0.0, 1.0), &u(0.0, 4.0))?;
    ensure!((shift - 9.0).abs() <= 1e-9, "(0,1) vs (3,1) gave {shift}");
    ensure!((scale - 1.0).abs() <= 1e-9, "(0,1) vs (0,4) gave {scale}");

    let mut asym: f64 = 0.0;
    for _ in 0..100 {
        let d = rng.gen_range(1..12);
        let g1 = random_gaussian(&mut rng, d);
        let g2 = random_gaussian(&mut rng, d);
        let (ab, ba) = (dist(&g1, &g2)?, dist(&g2, &g1)?);
        ensure!(ab >= 0.0, "negative distance {ab}");
        asym = asym.max((ab - ba).abs());
    }
    ensure!(asym <= 1e-9, "asymmetry {asym:e} > 1e-9");

    let features: Vec<Vec<f64>> = (0..64)
        .map(|_| random_image(&mut rng, 16, 16))
        .map(|img| ColorHistogram::histogram(&img))
        .collect();
    let self_fid = fid(&features, &features).map_err(|e| e.to_string())?;
    ensure!(self_fid < 1e-6, "FID of a set with itself = {self_fid:e}");
    let g = fit_gaussian(&features).map_err(|e| e.to_string())?;
    Ok(format!(
        "d(g,g) <= {self_max:.1e}; closed forms 9 and 1 (errors {:.1e}, {:.1e}); max asymmetry {asym:.1e}; self-FID (D={}) = {self_fid:.1e}",
        (shift - 9.0).abs(),
        (scale - 1.0).abs(),
        g.dim()
    ))
}

// ---------------------------------------------------------------- safety

struct NoiseInpainter;

impl NoiseInpainter {
    fn noise(image: &RgbImage, mask: &BinaryMask) -> RgbImage {
        let mut rng = ChaCha8Rng::seed_from_u64(mask.popcount());
        random_image(&mut rng, image.width(), image.height())
    }
}

impl MaskInpainter for NoiseInpainter {
    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor::local(BackendKind::MaskInpainter, "noise", "0")
    }
    fn inpaint(&self, image: &RgbImage, mask: &BinaryMask) -> Result<RgbImage, BackendError> {
        Ok(Self::noise(image, mask))
    }
}

impl PromptedInpainter for NoiseInpainter {
    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor::local(BackendKind::PromptedInpainter, "noise", "0")
    }
    fn inpaint(&self, image: &RgbImage, mask: &BinaryMask, _: &str) -> Result<RgbImage, BackendError> {
        Ok(Self::noise(image, mask))
    }
}

fn texture_store(rng: &mut ChaCha8Rng) -> TextureStore {
    let records = (0..3)
        .map(|i| {
            let side = rng.gen_range(32..64);
            TextureRecord::new(&format!("tex_{i}"), random_image(rng, side, side), "noise").unwrap()
        })
        .collect();
    TextureStore::from_records(records).unwrap()
}

struct FuzzScene {
    frame: DemonstrationFrame,
    scene: SceneGraph,
}

fn random_fuzz_scene(rng: &mut ChaCha8Rng, index: usize) -> FuzzScene {
    let w = rng.gen_range(64..160);
    let h = rng.gen_range(64..160);
    let n = rng.gen_range(1..10);
    let objects: Vec<DetectedObject> = (0..n)
        .map(|i| {
            let large = rng.gen_bool(0.15);
            let (bw, bh) = if large {
                (rng.gen_range(w / 2..=w), rng.gen_range(h / 3..=h))
            } else {
                (rng.gen_range(3..w / 4), rng.gen_range(3..h / 4))
            };
            let x = rng.gen_range(0..=w - bw);
            let y = rng.gen_range(0..=h - bh);
            DetectedObject {
                object_id: i as u32,
                label: format!("obj{i}"),
                bbox: BBox::new(x, y, bw, bh),
                detection_confidence: rng.gen_range(0.3..1.0),
                clipped: false,
            }
        })
        .collect();
    let target = rng.gen_range(0..n);
    let image = RgbImage::from_fn(w, h, |x, y| Rgb([(x * 3) as u8, (y * 5) as u8, 90]));
    let mut frame = DemonstrationFrame::new(&format!("fuzz{index}"), "fuzz", image, "pick it up")
        .unwrap()
        .with_target_phrase(&format!("obj{target}"));
    if rng.gen_bool(0.5) {
        let band_w = rng.gen_range(2..w / 3);
        let x0 = rng.gen_range(0..w - band_w);
        let footprint = BinaryMask::from_bbox(h, w, BBox::new(x0, 0, band_w, h)).unwrap();
        frame = frame.with_footprint(footprint).unwrap();
    }
    let detector = StaticDetector { objects };
    let scene = build_scene_graph(&frame, &detector, &RectMaskSegmenter).unwrap();
    FuzzScene { frame, scene }
}

fn safety_fuzz() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5afe);
    let textures = texture_store(&mut rng);
    let suggester = DictionarySuggester::default();
    let backends = EditBackends {
        mask_inpainter: &RingMeanFill,
        prompted_inpainter: &FlatColorObject,
        suggester: &suggester,
        textures: &textures,
    };
    let (mut accepted, mut rejected, mut forbidden_refused) = (0, 0, 0);
    for i in 0..1000 {
        let FuzzScene { frame, scene } = random_fuzz_scene(&mut rng, i);
        let config = PlannerConfig {
            texture_pool: textures.ids(),
            dil: DilationConfig {
                remove: Some(rng.gen_range(0..12)),
                restyle: Some(rng.gen_range(0..4)),
                replace: Some(rng.gen_range(0..12)),
            },
            ..PlannerConfig::default()
        };
        let outcome = plan_edits(&scene, &config, rng.gen()).map_err(|e| e.to_string())?;
        let forbidden: Vec<u32> = std::iter::once(scene.target.id())
            .chain(scene.excluded_large.iter().map(SegmentedObject::id))
            .collect();
        for planned in &outcome.plans {
            let plan = &planned.plan;
            ensure!(
                plan.object_ids.iter().all(|id| !forbidden.contains(id)),
                "scene {i}: plan selects a forbidden id: {:?} (forbidden {forbidden:?})",
                plan.object_ids
            );
            match editors::execute(&frame, &scene, planned, backends) {
                Ok(edited) => {
                    accepted += 1;
                    ensure!(
                        !edited.edited_region.intersects(&scene.target.mask).unwrap(),
                        "scene {i}: accepted {} plan overlaps the target",
                        plan.operation
                    );
                    if let (true, Some(fp)) =
                        (plan.operation.adds_content(), &frame.trajectory_footprint)
                    {
                        ensure!(
                            !edited.edited_region.intersects(fp).unwrap(),
                            "scene {i}: accepted {} plan overlaps the trajectory",
                            plan.operation
                        );
                    }
                }
                Err(EditError::Rejected(_)) => rejected += 1,
                Err(e) => return Err(format!("scene {i}: unexpected error {e}")),
            }
        }
        // Hand-built plans naming the target or a size-excluded object.
        for &id in &forbidden {
            let planned = sceneaug_core::planner::PlannedEdit {
                variant_index: 0,
                plan: EditPlan::removal(vec![id], 0, 0),
            };
            ensure!(
                matches!(
                    editors::execute(&frame, &scene, &planned, backends),
                    Err(EditError::NotACandidate(_))
                ),
                "scene {i}: editor accepted forbidden id {id}"
            );
            forbidden_refused += 1;
        }
    }
    ensure!(rejected > 0, "fuzz never exercised a rejection");
    Ok(format!(
        "1000 scenes: {accepted} plans accepted, {rejected} rejected by the safety check, {forbidden_refused} forbidden-id plans refused; 0 violations"
    ))
}

// ---------------------------------------------------------------- planner

fn toy_scene(n: u32) -> SceneGraph {
    let dims = (120, 160);
    let obj = |id: u32, x: u32| {
        let bbox = BBox::new(x, 40, 8, 8);
        SegmentedObject {
            base: DetectedObject {
                object_id: id,
                label: format!("obj{id}"),
                bbox,
                detection_confidence: 0.9,
                clipped: false,
            },
            mask: BinaryMask::from_bbox(dims.0, dims.1, bbox).unwrap(),
            segmentation_confidence: 1.0,
        }
    };
    SceneGraph {
        frame_id: "toy".into(),
        target: obj(100, 2),
        candidates: (0..n).map(|i| obj(i, 20 + i * 14)).collect(),
        excluded_large: vec![],
        image_size: dims,
        dropped: vec![],
    }
}

fn planner_distribution() -> Outcome {
    let scene = toy_scene(4);
    let config = PlannerConfig {
        operations_enabled: [EditOperation::Remove].into_iter().collect(),
        variants_per_operation: 1,
        ..PlannerConfig::default()
    };
    let draws = 10_000u64;
    let mut counts = [0u64; 5];
    for root in 0..draws {
        let plans = plan_edits(&scene, &config, root).map_err(|e| e.to_string())?.plans;
        counts[plans[0].plan.object_ids.len()] += 1;
    }
    let expected = draws as f64 / 5.0;
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let p = 1.0 - ChiSquared::new(4.0).unwrap().cdf(chi2);
    ensure!(p > 0.01, "subset sizes {counts:?}: chi2 = {chi2:.3}, p = {p:.4}");

    // Byte-identical reruns, plans and executed images.
    let full = PlannerConfig {
        texture_pool: vec!["tex_0".into(), "tex_1".into(), "tex_2".into()],
        variants_per_operation: 3,
        ..PlannerConfig::default()
    };
    let run = || -> Result<(Vec<u8>, Vec<Vec<u8>>), String> {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let textures = texture_store(&mut rng);
        let suggester = DictionarySuggester::default();
        let backends = EditBackends {
            mask_inpainter: &RingMeanFill,
            prompted_inpainter: &FlatColorObject,
            suggester: &suggester,
            textures: &textures,
        };
        let synth = SynthScene::random(&mut rng, 160, 120, 5, 6);
        let frame = synth.frame("det", 0);
        let scene = build_scene_graph(
            &frame,
            &StaticDetector {
                objects: synth.detections(),
            },
            &RectMaskSegmenter,
        )
        .map_err(|e| e.to_string())?;
        let plans = plan_edits(&scene, &full, 20240601).map_err(|e| e.to_string())?.plans;
        let mut images = Vec::new();
        for p in &plans {
            if let Ok(edited) = editors::execute(&frame, &scene, p, backends) {
                images.push(sceneaug_core::imageio::encode_png(&edited.image).unwrap());
            }
        }
        Ok((serde_json::to_vec(&plans).unwrap(), images))
    };
    let (plans_a, images_a) = run()?;
    let (plans_b, images_b) = run()?;
    ensure!(plans_a == plans_b, "plan JSON differs between reruns");
    ensure!(images_a == images_b, "edited images differ between reruns");
    Ok(format!(
        "subset sizes {counts:?}, chi2 = {chi2:.3}, p = {p:.3}; reruns byte-identical ({} plan bytes, {} images)",
        plans_a.len(),
        images_a.len()
    ))
}

// ---------------------------------------------------------------- end to end

fn end_to_end_removal() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xe2e);
    let (w, h) = (256, 192);
    let dil = default_dil(w);
    let params = SsimParams::default();
    let mut scores = Vec::new();
    for s in 0..20 {
        let synth = SynthScene::random(&mut rng, w, h, 5, dil + 4);
        let detector = StaticDetector {
            objects: synth.detections(),
        };
        for removed in 0..5 {
            let target = (removed + 1) % 5;
            let frame = synth.frame(&format!("scene{s}_{removed}"), target);
            let scene =
                build_scene_graph(&frame, &detector, &RectMaskSegmenter).map_err(|e| e.to_string())?;
            ensure!(scene.target.id() == target as u32, "wrong target in scene {s}");
            let plan = EditPlan::removal(vec![removed as u32], dil, s as u64);
            let edited = editors::remove_objects(&frame, &scene, &plan, &RingMeanFill)
                .map_err(|e| e.to_string())?;
            let truth = synth.render_without(&[removed]);
            scores.push(ssim_rgb(&edited.image, &truth, &params).map_err(|e| e.to_string())?);
        }
    }
    let elapsed = start.elapsed();
    let mut sorted = scores.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = (sorted[49] + sorted[50]) / 2.0;
    let min = sorted[0];
    ensure!(scores.len() == 100, "expected 100 edits, got {}", scores.len());
    ensure!(median > 0.95, "median SSIM {median:.4} <= 0.95");
    ensure!(min > 0.85, "min SSIM {min:.4} <= 0.85");
    ensure!(elapsed < Duration::from_secs(120), "took {elapsed:.2?}");
    Ok(format!(
        "100 removals, dil = {dil}: SSIM median {median:.5}, min {min:.5}, max {:.5}",
        sorted[99]
    ))
}

// ---------------------------------------------------------------- locality

fn locality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x10ca1);
    let textures = texture_store(&mut rng);
    let suggester = DictionarySuggester::default();
    let backends = EditBackends {
        mask_inpainter: &NoiseInpainter,
        prompted_inpainter: &NoiseInpainter,
        suggester: &suggester,
        textures: &textures,
    };
    let config = PlannerConfig {
        texture_pool: textures.ids(),
        variants_per_operation: 4,
        dil: DilationConfig {
            remove: None,
            restyle: Some(1),
            replace: None,
        },
        ..PlannerConfig::default()
    };
    let mut checked = [0usize; 3];
    let mut pixels = 0u64;
    let mut attempts = 0;
    while checked.iter().any(|&c| c < 100) {
        attempts += 1;
        ensure!(attempts < 2000, "could not collect 100 accepted plans per editor: {checked:?}");
        let synth = SynthScene::random(&mut rng, 160, 120, 6, 3);
        let mut frame = synth.frame(&format!("loc{attempts}"), rng.gen_range(0..6));
        if rng.gen_bool(0.3) {
            let x0 = rng.gen_range(0..140);
            frame = frame
                .with_footprint(BinaryMask::from_bbox(120, 160, BBox::new(x0, 0, 20, 120)).unwrap())
                .unwrap();
        }
        let detector = StaticDetector {
            objects: synth.detections(),
        };
        let scene = build_scene_graph(&frame, &detector, &RectMaskSegmenter).map_err(|e| e.to_string())?;
        let plans = plan_edits(&scene, &config, rng.gen()).map_err(|e| e.to_string())?.plans;
        for planned in plans {
            let slot = planned.plan.operation as usize;
            if checked[slot] >= 100 {
                continue;
            }
            let edited = match editors::execute(&frame, &scene, &planned, backends) {
                Ok(e) => e,
                Err(EditError::Rejected(_)) => continue,
                Err(e) => return Err(e.to_string()),
            };
            let region = {
                let masks: Vec<&BinaryMask> = planned
                    .plan
                    .object_ids
                    .iter()
                    .map(|&id| &scene.candidate(id).unwrap().mask)
                    .collect();
                dilate(&union(&masks, scene.image_size).unwrap(), planned.plan.dil)
            };
            ensure!(
                edited.edited_region == region,
                "{} edited_region differs from dilated union",
                planned.plan.operation
            );
            ensure!(
                edited.image.dimensions() == frame.image.dimensions(),
                "dimensions changed"
            );
            for (x, y, p) in frame.image.enumerate_pixels() {
                if !region.get(x, y) {
                    ensure!(
                        edited.image.get_pixel(x, y) == p,
                        "{} changed pixel ({x},{y}) outside the region",
                        planned.plan.operation
                    );
                    pixels += 1;
                }
            }
            checked[slot] += 1;
        }
    }
    Ok(format!(
        "remove/restyle/replace: {checked:?} plans with a whole-image noise backend, {pixels} outside pixels byte-identical"
    ))
}

// ---------------------------------------------------------------- apa

fn apa_fixtures() -> Outcome {
    let bands = [
        (0, ClutterLevel::Unclassified),
        (1, ClutterLevel::Low),
        (2, ClutterLevel::Low),
        (3, ClutterLevel::Unclassified),
        (4, ClutterLevel::Unclassified),
        (5, ClutterLevel::Medium),
        (6, ClutterLevel::Medium),
        (8, ClutterLevel::Medium),
        (9, ClutterLevel::Unclassified),
        (10, ClutterLevel::Unclassified),
        (11, ClutterLevel::High),
        (15, ClutterLevel::High),
        (16, ClutterLevel::Unclassified),
    ];
    for (n, want) in bands {
        ensure!(clutter_level(n) == want, "clutter_level({n}) = {}, want {want}", clutter_level(n));
    }

    // 10x10 mask covering x in 2..6, y in 2..6.
    let mask = BinaryMask::from_bbox(10, 10, BBox::new(2, 2, 4, 4)).unwrap();
    let sample = |id: &str, pts: &[(f64, f64)], level| ApaSample {
        frame_id: id.into(),
        points: pts.to_vec(),
        target_mask: mask.clone(),
        clutter_level: level,
    };
    let third = apa(&[sample("t", &[(3.0, 3.0), (0.0, 0.0), (9.0, 9.0)], ClutterLevel::Low)]);
    let third_pct = third.percent(ClutterLevel::Low).unwrap();
    ensure!((third_pct - 100.0 / 3.0).abs() < 1e-12, "1 of 3 inside gave {third_pct}");

    let report = apa(&[
        // LC: 0% and 100% -> 50%.
        sample("a", &[(0.0, 0.0), (9.0, 0.0)], ClutterLevel::Low),
        sample("b", &[(2.0, 2.0), (5.9, 5.9)], ClutterLevel::Low),
        // MC: 1/4 and 0/2 -> 12.5%.
        sample("c", &[(2.0, 5.0), (6.0, 6.0), (1.0, 1.0), (7.0, 2.0)], ClutterLevel::Medium),
        sample("d", &[(6.0, 2.0), (2.0, 6.0)], ClutterLevel::Medium),
        // HC: 3/4 and 1/2 (one point out of bounds) -> 62.5%.
        sample("e", &[(3.0, 3.0), (4.0, 4.0), (5.0, 2.0), (8.0, 8.0)], ClutterLevel::High),
        sample("f", &[(3.0, 4.0), (-1.0, 4.0)], ClutterLevel::High),
        // No points: excluded.
        sample("g", &[], ClutterLevel::High),
    ]);
    let expect = [
        (ClutterLevel::Low, 50.0),
        (ClutterLevel::Medium, 12.5),
        (ClutterLevel::High, 62.5),
    ];
    for (level, want) in expect {
        let got = report.percent(level);
        ensure!(got == Some(want), "APA {level} = {got:?}, want {want}");
    }
    ensure!(report.levels[&ClutterLevel::High].samples == 2, "empty sample not excluded");
    ensure!(report.warnings.len() == 2, "warnings: {:?}", report.warnings);

    // Same fixture through the JSONL reader.
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    mask.save_png(&dir.path().join("mask.png")).unwrap();
    let lines = [
        r#"{"frame_id":"a","points":[[0,0],[9,0]],"mask_path":"mask.png","clutter_level":"LC"}"#,
        r#"{"frame_id":"b","points":[[2,2],[5.9,5.9]],"mask_path":"mask.png","object_count":2}"#,
        r#"{"frame_id":"x","points":[[3,3]],"mask_path":"mask.png","object_count":3}"#,
    ];
    let path = dir.path().join("preds.jsonl");
    std::fs::write(&path, lines.join("\n")).unwrap();
    let loaded = apa(&load_apa_jsonl(&path).map_err(|e| e.to_string())?);
    ensure!(loaded.percent(ClutterLevel::Low) == Some(50.0), "JSONL LC = {:?}", loaded.percent(ClutterLevel::Low));
    ensure!(
        loaded.percent(ClutterLevel::Unclassified) == Some(100.0),
        "3 objects should land in UNCLASSIFIED"
    );
    Ok("clutter bands 0..16 exact; APA LC 50, MC 12.5, HC 62.5, 1-of-3 = 33.33; JSONL path agrees".into())
}

// ---------------------------------------------------------------- wire

fn wire_protocol() -> Outcome {
    let server = MockServer::start();
    let client = common::fast_remote(&server.url());
    let mut rng = ChaCha8Rng::seed_from_u64(0x3173);
    let image = random_image(&mut rng, 64, 64);

    // detect
    *server.state.detections.lock().unwrap() = vec![
        WireObject { x: 1.5, y: 2.0, w: 10.2, h: 8.0, label: "cup".into(), score: 0.8 },
        WireObject { x: 60.0, y: 60.0, w: 10.0, h: 10.0, label: "pan".into(), score: 0.9 },
        WireObject { x: 5.0, y: 5.0, w: 5.0, h: 5.0, label: "faint".into(), score: 0.1 },
    ];
    let objects = client.detect("f", &image, Some("cup")).map_err(|e| e.to_string())?;
    ensure!(objects.len() == 2, "expected 2 detections above min score, got {}", objects.len());
    ensure!(objects[0].bbox == BBox::new(1, 2, 11, 8), "fractional box became {:?}", objects[0].bbox);
    ensure!(objects[1].clipped && objects[1].bbox == BBox::new(60, 60, 4, 4), "edge box not clipped");

    // segment: 100 random masks served, decoded exactly
    let masks: Vec<BinaryMask> = (0..100).map(|_| random_mask(&mut rng, 64, 64)).collect();
    server
        .state
        .queued_masks
        .lock()
        .unwrap()
        .extend(masks.iter().map(|m| m.bits().to_vec()));
    let boxes = vec![BBox::new(0, 0, 8, 8); 100];
    let segmented = client.segment(&image, &boxes).map_err(|e| e.to_string())?;
    for (i, ((got, _), want)) in segmented.iter().zip(&masks).enumerate() {
        ensure!(got == want, "segment mask {i} differs after RLE round trip");
    }

    // inpaint: 100 random masks sent, server decodes them independently
    for (i, mask) in masks.iter().enumerate() {
        let out = MaskInpainter::inpaint(&client, &image, mask).map_err(|e| e.to_string())?;
        let received = server.state.received_masks.lock().unwrap().last().cloned().unwrap_or_default();
        if mask.is_empty() {
            ensure!(out == image, "empty mask changed the image");
            continue;
        }
        ensure!(received == mask.bits(), "inpaint mask {i} differs after RLE round trip");
        for (x, y, p) in out.enumerate_pixels() {
            let want = if mask.get(x, y) { Rgb(PLAIN_FILL) } else { *image.get_pixel(x, y) };
            ensure!(*p == want, "inpaint output wrong at ({x},{y}) for mask {i}");
        }
    }
    let rle_check: Vec<bool> = oracle_rle_decode(&masks[0].to_rle());
    ensure!(rle_check == masks[0].bits(), "library RLE disagrees with oracle decoder");

    // prompted inpaint
    let mask = BinaryMask::from_bbox(64, 64, BBox::new(10, 10, 6, 6)).unwrap();
    let out = PromptedInpainter::inpaint(&client, &image, &mask, "a red apple on a wooden table")
        .map_err(|e| e.to_string())?;
    ensure!(out.get_pixel(12, 12).0 == PROMPTED_FILL, "prompted fill missing");
    ensure!(
        server.state.prompts.lock().unwrap().last().map(String::as_str)
            == Some("a red apple on a wooden table"),
        "prompt not delivered"
    );

    // suggest
    *server.state.suggestion.lock().unwrap() = Some(SuggestResponse {
        name: "dish cloth".into(),
        description: "a folded dish cloth".into(),
        size_class: SizeClass::Medium,
    });
    let s = client.suggest("cooking pan", "objects: pan").map_err(|e| e.to_string())?;
    ensure!(s.name == "dish cloth" && s.size_class == SizeClass::Medium, "suggestion {s:?}");

    // embed
    let gray = RgbImage::from_pixel(8, 8, Rgb([51, 102, 255]));
    let feats = client.embed(&[gray.clone(), image.clone()]).map_err(|e| e.to_string())?;
    ensure!(feats.len() == 2 && feats[0] == vec![0.2, 0.4, 1.0], "embed features {:?}", feats.first());

    // retries: persistent 5xx -> exactly 3 attempts, then Exhausted
    let before = server.attempts(EMBED_PATH);
    server.fail_next(EMBED_PATH, 503, 100);
    let err = client.embed(std::slice::from_ref(&gray)).unwrap_err();
    let made = server.attempts(EMBED_PATH) - before;
    ensure!(
        matches!(err, BackendError::Exhausted { attempts: 3, .. }) && made == 3,
        "persistent 503: {err:?} after {made} attempts"
    );
    // two failures then success
    let before = server.attempts(SUGGEST_PATH);
    server.fail_next(SUGGEST_PATH, 502, 2);
    client.suggest("cooking pan", "").map_err(|e| e.to_string())?;
    let made = server.attempts(SUGGEST_PATH) - before;
    ensure!(made == 3, "recovered after {made} attempts, expected 3");
    // 4xx is not retried
    let before = server.attempts(DETECT_PATH);
    server.fail_next(DETECT_PATH, 422, 1);
    let err = client.detect("f", &image, None).unwrap_err();
    let made = server.attempts(DETECT_PATH) - before;
    ensure!(
        matches!(err, BackendError::Permanent { .. }) && made == 1,
        "4xx: {err:?} after {made} attempts"
    );
    let schedule = RetryPolicy::default().schedule();
    ensure!(
        schedule == vec![Duration::from_millis(500), Duration::from_millis(1000)],
        "default backoff schedule {schedule:?}"
    );
    ensure!(
        Detector::descriptor(&client).endpoint.as_deref() == Some(server.url().as_str()),
        "descriptor endpoint"
    );
    Ok("detect/segment/inpaint/suggest/embed round-trip; 100+100 masks exact through RLE; 503 x3 -> Exhausted after exactly 3 attempts; 4xx not retried".into())
}
