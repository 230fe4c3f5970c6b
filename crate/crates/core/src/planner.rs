//! Seeded edit planning.
//!
//! A root seed is split into one stream per `(operation, variant)` pair, so
//! raising the variant count appends plans without changing earlier ones.
//! Each plan stores its own stream seed, which is all the randomness its
//! execution needs.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::editors::color::{HsvJitter, JitterRanges};
use crate::scene::SceneGraph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditOperation {
    Remove,
    Restyle,
    Replace,
}

impl EditOperation {
    pub const ALL: [EditOperation; 3] = [
        EditOperation::Remove,
        EditOperation::Restyle,
        EditOperation::Replace,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EditOperation::Remove => "remove",
            EditOperation::Restyle => "restyle",
            EditOperation::Replace => "replace",
        }
    }

    /// Whether the edit puts new visual content into the scene.
    pub fn adds_content(&self) -> bool {
        !matches!(self, EditOperation::Remove)
    }

    fn stream_index(&self) -> u64 {
        match self {
            EditOperation::Remove => 0,
            EditOperation::Restyle => 1,
            EditOperation::Replace => 2,
        }
    }
}

impl std::fmt::Display for EditOperation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EditOperation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "remove" | "removal" => Ok(EditOperation::Remove),
            "restyle" | "restyling" => Ok(EditOperation::Restyle),
            "replace" | "replacement" => Ok(EditOperation::Replace),
            other => Err(format!("unknown operation `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplaceStrategy {
    /// Same category, different appearance.
    SameCategory,
    /// A different object proposed by the suggester backend.
    Suggested,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OpParams {
    Remove,
    Restyle {
        texture_id: String,
        jitter: HsvJitter,
    },
    Replace {
        strategy: ReplaceStrategy,
        /// Appearance word for the same-category prompt, and the fallback
        /// when a suggestion is rejected.
        appearance: String,
        surface: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EditPlan {
    pub operation: EditOperation,
    pub object_ids: Vec<u32>,
    pub seed: u64,
    pub dil: u32,
    pub op_params: OpParams,
    pub plan_hash: String,
}

/// Hashed view of a plan: every field except the hash itself.
#[derive(Serialize)]
struct PlanContent<'a> {
    operation: EditOperation,
    object_ids: &'a [u32],
    seed: u64,
    dil: u32,
    op_params: &'a OpParams,
}

const PLAN_HASH_DOMAIN: &[u8] = b"edit-plan/v1\n";

/// First 16 hex digits of SHA-256 over the plan's canonical JSON.
pub fn plan_hash(plan: &EditPlan) -> String {
    let content = PlanContent {
        operation: plan.operation,
        object_ids: &plan.object_ids,
        seed: plan.seed,
        dil: plan.dil,
        op_params: &plan.op_params,
    };
    let json = serde_json::to_vec(&content).expect("plan content serializes");
    let mut hasher = Sha256::new();
    hasher.update(PLAN_HASH_DOMAIN);
    hasher.update(&json);
    let digest = hasher.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

impl EditPlan {
    /// Build a plan and fill in its hash.
    pub fn new(
        operation: EditOperation,
        object_ids: Vec<u32>,
        seed: u64,
        dil: u32,
        op_params: OpParams,
    ) -> Self {
        let mut plan = EditPlan {
            operation,
            object_ids,
            seed,
            dil,
            op_params,
            plan_hash: String::new(),
        };
        plan.plan_hash = plan_hash(&plan);
        plan
    }

    pub fn removal(object_ids: Vec<u32>, dil: u32, seed: u64) -> Self {
        Self::new(EditOperation::Remove, object_ids, seed, dil, OpParams::Remove)
    }

    pub fn hash_is_current(&self) -> bool {
        self.plan_hash == plan_hash(self)
    }
}

/// Per-operation dilation radius. `None` means the width-scaled default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DilationConfig {
    pub remove: Option<u32>,
    pub restyle: Option<u32>,
    pub replace: Option<u32>,
}

impl Default for DilationConfig {
    fn default() -> Self {
        Self {
            remove: None,
            // Restyling must not bleed onto the background.
            restyle: Some(0),
            replace: None,
        }
    }
}

/// Radius used at the reference width.
pub const DEFAULT_DIL_PX: u32 = 7;
pub const DEFAULT_DIL_REFERENCE_WIDTH: u32 = 640;

/// [`DEFAULT_DIL_PX`] scaled proportionally to `width`, rounded.
pub fn default_dil(width: u32) -> u32 {
    ((DEFAULT_DIL_PX as u64 * width as u64 + DEFAULT_DIL_REFERENCE_WIDTH as u64 / 2)
        / DEFAULT_DIL_REFERENCE_WIDTH as u64) as u32
}

impl DilationConfig {
    pub fn for_operation(&self, op: EditOperation, width: u32) -> u32 {
        let explicit = match op {
            EditOperation::Remove => self.remove,
            EditOperation::Restyle => self.restyle,
            EditOperation::Replace => self.replace,
        };
        explicit.unwrap_or_else(|| default_dil(width))
    }
}

pub const DEFAULT_APPEARANCE_WORDS: &[&str] = &[
    "red", "orange", "yellow", "green", "blue", "purple", "pink", "white", "black", "gray",
    "brown", "wooden", "metal", "plastic", "ceramic", "striped",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub variants_per_operation: u32,
    pub max_variants: u32,
    pub operations_enabled: BTreeSet<EditOperation>,
    pub dil: DilationConfig,
    /// Probability that a replacement uses the suggester rather than a
    /// same-category appearance change.
    pub strategy_mix: f64,
    /// Texture ids restyle plans may draw from.
    pub texture_pool: Vec<String>,
    pub jitter: JitterRanges,
    pub appearance_words: Vec<String>,
    pub surface: String,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            variants_per_operation: 2,
            max_variants: 64,
            operations_enabled: EditOperation::ALL.into_iter().collect(),
            dil: DilationConfig::default(),
            strategy_mix: 0.5,
            texture_pool: Vec::new(),
            jitter: JitterRanges::default(),
            appearance_words: DEFAULT_APPEARANCE_WORDS.iter().map(|s| s.to_string()).collect(),
            surface: "wooden table".to_string(),
        }
    }
}

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("invalid planner config: {0}")]
    InvalidConfig(String),
    #[error("invalid scene graph: {0}")]
    InvalidScene(String),
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlannerError> {
        let bad = |m: String| Err(PlannerError::InvalidConfig(m));
        if !(0.0..=1.0).contains(&self.strategy_mix) {
            return bad(format!("strategy_mix {} outside [0, 1]", self.strategy_mix));
        }
        if self.variants_per_operation > self.max_variants {
            return bad(format!(
                "variants_per_operation {} exceeds cap {}",
                self.variants_per_operation, self.max_variants
            ));
        }
        if self.appearance_words.is_empty() {
            return bad("appearance_words is empty".into());
        }
        self.jitter.validate().map_err(PlannerError::InvalidConfig)
    }
}

/// A plan with its position among the variants of its operation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannedEdit {
    pub variant_index: u32,
    pub plan: EditPlan,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlanOutcome {
    pub plans: Vec<PlannedEdit>,
    pub warnings: Vec<String>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based split of `root` into independent streams.
pub fn split_seed(root: u64, stream: u64, counter: u64) -> u64 {
    splitmix64(splitmix64(root ^ splitmix64(stream)).wrapping_add(counter))
}

/// Seed for a named unit (frame or episode id) under a root seed.
pub fn keyed_seed(root: u64, key: &str) -> u64 {
    let digest = Sha256::digest(key.as_bytes());
    let mut word = [0u8; 8];
    word.copy_from_slice(&digest[..8]);
    splitmix64(root ^ u64::from_le_bytes(word))
}

pub fn plan_seed(root: u64, op: EditOperation, variant: u32) -> u64 {
    split_seed(root, op.stream_index(), variant as u64)
}

fn draw_subset(rng: &mut ChaCha8Rng, ids: &[u32]) -> Vec<u32> {
    let n = ids.len();
    let size = rng.gen_range(0..=n);
    let mut chosen: Vec<u32> = index::sample(rng, n, size).into_iter().map(|i| ids[i]).collect();
    chosen.sort_unstable();
    chosen
}

fn draw_one(rng: &mut ChaCha8Rng, words: &[String]) -> String {
    words[rng.gen_range(0..words.len())].clone()
}

fn build_plan(
    scene: &SceneGraph,
    config: &PlannerConfig,
    op: EditOperation,
    seed: u64,
    ids: &[u32],
) -> EditPlan {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dil = config.dil.for_operation(op, scene.image_size.1);
    match op {
        EditOperation::Remove => EditPlan::removal(draw_subset(&mut rng, ids), dil, seed),
        EditOperation::Restyle => {
            let object_ids = draw_subset(&mut rng, ids);
            let texture_id = draw_one(&mut rng, &config.texture_pool);
            let jitter = config.jitter.sample(&mut rng);
            EditPlan::new(op, object_ids, seed, dil, OpParams::Restyle { texture_id, jitter })
        }
        EditOperation::Replace => {
            let object_id = ids[rng.gen_range(0..ids.len())];
            let strategy = if rng.gen_bool(config.strategy_mix) {
                ReplaceStrategy::Suggested
            } else {
                ReplaceStrategy::SameCategory
            };
            let appearance = draw_one(&mut rng, &config.appearance_words);
            EditPlan::new(
                op,
                vec![object_id],
                seed,
                dil,
                OpParams::Replace {
                    strategy,
                    appearance,
                    surface: config.surface.clone(),
                },
            )
        }
    }
}

/// Plans for every enabled operation, `variants_per_operation` each.
///
/// Removal and restyle pick a uniformly sized subset (0 to n) of the
/// candidates; replacement picks exactly one. Replacement is skipped with a
/// warning when there are no candidates, and restyle when there are no
/// textures.
pub fn plan_edits(
    scene: &SceneGraph,
    config: &PlannerConfig,
    seed: u64,
) -> Result<PlanOutcome, PlannerError> {
    config.validate()?;
    scene.validate().map_err(PlannerError::InvalidScene)?;
    let ids = scene.candidate_ids();
    let mut outcome = PlanOutcome::default();
    for op in &config.operations_enabled {
        let op = *op;
        if op == EditOperation::Replace && ids.is_empty() {
            outcome.warnings.push(format!(
                "frame {}: no candidates, replace plans omitted",
                scene.frame_id
            ));
            continue;
        }
        if op == EditOperation::Restyle && config.texture_pool.is_empty() {
            outcome.warnings.push(format!(
                "frame {}: texture pool empty, restyle plans omitted",
                scene.frame_id
            ));
            continue;
        }
        for variant in 0..config.variants_per_operation {
            let plan = build_plan(scene, config, op, plan_seed(seed, op, variant), &ids);
            outcome.plans.push(PlannedEdit {
                variant_index: variant,
                plan,
            });
        }
    }
    Ok(outcome)
}
