//! Plan execution: removal, restyling and replacement.
//!
//! Every editor computes its edit region from the plan, runs the safety
//! check against the target mask and trajectory footprint, and only then
//! touches pixels. Output pixels outside the region are copied from the
//! source, whatever the backend returned.

pub mod color;
mod remove;
mod replace;
mod restyle;
pub mod texture;

pub use remove::remove_objects;
pub use replace::{render_prompt, replace_object, same_category_name, ReplacementPrompt};
pub use restyle::{restyle_objects, SHADING_WEIGHT};

use std::collections::BTreeSet;

use thiserror::Error;

use crate::backends::{BackendError, MaskInpainter, ObjectSuggester, PromptedInpainter};
use crate::dataset::{DemonstrationFrame, EditProvenance, EditedFrame};
use crate::mask::{check_edit_safety, dilate, union, BinaryMask, MaskError, SafetyVerdict};
use crate::planner::{EditOperation, EditPlan, PlannedEdit};
use crate::scene::{SceneGraph, SegmentedObject};
use texture::TextureStore;

#[derive(Debug, Error)]
pub enum EditError {
    #[error("plan is a {found} plan, editor expects {expected}")]
    WrongOperation {
        expected: EditOperation,
        found: EditOperation,
    },
    #[error("plan parameters do not match operation {0}")]
    ParamsMismatch(EditOperation),
    #[error("object {0} is not an editable candidate")]
    NotACandidate(u32),
    #[error("object {0} listed twice")]
    DuplicateObject(u32),
    #[error("replacement edits exactly one object, plan lists {0}")]
    ReplaceCardinality(usize),
    #[error("plan rejected: {0}")]
    Rejected(SafetyVerdict),
    #[error("unknown texture `{0}`")]
    UnknownTexture(String),
    #[error("frame and scene disagree: {0}")]
    SceneMismatch(String),
    #[error("plan hash {0} does not match plan content")]
    StaleHash(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Mask(#[from] MaskError),
}

impl EditError {
    pub fn verdict(&self) -> Option<SafetyVerdict> {
        match self {
            EditError::Rejected(v) => Some(*v),
            _ => None,
        }
    }
}

/// Backends and assets an edit may need.
#[derive(Clone, Copy)]
pub struct EditBackends<'a> {
    pub mask_inpainter: &'a dyn MaskInpainter,
    pub prompted_inpainter: &'a dyn PromptedInpainter,
    pub suggester: &'a dyn ObjectSuggester,
    pub textures: &'a TextureStore,
}

/// Dispatch on the plan's operation.
pub fn execute(
    frame: &DemonstrationFrame,
    scene: &SceneGraph,
    planned: &PlannedEdit,
    backends: EditBackends<'_>,
) -> Result<EditedFrame, EditError> {
    let plan = &planned.plan;
    let mut edited = match plan.operation {
        EditOperation::Remove => remove_objects(frame, scene, plan, backends.mask_inpainter),
        EditOperation::Restyle => restyle_objects(frame, scene, plan, backends.textures),
        EditOperation::Replace => replace_object(
            frame,
            scene,
            plan,
            backends.prompted_inpainter,
            backends.suggester,
        ),
    }?;
    edited.variant_index = planned.variant_index;
    Ok(edited)
}

fn check_plan(
    frame: &DemonstrationFrame,
    scene: &SceneGraph,
    plan: &EditPlan,
    expected: EditOperation,
) -> Result<(), EditError> {
    if plan.operation != expected {
        return Err(EditError::WrongOperation {
            expected,
            found: plan.operation,
        });
    }
    if !plan.hash_is_current() {
        return Err(EditError::StaleHash(plan.plan_hash.clone()));
    }
    if frame.frame_id != scene.frame_id {
        return Err(EditError::SceneMismatch(format!(
            "frame {} vs scene {}",
            frame.frame_id, scene.frame_id
        )));
    }
    let dims = (frame.image.height(), frame.image.width());
    if dims != scene.image_size {
        return Err(EditError::SceneMismatch(format!(
            "frame is {dims:?}, scene is {:?}",
            scene.image_size
        )));
    }
    Ok(())
}

/// Resolve plan ids to candidates. The target and size-excluded objects are
/// never candidates, so they are refused here.
pub fn selected_objects<'s>(
    scene: &'s SceneGraph,
    plan: &EditPlan,
) -> Result<Vec<&'s SegmentedObject>, EditError> {
    let mut seen = BTreeSet::new();
    plan.object_ids
        .iter()
        .map(|&id| {
            if !seen.insert(id) {
                return Err(EditError::DuplicateObject(id));
            }
            scene.candidate(id).ok_or(EditError::NotACandidate(id))
        })
        .collect()
}

/// `dilate(union(selected masks), plan.dil)`.
pub fn edit_region(scene: &SceneGraph, plan: &EditPlan) -> Result<BinaryMask, EditError> {
    let selected = selected_objects(scene, plan)?;
    let masks: Vec<&BinaryMask> = selected.iter().map(|o| &o.mask).collect();
    Ok(dilate(&union(&masks, scene.image_size)?, plan.dil))
}

fn ensure_safe(
    frame: &DemonstrationFrame,
    scene: &SceneGraph,
    region: &BinaryMask,
    operation: EditOperation,
) -> Result<(), EditError> {
    match check_edit_safety(
        region,
        &scene.target.mask,
        frame.trajectory_footprint.as_ref(),
        operation,
    )? {
        SafetyVerdict::Ok => Ok(()),
        verdict => Err(EditError::Rejected(verdict)),
    }
}

fn labels(objects: &[&SegmentedObject]) -> Vec<String> {
    objects.iter().map(|o| o.label().to_string()).collect()
}

fn edited_frame(
    frame: &DemonstrationFrame,
    plan: &EditPlan,
    image: image::RgbImage,
    edited_region: BinaryMask,
    provenance: EditProvenance,
) -> EditedFrame {
    EditedFrame {
        source_frame_id: frame.frame_id.clone(),
        episode_id: frame.episode_id.clone(),
        image,
        plan: plan.clone(),
        variant_index: 0,
        edited_region,
        provenance,
        state: frame.state.clone(),
        action: frame.action.clone(),
    }
}
