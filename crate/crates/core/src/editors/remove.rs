use crate::backends::{composite_masked, MaskInpainter};
use crate::dataset::{DemonstrationFrame, EditProvenance, EditedFrame};
use crate::planner::{EditOperation, EditPlan, OpParams};
use crate::scene::SceneGraph;

use super::{check_plan, edit_region, edited_frame, ensure_safe, labels, selected_objects, EditError};

/// Erase the plan's objects by inpainting `dilate(union(masks), dil)`.
/// An empty object list returns the source image unchanged.
pub fn remove_objects(
    frame: &DemonstrationFrame,
    scene: &SceneGraph,
    plan: &EditPlan,
    inpainter: &dyn MaskInpainter,
) -> Result<EditedFrame, EditError> {
    check_plan(frame, scene, plan, EditOperation::Remove)?;
    if plan.op_params != OpParams::Remove {
        return Err(EditError::ParamsMismatch(EditOperation::Remove));
    }
    let selected = selected_objects(scene, plan)?;
    let region = edit_region(scene, plan)?;
    ensure_safe(frame, scene, &region, EditOperation::Remove)?;

    let image = if region.is_empty() {
        frame.image.clone()
    } else {
        let filled = inpainter.inpaint(&frame.image, &region)?;
        composite_masked(&frame.image, &filled, &region)?
    };
    let provenance = EditProvenance {
        labels: labels(&selected),
        backends: vec![inpainter.descriptor()],
        ..EditProvenance::default()
    };
    Ok(edited_frame(frame, plan, image, region, provenance))
}
