use image::{Rgb, RgbImage};

use crate::dataset::{DemonstrationFrame, EditProvenance, EditedFrame, TextureRef};
use crate::mask::{dilate, union, BinaryMask};
use crate::planner::{EditOperation, EditPlan, OpParams};
use crate::scene::SceneGraph;

use super::color::{luma, rgb_to_ycbcr, to_f64, to_u8, ycbcr_to_rgb, HsvJitter};
use super::texture::{TextureRecord, TextureStore};
use super::{check_plan, edited_frame, ensure_safe, labels, selected_objects, EditError};

/// Weight of the original luminance in the restyled pixel. Keeps the
/// object's shading while the texture supplies chroma and detail.
pub const SHADING_WEIGHT: f64 = 0.6;

/// Paint each selected object's mask (dilated by `plan.dil`) with a texture
/// tiled from the object's box origin, then apply the plan's HSV jitter.
pub fn restyle_objects(
    frame: &DemonstrationFrame,
    scene: &SceneGraph,
    plan: &EditPlan,
    textures: &TextureStore,
) -> Result<EditedFrame, EditError> {
    check_plan(frame, scene, plan, EditOperation::Restyle)?;
    let OpParams::Restyle { texture_id, jitter } = &plan.op_params else {
        return Err(EditError::ParamsMismatch(EditOperation::Restyle));
    };
    jitter
        .validate()
        .map_err(|_| EditError::ParamsMismatch(EditOperation::Restyle))?;
    let texture = textures
        .get(texture_id)
        .ok_or_else(|| EditError::UnknownTexture(texture_id.clone()))?;
    let selected = selected_objects(scene, plan)?;

    let regions: Vec<BinaryMask> = selected.iter().map(|o| dilate(&o.mask, plan.dil)).collect();
    let region = union(&regions.iter().collect::<Vec<_>>(), scene.image_size)?;
    ensure_safe(frame, scene, &region, EditOperation::Restyle)?;

    let mut image = frame.image.clone();
    for (object, object_region) in selected.iter().zip(&regions) {
        let origin = object.base.bbox;
        paint_texture(&mut image, &frame.image, object_region, (origin.x, origin.y), texture, jitter);
    }

    let provenance = EditProvenance {
        labels: labels(&selected),
        texture: Some(TextureRef {
            texture_id: texture.texture_id.clone(),
            category: texture.category.clone(),
        }),
        ..EditProvenance::default()
    };
    Ok(edited_frame(frame, plan, image, region, provenance))
}

/// Restyled value for one pixel: texture chroma, blended luminance, jitter.
pub(crate) fn restyle_pixel(original: [u8; 3], texel: [u8; 3], jitter: &HsvJitter) -> [u8; 3] {
    let y_orig = luma(to_f64(original));
    let [y_tex, cb, cr] = rgb_to_ycbcr(to_f64(texel));
    let y = SHADING_WEIGHT * y_orig + (1.0 - SHADING_WEIGHT) * y_tex;
    let rgb = ycbcr_to_rgb([y, cb, cr]).map(|c| c.clamp(0.0, 255.0));
    to_u8(jitter.apply(rgb))
}

fn paint_texture(
    out: &mut RgbImage,
    source: &RgbImage,
    region: &BinaryMask,
    origin: (u32, u32),
    texture: &TextureRecord,
    jitter: &HsvJitter,
) {
    let (tw, th) = (texture.image.width() as i64, texture.image.height() as i64);
    let Some(bounds) = region.bounding_box() else {
        return;
    };
    for y in bounds.y..bounds.bottom() {
        for x in bounds.x..bounds.right() {
            if !region.get(x, y) {
                continue;
            }
            let tx = (x as i64 - origin.0 as i64).rem_euclid(tw) as u32;
            let ty = (y as i64 - origin.1 as i64).rem_euclid(th) as u32;
            let texel = texture.image.get_pixel(tx, ty).0;
            let px = restyle_pixel(source.get_pixel(x, y).0, texel, jitter);
            out.put_pixel(x, y, Rgb(px));
        }
    }
}
