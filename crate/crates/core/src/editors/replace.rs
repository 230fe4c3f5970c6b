use serde::{Deserialize, Serialize};

use crate::backends::stubs::COLOR_WORDS;
use crate::backends::{
    composite_masked, BackendError, ObjectSuggester, PromptedInpainter, SizeClass, Suggestion,
};
use crate::dataset::{DemonstrationFrame, EditProvenance, EditedFrame};
use crate::planner::{EditOperation, EditPlan, OpParams, ReplaceStrategy, DEFAULT_APPEARANCE_WORDS};
use crate::scene::{SceneGraph, SegmentedObject};

use super::{check_plan, edit_region, edited_frame, ensure_safe, labels, selected_objects, EditError};

/// The structured prompt handed to the prompted inpainter.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplacementPrompt {
    pub object_name: String,
    pub object_description: String,
    pub surface_description: String,
    pub rendered_prompt: String,
}

fn article(word: &str) -> &'static str {
    match word.chars().next().map(|c| c.to_ascii_lowercase()) {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

/// `"a dish cloth on a wooden table"`.
pub fn render_prompt(object_name: &str, surface: &str) -> String {
    format!(
        "{} {object_name} on {} {surface}",
        article(object_name),
        article(surface)
    )
}

/// `"{appearance} {label}"`, with colour or appearance words already in the
/// label dropped so "red cup" restyled yellow reads "yellow cup".
pub fn same_category_name(label: &str, appearance: &str) -> String {
    let is_appearance = |t: &str| {
        let t = t.to_lowercase();
        COLOR_WORDS.iter().any(|(w, _)| *w == t) || DEFAULT_APPEARANCE_WORDS.contains(&t.as_str())
    };
    let mut tokens: Vec<&str> = label.split_whitespace().filter(|t| !is_appearance(t)).collect();
    if tokens.is_empty() {
        tokens = label.split_whitespace().collect();
    }
    format!("{appearance} {}", tokens.join(" "))
}

fn same_category_prompt(label: &str, appearance: &str, surface: &str) -> ReplacementPrompt {
    let object_name = same_category_name(label, appearance);
    ReplacementPrompt {
        object_description: format!("a {appearance} version of the {label}"),
        rendered_prompt: render_prompt(&object_name, surface),
        surface_description: surface.to_string(),
        object_name,
    }
}

fn suggested_prompt(suggestion: &Suggestion, surface: &str) -> ReplacementPrompt {
    let object_name = suggestion.name.trim().to_string();
    ReplacementPrompt {
        object_description: suggestion.description.clone(),
        rendered_prompt: render_prompt(&object_name, surface),
        surface_description: surface.to_string(),
        object_name,
    }
}

fn scene_context(scene: &SceneGraph, surface: &str) -> String {
    let mut names: Vec<&str> = std::iter::once(scene.target.label())
        .chain(scene.candidates.iter().map(|c| c.label()))
        .collect();
    names.dedup();
    format!("objects: {}; surface: {surface}", names.join(", "))
}

/// A suggestion is usable if it names something no larger than the
/// original object.
fn suggestion_problem(s: &Suggestion, object: &SegmentedObject, scene: &SceneGraph) -> Option<String> {
    if s.name.trim().is_empty() {
        return Some("suggester returned an empty name".into());
    }
    let original = SizeClass::of_bbox(object.base.bbox, scene.image_size);
    if s.size_class > original {
        return Some(format!(
            "suggested `{}` is {:?}, larger than the {:?} original",
            s.name, s.size_class, original
        ));
    }
    None
}

/// Replace one object with a different one rendered into `dilate(mask, dil)`.
pub fn replace_object(
    frame: &DemonstrationFrame,
    scene: &SceneGraph,
    plan: &EditPlan,
    inpainter: &dyn PromptedInpainter,
    suggester: &dyn ObjectSuggester,
) -> Result<EditedFrame, EditError> {
    check_plan(frame, scene, plan, EditOperation::Replace)?;
    let OpParams::Replace {
        strategy,
        appearance,
        surface,
    } = &plan.op_params
    else {
        return Err(EditError::ParamsMismatch(EditOperation::Replace));
    };
    if plan.object_ids.len() != 1 {
        return Err(EditError::ReplaceCardinality(plan.object_ids.len()));
    }
    let selected = selected_objects(scene, plan)?;
    let object = selected[0];
    let region = edit_region(scene, plan)?;
    ensure_safe(frame, scene, &region, EditOperation::Replace)?;

    let mut backends = vec![inpainter.descriptor()];
    let mut fallback = None;
    let prompt = match strategy {
        ReplaceStrategy::SameCategory => same_category_prompt(object.label(), appearance, surface),
        ReplaceStrategy::Suggested => {
            backends.push(suggester.descriptor());
            let outcome = suggester.suggest(object.label(), &scene_context(scene, surface));
            let problem = match &outcome {
                Ok(s) => suggestion_problem(s, object, scene),
                // Transient failures propagate; a refusal means "no idea".
                Err(e @ (BackendError::Permanent { .. } | BackendError::Protocol(_))) => {
                    Some(e.to_string())
                }
                Err(_) => None,
            };
            match (outcome, problem) {
                (Ok(s), None) => suggested_prompt(&s, surface),
                (Err(e), None) => return Err(e.into()),
                (_, Some(reason)) => {
                    log::warn!(
                        "frame {}: suggestion for `{}` rejected ({reason}); using same-category prompt",
                        frame.frame_id,
                        object.label()
                    );
                    fallback = Some(reason);
                    same_category_prompt(object.label(), appearance, surface)
                }
            }
        }
    };

    let generated = inpainter.inpaint(&frame.image, &region, &prompt.rendered_prompt)?;
    let image = composite_masked(&frame.image, &generated, &region)?;
    let provenance = EditProvenance {
        labels: labels(&selected),
        prompt: Some(prompt),
        replacement_fallback: fallback,
        backends,
        ..EditProvenance::default()
    };
    Ok(edited_frame(frame, plan, image, region, provenance))
}
