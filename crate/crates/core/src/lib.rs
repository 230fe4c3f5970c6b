//! Distractor-editing augmentation for robot demonstration images.
//!
//! A frame is decomposed into a target object, editable candidates and
//! oversized objects ([`scene`]). Seeded [`planner::EditPlan`]s pick which
//! candidates to remove, restyle or replace, and the [`editors`] execute
//! them through pluggable model [`backends`] while guaranteeing that the
//! target and every pixel outside the recorded edit region stay untouched.
//! [`metrics`] holds the evaluation side: SSIM, Fréchet distance over
//! backend features, and affordance-point accuracy per clutter level.

pub mod backends;
pub mod dataset;
pub mod editors;
pub mod imageio;
pub mod mask;
pub mod metrics;
pub mod planner;
pub mod scene;

pub use dataset::{DemonstrationFrame, EditedFrame};
pub use mask::{BBox, BinaryMask, SafetyVerdict};
pub use planner::{EditOperation, EditPlan, PlannerConfig};
pub use scene::SceneGraph;
