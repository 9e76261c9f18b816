//! Ground-plane projection of first-person masks and the layered
//! allocentric context map.

mod camera;
mod context;
mod projection;

pub use camera::{CameraPoint, Intrinsics, Pose, DEFAULT_CAMERA_HEIGHT, DEFAULT_PITCH_DEG};
pub use context::{
    build_context_map, fit_context_channels, fit_context_halves, read_snapshot, write_snapshot, ContextMap, PlacedReference,
    SnapshotHeader, CONTEXT_CHANNELS,
};
pub use projection::{
    accumulate, bilinear, boundary_mask, observability_update, project_mask, visible_cells, MapGeometry,
    Projected, ENV_EDGE, MAP_SIZE,
};
