//! Scene model and selection geometry for virtual crime-scene examination.
//!
//! - [`scene`]: objects with current and original poses
//! - [`import`]: OBJ and glTF 2.0 loading
//! - [`mesh`]: indexed triangle meshes and closed-mesh checks
//! - [`selection`]: vertex selections, expand/shrink, vetting, measurement
//! - [`camera`]: examiner camera and observation plane
//! - [`raster`]: deterministic snapshot rendering

pub mod camera;
pub mod import;
pub mod math;
pub mod mesh;
pub mod raster;
pub mod scene;
pub mod selection;
pub mod transform;

pub use camera::{observation_plane, CameraPose, ObservationPlane};
pub use import::{load_scene, load_scene_with_id, ImportError};
pub use math::{Quat, Vec3};
pub use mesh::{is_watertight, MeshError, TriangleMesh};
pub use raster::{render_snapshot, Snapshot};
pub use scene::{Scene, SceneError, SceneEvent, SceneObject};
pub use selection::{
    expand_selection, measure_distance, shrink_selection, validate_selection, ClosedMeshReport,
    SelectionError, VertexSelection,
};
pub use transform::Transform;
