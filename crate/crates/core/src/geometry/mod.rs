//! Triangle meshes, OBJ IO, primitive shapes and voxelization.

mod mesh;
mod obj;
mod shapes;
mod voxel;

pub(crate) use mesh::{cross, dot};
pub use mesh::{face_normals_var, EdgeInfo, Point3, TriangleMesh};
#[cfg(test)]
pub(crate) use mesh::{norm, sub};
pub use obj::{load_obj, read_obj_file, write_obj, write_obj_file};
pub use shapes::{
    icosahedron, icosphere, make_box, make_cuboid, make_dome, make_plate, merge,
    subdivide_midpoint, unit_cube,
};
pub use voxel::{voxelize, GridSpec, VoxelGrid};
