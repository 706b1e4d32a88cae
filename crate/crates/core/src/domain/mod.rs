//! Lattice, node masks for Ω and removed sets, gallery domains and boundary data.

mod data;
mod gallery;
mod lattice;
mod mask;

pub use data::DataSpec;
pub use gallery::{
    comb_feasible_jmax, make_ball, make_comb, make_exterior_block, make_halfspace_slit, make_punctured_ball,
    make_removed_block, shell_nodes, CombHole, DomainSpec, Gallery,
};
pub use lattice::{dist, AxisBox, Lattice, Point};
pub use mask::{DomainMask, NodeStatus, StatusRun};
