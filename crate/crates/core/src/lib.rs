//! Newest vertex bisection on simplicial meshes of any dimension.
//!
//! The crate covers the bisection rule and its conforming closure
//! ([`nvb`]), symbolic refinement trees ([`tree`]), face compatibility
//! checks ([`compat`]), the vertex relabeling that makes a mesh weakly
//! compatible ([`relabel`]), quality and closure-cost metrics ([`metrics`])
//! and mesh file formats ([`io`]).

pub mod compat;
pub mod io;
pub mod mesh;
pub mod metrics;
pub mod nvb;
mod order_list;
pub mod relabel;
pub mod tree;

pub use compat::{
    check_weak, check_weakest, classify_face, distance1, reflected_neighbors, CompatReport, FaceClass,
    WeakCertificate,
};
pub use mesh::{
    generate_kuhn_grid, EdgeKey, FaceAdjacency, FaceKey, Mesh, MeshError, Simplex, VertexId, VertexList,
};
pub use relabel::{
    apply_labeling, order_srn, order_srn2, partition_ile, partition_lae, partition_ot0, relabel,
    AnnouncedEdges, Membership, OrderStrategy, SetStrategy, VertexClass, VertexPartition,
};
pub use nvb::{
    bisect, is_conforming, refine_closure, refine_closure_with, type0_completion, uniform_refine,
    ClosureOptions, ClosureStats,
};

pub use tree::{face_trace_type, induced_face_tree, nvb_equivalent, refinement_tree, EdgeTree, Label, LabelEdge};
pub use metrics::{
    distance2, distance2_at_level, element_quality, polar_sine, quality_report, ClosureReport, ElementQuality,
    QualityReport, Stat,
};
