//! Overlapped RBF-FD: sparse high-order differentiation matrices on scattered
//! nodes, built from polyharmonic-spline stencils with polynomial
//! augmentation, and an implicit BDF heat solver on top of them.

pub mod assembly;
pub mod error;
pub mod heat_solver;
pub mod kdtree;
pub mod linalg;
pub mod local_weights;
pub mod metrics;
pub mod nodeset;
pub mod stencil;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/nodes.md")]
    mod nodes {}
    #[doc = include_str!("../../../book/src/weights.md")]
    mod weights {}
    #[doc = include_str!("../../../book/src/assembly.md")]
    mod assembly {}
    #[doc = include_str!("../../../book/src/stability.md")]
    mod stability {}
    #[doc = include_str!("../../../book/src/heat.md")]
    mod heat {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
