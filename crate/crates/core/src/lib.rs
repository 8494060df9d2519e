//! Navier–Stokes finite elements with a learned fine-level velocity correction.

pub mod band;
pub mod basis;
pub mod cli;
pub mod dense;
pub mod divfree;
pub mod dnnmg;
pub mod error;
pub mod fem;
pub mod mesh;
pub mod metrics;
pub mod neural;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/meshes.md")]
    mod meshes {}
    #[doc = include_str!("../../../book/src/discretisation.md")]
    mod discretisation {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/divergence_free.md")]
    mod divergence_free {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/hybrid.md")]
    mod hybrid {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
