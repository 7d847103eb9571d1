//! The user guide, embedded so its code listings compile and run as
//! doc-tests.
//!
//! The same chapters render as a book with `mdbook build book` from the
//! repository root. mdbook cannot execute Rust listings on its own, so each
//! chapter is also included here as a documented module: `cargo test --doc`
//! runs every listing, and a failing one points at the module (and therefore
//! the chapter) it came from.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/cube-model.md")]
pub mod cube_model {}

#[doc = include_str!("../../../book/src/correlation.md")]
pub mod correlation_structure {}

#[doc = include_str!("../../../book/src/sampling.md")]
pub mod sampling_diverse_bands {}

#[doc = include_str!("../../../book/src/grouping.md")]
pub mod overlaps_and_grouping {}

#[doc = include_str!("../../../book/src/pipeline.md")]
pub mod pipeline_and_cli {}
