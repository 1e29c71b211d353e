//! Compiles the chapters of the guide in `book/` so that every Rust listing
//! in them runs under `cargo test --doc`. One module per chapter, so a
//! failing listing can be traced back to its chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/images.md")]
pub mod images {}

#[doc = include_str!("../../../book/src/gradients.md")]
pub mod gradients {}

#[doc = include_str!("../../../book/src/solver.md")]
pub mod solver {}

#[doc = include_str!("../../../book/src/decomposition.md")]
pub mod decomposition {}

#[doc = include_str!("../../../book/src/pipeline.md")]
pub mod pipeline {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
