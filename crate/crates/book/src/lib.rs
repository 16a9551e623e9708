//! mdbook cannot run snippets that depend on a workspace crate, so each
//! chapter is included here as a module doc and `cargo test --doc` runs it.

#[doc = include_str!("../../../book/src/intro.md")]
pub mod intro {}
#[doc = include_str!("../../../book/src/protocol.md")]
pub mod protocol {}
#[doc = include_str!("../../../book/src/equivocation.md")]
pub mod equivocation {}
#[doc = include_str!("../../../book/src/licenses.md")]
pub mod licenses {}
#[doc = include_str!("../../../book/src/sampling.md")]
pub mod sampling {}
#[doc = include_str!("../../../book/src/registry.md")]
pub mod registry {}
#[doc = include_str!("../../../book/src/stability.md")]
pub mod stability {}
#[doc = include_str!("../../../book/src/scenarios.md")]
pub mod scenarios {}
#[doc = include_str!("../../../book/src/formats.md")]
pub mod formats {}
