//! Runs the guide's code samples as doc-tests.
//!
//! mdbook renders `book/` but cannot compile its Rust snippets against this
//! crate, so every chapter is also included here as a doc comment; `cargo
//! test --doc` then builds and runs each fenced block. One module per
//! chapter keeps failures pointing at the right file.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}

#[doc = include_str!("../../../book/src/data.md")]
mod data {}

#[doc = include_str!("../../../book/src/autodiff.md")]
mod autodiff {}

#[doc = include_str!("../../../book/src/model.md")]
mod model {}

#[doc = include_str!("../../../book/src/losses.md")]
mod losses {}

#[doc = include_str!("../../../book/src/metrics.md")]
mod metrics {}

#[doc = include_str!("../../../book/src/training.md")]
mod training {}

#[doc = include_str!("../../../book/src/reranking.md")]
mod reranking {}
