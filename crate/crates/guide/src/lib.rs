//! The book's chapters, compiled so their listings run as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/complexes.md")]
pub mod complexes {}

#[doc = include_str!("../../../book/src/curvature.md")]
pub mod curvature {}

#[doc = include_str!("../../../book/src/operators.md")]
pub mod operators {}

#[doc = include_str!("../../../book/src/flows.md")]
pub mod flows {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
