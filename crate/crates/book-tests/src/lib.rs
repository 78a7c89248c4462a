//! Runs the code blocks of the guide as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/expressions.md")]
pub mod expressions {}
#[doc = include_str!("../../../book/src/enveloping.md")]
pub mod enveloping {}
#[doc = include_str!("../../../book/src/lifts.md")]
pub mod lifts {}
#[doc = include_str!("../../../book/src/superposition.md")]
pub mod superposition {}
#[doc = include_str!("../../../book/src/automorphic.md")]
pub mod automorphic {}
#[doc = include_str!("../../../book/src/integration.md")]
pub mod integration {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
#[doc = include_str!("../../../README.md")]
pub mod readme {}
