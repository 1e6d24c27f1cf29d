//! Runs the guide's Rust listings as doc-tests; mdbook cannot link the
//! workspace crates itself. One module per chapter keeps failures traceable.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}

#[doc = include_str!("../../../book/src/analysis.md")]
mod analysis {}

#[doc = include_str!("../../../book/src/staffing.md")]
mod staffing {}

#[doc = include_str!("../../../book/src/simulation.md")]
mod simulation {}

#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}

#[doc = include_str!("../../../book/src/reproduction.md")]
mod reproduction {}
