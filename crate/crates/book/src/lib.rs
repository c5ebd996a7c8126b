//! The guide under `book/` with every Rust listing compiled and run as a
//! doctest. One module per chapter so a failure points at its chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/meshes.md")]
pub mod meshes {}
#[doc = include_str!("../../../book/src/geodesics.md")]
pub mod geodesics {}
#[doc = include_str!("../../../book/src/contact_transfer.md")]
pub mod contact_transfer {}
#[doc = include_str!("../../../book/src/body.md")]
pub mod body {}
#[doc = include_str!("../../../book/src/fitting.md")]
pub mod fitting {}
#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}
#[doc = include_str!("../../../book/src/retrieval.md")]
pub mod retrieval {}
#[doc = include_str!("../../../book/src/formats.md")]
pub mod formats {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
