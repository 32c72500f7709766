//! The chapters of the guide, compiled as doc-tests so that every snippet in
//! the book is checked by `cargo test`.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}
#[doc = include_str!("../../../book/src/messages.md")]
mod messages {}
#[doc = include_str!("../../../book/src/multipliers.md")]
mod multipliers {}
#[doc = include_str!("../../../book/src/state_space.md")]
mod state_space {}
#[doc = include_str!("../../../book/src/em.md")]
mod em {}
#[doc = include_str!("../../../book/src/verification.md")]
mod verification {}
#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}
