//! Pipeline library behind the `npd` binary: on-disk dataset store plus
//! the generate / precompute / train / evaluate steps.

pub mod commands;
pub mod pipeline;
pub mod store;
