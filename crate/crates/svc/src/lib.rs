//! Command line tools, HTTP play service and file persistence for Seurat
//! games.

pub mod analysis;
pub mod api;
pub mod cli;
pub mod graphs;
pub mod session;
pub mod store;
