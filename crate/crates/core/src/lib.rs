//! Seurat colouring games on finite digraphs.

pub mod engine;
pub mod error;
pub mod gen;
pub mod graph;
pub mod iso;
pub mod refine;
pub mod recon;
pub mod solve;
pub mod strat;

pub use error::{Error, Result};
