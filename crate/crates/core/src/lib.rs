pub mod align;
pub mod docparse;
pub mod error;
pub mod evalkit;
pub mod filter;
pub mod ingest;
pub mod langid;
pub mod model;
pub mod pipeline;
pub mod segment;
pub mod store;
pub mod tmx;
pub mod trilingual;

pub use error::{Error, Result};
