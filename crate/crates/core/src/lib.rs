pub mod analysis;
pub mod assembly;
pub mod config;
pub mod coupling;
pub mod decomposition;
pub mod driver;
pub mod fields;
pub mod linalg;
pub mod mesh;
pub mod output;
pub mod problems;
