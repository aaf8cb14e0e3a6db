pub mod commands;
pub mod config;
pub mod error;
pub mod extract;
pub mod files;
pub mod obj;
pub mod patterns;
pub mod ply;
pub mod png_io;
pub mod record;
pub mod tensors;
pub mod toys;
pub mod verify;

pub use error::{CliError, Result};
