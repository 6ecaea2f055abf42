pub mod ablate;
pub mod eval;
pub mod export;
pub mod sweep;
pub mod train;
pub mod validate;
