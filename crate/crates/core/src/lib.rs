pub mod datagen;
pub mod dynamics;
pub mod experiment;
pub mod matrix_serde;
pub mod runtime;
pub mod synthesis;
