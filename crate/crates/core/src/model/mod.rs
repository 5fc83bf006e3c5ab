//! The encoder-decoder regression network and its checkpoint format.

mod blocks;
mod checkpoint;
mod config;
mod net;

pub use blocks::{
    branch_widths, BlockSpec, ContractingBlock, DenoiseBlock, EnsembleBlock, ExpandingBlock,
    InceptionResidual,
};
pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, MAGIC, VERSION,
};
pub use config::{LevelPlan, ModelConfig};
pub use net::{build_model, SeismoNet};
