pub mod corpus;
pub mod exec;
pub mod models;
pub mod numerics;
pub mod revision_miner;
pub mod text_repr;
pub mod train_eval;
