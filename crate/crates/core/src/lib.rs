pub mod baselines;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod neural;
pub mod score_model;
pub mod sde;
pub mod systems;
