//! Adversarial lane-change scenario workbench.
//!
//! Surrounding vehicles are trained as one joint DDPG agent to make a tested
//! lane-change controller fail; an ensemble of such agents is then clustered
//! by the state distributions it induces.

pub mod adversary;
pub mod analysis;
pub mod artifact;
pub mod cli;
pub mod ego;
pub mod neural;
pub mod replay;
pub mod scenario;
pub mod seed;
