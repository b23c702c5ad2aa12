//! Core math for active inference hearing-aid tuning: distributions,
//! autoregressive models, variational message passing, context tracking,
//! Gaussian-process preference learning and the acquisition agent.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64` for application code.

pub mod agent;
pub mod armodels;
pub mod context;
pub mod dists;
pub mod error;
pub mod gpc;
pub mod infer;
pub mod linalg;
pub mod real;
pub mod rng;
pub mod simuser;
pub mod special;

pub use error::{Error, Result};
pub use real::Real;

pub type Gaussian = dists::Gaussian<f64>;
pub type Gamma = dists::Gamma<f64>;
pub type Categorical = dists::Categorical<f64>;
pub type Matrix = linalg::Matrix<f64>;
pub type KernelParams = gpc::KernelParams<f64>;
pub type GpcState = gpc::GpcState<f64>;
pub type Agent = agent::Agent<f64>;
pub type AgentConfig = agent::AgentConfig<f64>;
pub type EfeField = agent::EfeField<f64>;
pub type UserPrefs = simuser::UserPrefs<f64>;
pub type ContextBank = context::ContextBank<f64>;
pub type ContextTracker = context::ContextTracker<f64>;
pub type Posteriors = infer::Posteriors<f64>;

/// Single-precision aliases.
pub mod f32 {
    pub type Gaussian = crate::dists::Gaussian<f32>;
    pub type Gamma = crate::dists::Gamma<f32>;
    pub type Categorical = crate::dists::Categorical<f32>;
    pub type Matrix = crate::linalg::Matrix<f32>;
    pub type KernelParams = crate::gpc::KernelParams<f32>;
    pub type GpcState = crate::gpc::GpcState<f32>;
    pub type Agent = crate::agent::Agent<f32>;
    pub type AgentConfig = crate::agent::AgentConfig<f32>;
    pub type EfeField = crate::agent::EfeField<f32>;
    pub type UserPrefs = crate::simuser::UserPrefs<f32>;
    pub type ContextBank = crate::context::ContextBank<f32>;
    pub type ContextTracker = crate::context::ContextTracker<f32>;
    pub type Posteriors = crate::infer::Posteriors<f32>;
}
