//! Core numerics for variational neural belief planning: Gaussian-mixture beliefs with
//! pathwise-differentiable sampling, smooth CVaR risk, grasp costs and wrench-space quality,
//! and pose-hypothesis fusion.
//!
//! Every routine is generic over the scalar type through [`Real`]; the aliases at the crate
//! root fix it to `f64`, which the planner uses throughout.

pub mod belief;
pub mod error;
pub mod fusion;
pub mod grasp;
pub mod linalg;
pub mod observation;
pub mod risk;
pub mod scalar;

#[cfg(feature = "oracles")]
pub mod oracles;

pub use error::{Result, VnbError};
pub use scalar::Real;

pub type BeliefParams = belief::BeliefParams<f64>;
pub type ReparamSample = belief::ReparamSample<f64>;
pub type BeliefGrad = belief::BeliefGrad<f64>;
pub type SirenBelief = belief::SirenBelief<f64>;
pub type RiskConfig = risk::RiskConfig<f64>;
pub type CostSamples = risk::CostSamples<f64>;
pub type LatentState = grasp::LatentState<f64>;
pub type ContactParams = grasp::ContactParams<f64>;
pub type Contact = grasp::Contact<f64>;
pub type WrenchSpace = grasp::WrenchSpace<f64>;
pub type HandModel = grasp::HandModel<f64>;
pub type CostWeights = grasp::CostWeights<f64>;
pub type Observation = observation::Observation<f64>;
pub type PoseHypothesis = fusion::PoseHypothesis<f64>;
