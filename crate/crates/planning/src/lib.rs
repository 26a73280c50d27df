//! Learned belief dynamics, the quasi-static grasp simulator, the VNB-MPC planner and the
//! baseline planners it is benchmarked against.

pub mod baselines;
pub mod bench;
pub mod episode;
pub mod error;
pub mod nets;
pub mod planner;
pub mod sim;
pub mod training;

pub use error::{PlanningError, Result};
