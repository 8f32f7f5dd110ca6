//! Expressive gesture generation for a humanoid upper body.
//!
//! Language-model agents turn social context into a gesture name, generate a
//! keyframe motion sequence from in-context demonstrations, and refine it
//! from natural-language feedback. Sequences are executed through inverse
//! kinematics, dense trajectory interpolation, and feasibility checks.

pub mod agents;
pub mod config;
pub mod gesture;
pub mod kinematics;
pub mod motion;
pub mod session;
pub mod trajectory;
