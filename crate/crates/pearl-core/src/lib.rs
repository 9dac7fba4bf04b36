//! Simulation library for per-player local SGD (PEARL-SGD) in n-player games.
//!
//! Players hold blocks of a joint action vector and repeatedly run local SGD
//! steps against a frozen snapshot of the other players' actions, with a
//! simulated master server synchronizing the joint vector every `tau` steps.
//! The crate ships the game abstractions ([`game`]), a library of concrete
//! game instances ([`problems`]), parameter analysis ([`params`]), the
//! synchronization engine itself ([`engine`]), and numerical checks of the
//! convergence bounds the step-size rules are derived from ([`verify`]).

pub mod engine;
pub mod game;
pub mod linalg;
pub mod params;
pub mod problems;
pub mod rng;
pub mod verify;

pub use game::{
    BlockLayout, GameProblem, GradientSample, JointAction, LayoutError, ProblemParameters,
};
pub use rng::{DrawRng, RngStream};
