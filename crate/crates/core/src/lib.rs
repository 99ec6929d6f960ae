//! Open quantum cellular automata on Rydberg chains: the effective PXP
//! Lindblad model, its full three-level parent, observables, and a
//! particle-swarm search over rule space.

pub mod checkpoint;
pub mod cli;
pub mod error;
pub mod evolve;
pub mod fullmodel;
pub mod model;
pub mod numerics;
pub mod observables;
pub mod states;
pub mod vqo;

pub use error::{Error, Result};
