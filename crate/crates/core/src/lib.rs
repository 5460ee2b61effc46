//! Continuous-time follow-the-regularized-leader dynamics on finite games.
//!
//! The crate is organised bottom-up: [`game`] and [`equilibrium`] describe
//! finite games and their Nash equilibria, [`regularizer`] provides the
//! choice maps, [`dynamics`] integrates the induced flows with the schemes
//! in [`ode`], and [`analysis`] runs the numerical experiments built on them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod corpus;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod game;
pub mod io;
pub mod ode;
pub mod profile;
pub mod regularizer;

pub use error::{Error, Result};
pub use game::FiniteGame;
pub use profile::{Blocks, MixedProfile, ReducedScore, ScoreProfile, SupportSet};
pub use regularizer::Regularizer;
