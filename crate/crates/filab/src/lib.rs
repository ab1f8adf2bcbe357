//! Imitation learning as f-divergence minimization on finite MDPs.
//!
//! The crate provides four layers:
//!
//! * exact machinery: tabular MDPs, occupancy measures, f-divergences with
//!   explicit zero-mass conventions ([`mdp`], [`divergence`]);
//! * estimation: variational lower bounds, discriminator fitting, and a
//!   least-squares density-ratio estimator ([`estimation`]);
//! * algorithms: variational imitation training, interactive reverse-KL
//!   methods, and exhaustive policy enumeration ([`vim`], [`interactive`],
//!   [`enumeration`]);
//! * verification: property checks with deliberate mutations that must fail
//!   ([`verify`]), plus the environments the checks run on ([`envs`]).
//!
//! The `filab` binary exposes the experiment workbench; see the crate
//! README for the command-line contract.

pub mod cli;
pub mod divergence;
pub mod enumeration;
pub mod envs;
pub mod error;
pub mod estimation;
pub mod interactive;
pub mod mdp;
pub mod verify;
pub mod vim;

pub use error::{FilabError, Result};
