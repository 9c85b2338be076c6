//! Progress-guided skill chaining for long-horizon pick-and-pack.
//!
//! The crate is organized bottom-up: [`sim`] is a deterministic planar tote
//! world, [`skills`] holds scripted skill controllers behind a registry,
//! [`annotation`] turns demonstrations into progress labels, [`estimator`]
//! estimates progress online, [`selector`] picks the next skill from a
//! progress vector, and [`runner`] closes the loop.

pub mod annotation;
pub mod dataset;
pub mod estimator;
pub mod pipeline;
pub mod runner;
pub mod scenario;
pub mod selector;
pub mod sim;
pub mod skills;
