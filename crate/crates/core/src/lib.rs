//! Downlink NOMA resource allocation.
//!
//! Two users share each channel through superposition coding; the strong
//! user cancels the weak user's signal before decoding. Given an assignment
//! of users to channels, [`jra`] splits the power budget across channels and
//! within each pair in closed form. [`policy`] and [`trainer`] learn the
//! assignment itself with a policy-gradient network scored against that
//! allocator, and [`oracle`] checks the result by enumerating every
//! assignment.
//!
//! Everything downstream of a seed is deterministic: instance draws, network
//! init, rollouts, replay sampling, and the bytes of every CSV and model
//! file written by [`cli`].

pub mod cli;
pub mod config;
pub mod env;
pub mod jra;
pub mod oracle;
pub mod policy;
pub mod replay;
pub mod seeds;
pub mod trainer;
