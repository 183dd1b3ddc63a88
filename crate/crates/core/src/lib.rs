//! Euler-Lagrange modelling and simulation of switched power converters.
//!
//! A circuit is described per switch mode by its magnetic co-energy, field
//! energy, Rayleigh dissipation and source terms over charge coordinates
//! ([`elcore`]). [`derive`] turns each mode into a first-order state-space or
//! descriptor model, [`circuits`] builds the bundled example circuits and
//! [`sim`] simulates the resulting switched systems.

pub mod circuits;
pub mod config;
pub mod derive;
pub mod elcore;
pub mod linalg;
pub mod reference;
pub mod sim;
pub mod validate;
