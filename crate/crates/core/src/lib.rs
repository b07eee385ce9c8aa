//! Scattering states, Born series, spheroidal integrals and Fermi Golden Rule
//! estimates for thermal ionization of a particle bound by a smooth well.

pub mod born;
pub mod cli;
pub mod config;
pub mod error;
pub mod fgr;
pub mod fit;
pub mod jet;
pub mod oracle;
pub mod potential;
pub mod quadrature;
pub mod radial;
pub mod report;
pub mod scattering;
pub mod special;
pub mod spheroidal;
pub mod thermal;

pub use error::{Result, ThermionError};
