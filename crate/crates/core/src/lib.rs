//! Multilocus Moran model with assortative mating, recombination and mutation.
//!
//! The crate covers the exact finite-population chain, its diffusion limit,
//! and the stationary density of that limit together with its critical points.

pub mod assortment;
pub mod asymptotics;
pub mod combinatorics;
pub mod critical;
pub mod diffusion;
pub mod error;
pub mod linkage;
pub mod moran;
pub mod oracle;
pub mod recombination;
pub mod rng;
pub mod sde;
pub mod stationary;
pub mod trajectory;
pub mod verify;

pub use assortment::{AssortmentScheme, MeanAssortTable, PolyForm};
pub use combinatorics::{Mask, SubsetFn, MAX_LOCI};
pub use error::{Error, Result};
