//! Local limits of the coprime colouring and the gcd labelling of `Z^d`.
//!
//! * [`lattice`]: points, windows, primes, `ζ`, regions, coprime-free boxes.
//! * [`limit_law`]: certified cylinder probabilities of the limit laws.
//! * [`sampler`]: seeded samplers for the limit laws and Haar points of `Ẑ^d`.
//! * [`harness`]: exact censuses over scaled regions and their comparison to the limits.
//! * [`percolation`]: cluster statistics of sampled colourings.
//! * [`graphon`]: the visibility graphon, graph sampling, homomorphism densities.
//! * [`affine`]: maximal subgroups `Γ`, Smith normal form, `Γ`-censuses.
//!
//! Every random quantity is a pure function of its inputs and a [`rng::Seed`];
//! results do not depend on the number of rayon threads.

pub mod affine;
pub mod certified;
pub mod error;
pub mod graphon;
pub mod harness;
pub mod image;
pub mod lattice;
pub mod limit_law;
pub mod percolation;
pub mod rng;
pub mod sampler;

pub use certified::CertifiedValue;
pub use error::{Error, Result};
pub use lattice::{GcdLabel, LatticePoint, Region, Window};
pub use rng::Seed;
