//! Desk-scale laboratory for rearrangement of vector series: exact domains
//! of sums for structured series in R^d, constructive rearrangement to any
//! target in the domain, volume-number and nuclearity diagnostics for
//! linear maps and Koethe scales, and a checkable nonconvexity
//! counterexample pattern.
//!
//! All numeric code is generic over the scalar type via [`scalar::Real`]
//! (`f32` or `f64`); the `*64` aliases at the crate root pin `f64`.

pub mod counterexample;
pub mod domain;
pub mod error;
pub mod hilbert;
pub mod koethe;
mod linalg;
pub mod nuclearity;
pub mod rearrange;
mod simplex;
pub mod scalar;
pub mod series;

pub use error::{Error, Result};
pub use scalar::Real;

pub type WeightedHilbert64 = hilbert::WeightedHilbert<f64>;
pub type LinearMap64 = hilbert::LinearMap<f64>;
pub type SNumberReport64 = hilbert::SNumberReport<f64>;
pub type KoetheMatrix64 = koethe::KoetheMatrix<f64>;
pub type DiscScale64 = koethe::DiscScale<f64>;
pub type SeriesSpec64 = series::SeriesSpec<f64>;
pub type GammaReport64 = domain::GammaReport<f64>;
pub type AffineSubspace64 = domain::AffineSubspace<f64>;
pub type VEpsReport64 = nuclearity::VEpsReport<f64>;
pub type PermutationStream64 = rearrange::PermutationStream<f64>;
pub type DiagonalSeminorm64 = counterexample::DiagonalSeminorm<f64>;
pub type FinGenGroup64 = counterexample::FinGenGroup<f64>;
pub type LadderInstance64 = counterexample::LadderInstance<f64>;
pub type BadSeriesCertificate64 = counterexample::BadSeriesCertificate<f64>;
