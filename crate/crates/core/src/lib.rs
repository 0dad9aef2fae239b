//! Numerical laboratory for horocycle equidistribution on Schottky surfaces.
//!
//! The crate builds discrete free groups from circle pairings, approximates
//! their Patterson-Sullivan densities by weighted atoms on the boundary, and
//! measures how horocycle averages approach their predicted limits.
//!
//! The geometry kernel in [`moebius`] is generic over the scalar type; the
//! rest of the crate works in `f64` through the aliases below.

pub mod conformal;
pub mod flow;
pub mod fuchsian;
pub mod height;
pub mod lab;
pub mod moebius;
pub mod quad;
pub mod spectral;

use num_traits::{Float, FloatConst, FromPrimitive};

/// Scalar type accepted by the geometry kernel.
pub trait Real:
    Float + FloatConst + FromPrimitive + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
}

impl<T> Real for T where
    T: Float + FloatConst + FromPrimitive + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
}

pub type GroupElement = moebius::GroupElement<f64>;
pub type PlanePoint = moebius::PlanePoint<f64>;
pub type BoundaryPoint = moebius::BoundaryPoint<f64>;
pub type BoundaryArc = moebius::BoundaryArc<f64>;
pub type HopfCoordinates = moebius::HopfCoordinates<f64>;
pub type Iwasawa = moebius::Iwasawa<f64>;
pub type Bruhat = moebius::Bruhat<f64>;

pub use conformal::{AtomicBoundaryMeasure, HorocycleMeasure, Window};
pub use flow::{BumpFunction, QuadratureSpec};
pub use fuchsian::{FuchsianGroup, PairedDisks, Word};
pub use height::CuspData;
pub use spectral::SpectralParams;
