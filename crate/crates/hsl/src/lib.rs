//! Shifted convolution sums of multiplicative functions over lattices in
//! totally real fields of degree one or two, together with the large-sieve
//! machinery and the special functions that weight those sums.
//!
//! Exact field and ideal arithmetic lives in [`field`]; everything numeric
//! that is not tied to a lattice is generic over [`Real`] and re-exported
//! here at `f64`.

pub mod arith;
pub mod experiment;
pub mod field;
pub mod par;
pub mod regions;
pub mod scalar;
pub mod shifted;
pub mod sieve;
pub mod special;

pub use scalar::Real;

pub type Complex64 = num_complex::Complex<f64>;
pub type Region = regions::HyperbolicRegion<f64>;
pub type AxisBox = regions::AxisBox<f64>;
pub type Interval = regions::Interval<f64>;
pub type Shell = regions::Shell<f64>;
pub type JParams = special::JParams<f64>;
pub type IParams = special::IParams<f64>;
pub type Place = special::Place<f64>;
pub type Order = special::Order<f64>;
