//! Special functions: complex `log Γ`, Gauss `2F1`, `K_ν`, the local integral
//! `J`, the contour integral `I`, and grid verifiers for the two inequalities
//! the bound on `J` rests on.

pub mod bessel;
pub mod gamma;
pub mod hyper;
pub mod jint;
pub mod technical;

pub use bessel::{bessel_k, BesselValue, Order};
pub use gamma::{gamma, log_gamma, log_gamma_real};
pub use hyper::{hyp2f1, hyp2f1_derivative, hyp2f1_euler, Estimate, Method};
pub use jint::{
    bump, i_contour, i_direct, i_majorant, i_majorant_at, j_bound_legit, MajorantKernel, j_bound_trivial, j_closed_form, j_factors,
    j_quadrature, BumpMellin, IParams, IValue, JFactors, JParams, JValue, Place,
};
pub use technical::{verify_technical_1, verify_technical_2, GridPoint, Grid1, Grid2, TechnicalReport};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpecialError {
    #[error("argument outside the domain: {0}")]
    Domain(&'static str),
    #[error("pole of the Gamma function")]
    Pole,
    #[error("no convergence: {0}")]
    NoConvergence(&'static str),
    #[error("truncation error above tolerance")]
    Truncation,
}
