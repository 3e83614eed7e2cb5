//! Absorbed one-factor short-rate models on a finite interval.
//!
//! The short rate lives on (0, L) with an absorbing cap at L. It follows
//! the power-law family σ(x) = a x^{1−k}, μ(x) = a²(1/4 − k/2) x^{1−2k}.
//! The crate provides:
//!
//! * [`numerics`]: quadrature, root finding and finite differences;
//! * [`specfun`]: Kummer M and real-order Bessel functions;
//! * [`model`]: coefficients, scale/speed densities, boundary and spectrum classification;
//! * [`spectral`]: eigen-systems and transition densities for k = ±1/2;
//! * [`pricing`]: bond prices, yields and a generic pricer built on the density;
//! * [`montecarlo`]: an Euler-Maruyama oracle under both measures.

// Reference constants keep every printed digit; negated comparisons also reject NaN.
#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod model;
pub mod montecarlo;
pub mod numerics;
pub mod pricing;
pub mod specfun;
pub mod spectral;
