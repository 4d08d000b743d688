//! Formal logarithmic deformations of modular forms.
//!
//! The crate computes with truncated `q`-expansions whose coefficients are
//! polynomials in `τ` ([`qpoly`]), builds cusp forms and their Eichler
//! integrals ([`modforms`]), iterated Eichler integrals and the canonical
//! cocycle of their generating series ([`mmv`]), the Lie algebras of first
//! order differential operators together with truncated `ρ`-series of
//! operators ([`defalg`]), and the second order deformation pipeline with its
//! residual checks ([`deform`]). The [`cli`] module drives all of it from a
//! TOML configuration.
//!
//! Analytic types are generic over a [`Real`] component type; the aliases
//! below fix it to `f64`, the default precision.

pub mod cli;
pub mod config;
pub mod defalg;
pub mod deform;
pub mod error;
pub mod groups;
pub mod linalg;
pub mod mmv;
pub mod modforms;
pub mod poly;
pub mod qpoly;
pub mod quadrature;
pub mod report;
pub mod scalar;

pub use error::{Error, Result};
pub use groups::{GroupContext, GroupElement};
pub use scalar::{Field, Real};

use num_complex::Complex;
use num_rational::BigRational;
use twofloat::TwoFloat;

pub type C64 = Complex<f64>;

pub type Expansion = qpoly::MixedExpansion<f64>;
pub type Expansion32 = qpoly::MixedExpansion<f32>;
pub type ExpansionDD = qpoly::MixedExpansion<TwoFloat>;

pub type CuspForm = modforms::CuspForm<f64>;
pub type CuspFormDD = modforms::CuspForm<TwoFloat>;

pub type LieElement = defalg::LieElement<f64>;
pub type QuadraticLie = defalg::QuadraticLie<C64>;
pub type QuadraticLieExact = defalg::QuadraticLie<BigRational>;

pub type RhoSeriesOp = defalg::RhoSeriesOp<f64>;
pub type DiffOp = defalg::DiffOp<f64>;

pub type PointSeries = mmv::IteratedSeries<C64>;
pub type FunctionSeries = mmv::IteratedSeries<Expansion>;


pub type DeformationPackage = deform::DeformationPackage<f64>;
