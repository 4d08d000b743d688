//! Lie algebras of first order operators, `ρ`-series of differential
//! operators with exp, log and BCH, the monoid action on cocycles and the
//! linear coboundary solver.

mod coboundary;
mod jet;
mod lie;
mod monoid;
mod ops;

pub use coboundary::{solve_linear_coboundary, CoboundarySolution};
pub use jet::{automorphy_jet, mobius_jet, Jet};
pub use lie::{LieElement, PointJet, PointOp, QuadraticLie};
pub use monoid::{LetterScaling, MonoidElement};
pub use ops::{DiffOp, MultiIndex, RhoSeriesOp, LIE_TOL, MAX_RHO};
