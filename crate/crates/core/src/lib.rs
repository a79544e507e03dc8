//! Exact arithmetic for the boundary measures of weight-two eigenforms of
//! prime level, and the invariants built on top of them: p-adic L-values and
//! derivatives, Tate periods, multiplicative tree periods, Heegner-type
//! points over real quadratic fields, and finite-level CM pairings.
//!
//! The crate is `no_std` (with `alloc`): everything here is pure
//! computation over big integers, p-power rationals and double floats.
//! IO, caching and the command-line driver live in the companion crate.

#![no_std]

extern crate alloc;

pub mod ball;
pub mod cmheegner;
mod linalg;
pub mod lfun;
pub mod measure;
pub mod modsym;
pub mod padic;
pub mod quadfield;
pub mod rat;
pub mod shpoint;

use alloc::string::String;
use core::fmt;

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Two p-adic operands with different primes.
    PrimeMismatch { left: u64, right: u64 },
    /// Division by (p-adic or exact) zero.
    DivisionByZero,
    /// Operation requires a unit (valuation zero) argument.
    NotAUnit,
    /// Tracked precision is insufficient to decide the question.
    PrecisionExhausted(&'static str),
    /// Discriminant is a square mod p; the inert code path does not apply.
    SplitPrime { d: i64, p: u64 },
    /// Curve data failed validation.
    BadCurve(String),
    /// Input must be a prime in the supported range.
    BadPrime(u64),
    /// Eigenspace for the requested curve is not one-dimensional per sign.
    EigenspaceDimension { sign: i32, dim: usize },
    /// Kernel is singular on a ball of the requested covering.
    KernelSingular,
    /// Requested point reduces to the identity of the Tate curve.
    IdentityPoint,
    /// Rational or algebraic recognition failed within the given bound.
    RecognitionFailed,
    /// Input lies in Q_p (no well-defined reduction vertex).
    RationalPoint,
    /// Generic invariant violation with context.
    Invariant(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::PrimeMismatch { left, right } => {
                write!(f, "prime mismatch: {left} vs {right}")
            }
            Error::DivisionByZero => write!(f, "division by zero"),
            Error::NotAUnit => write!(f, "argument must be a p-adic unit"),
            Error::PrecisionExhausted(what) => write!(f, "precision exhausted: {what}"),
            Error::SplitPrime { d, p } => {
                write!(f, "{d} is a square mod {p}; only the inert case is supported")
            }
            Error::BadCurve(msg) => write!(f, "invalid curve: {msg}"),
            Error::BadPrime(p) => write!(f, "invalid prime: {p}"),
            Error::EigenspaceDimension { sign, dim } => {
                write!(f, "eigenspace for sign {sign} has dimension {dim}, expected 1")
            }
            Error::KernelSingular => write!(f, "kernel singular on a covering ball"),
            Error::IdentityPoint => write!(f, "point is the identity on the Tate curve"),
            Error::RecognitionFailed => write!(f, "no algebraic candidate within height bound"),
            Error::RationalPoint => write!(f, "point lies in Q_p at working precision"),
            Error::Invariant(msg) => write!(f, "invariant violated: {msg}"),
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
