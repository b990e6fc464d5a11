//! Exact arithmetic in number fields `K = Q[x]/(f)`, archimedean embeddings
//! with certified root disks, and non-archimedean places above primes where
//! `Z[x]/(f)` is maximal.

mod embeddings;
pub mod factor;
mod field;
pub mod modp;
mod places;
pub mod poly;
pub mod rational;

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use thiserror::Error;

pub use embeddings::{Embedding, EmbeddingKind, MAX_PRECISION_BITS};
pub use field::{FieldElement, NumberField, MAX_DEGREE};
pub use places::{
    newton_polygon_valuations, AbsValue, NonArchPlace, Place, PrimeCheck, ProductFormulaReport,
    MAX_PADIC_DIGITS,
};
pub use rational::{format_rational, parse_rational, RationalParseError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("defining polynomial must be monic")]
    NotMonic,
    #[error("defining polynomial must have positive degree")]
    ConstantPolynomial,
    #[error("degree {0} exceeds the supported maximum of {MAX_DEGREE}")]
    DegreeTooLarge(usize),
    #[error("reducible: {0}")]
    Reducible(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("elements belong to different fields")]
    FieldMismatch,
    #[error("expected at most {expected} coefficients, got {found}")]
    CoefficientCount { expected: usize, found: usize },
    #[error("valuation of zero is +infinity")]
    ZeroElement,
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("prime {0} exceeds the supported range for place computations")]
    PrimeTooLarge(String),
    #[error("Dedekind criterion fails at p = {0}; place data unavailable")]
    DedekindCriterionFails(u64),
    #[error("p-adic precision cap reached at p = {0}")]
    PadicPrecisionCap(u64),
    #[error("precision must be at least 53 bits, got {0}")]
    PrecisionTooLow(u32),
    #[error("could not separate roots within {0} bits")]
    RootSeparation(u32),
    #[error("integer factorization incomplete for {0}")]
    FactorizationIncomplete(String),
}

/// Prime factorization of a positive integer.
pub fn factor_integer(n: &BigUint) -> Result<BTreeMap<BigUint, usize>, FieldError> {
    if n.is_zero() {
        return Err(FieldError::ZeroElement);
    }
    if n.is_one() {
        return Ok(BTreeMap::new());
    }
    let (found, rest) = num_prime::nt_funcs::factors(n.clone(), None);
    match rest {
        None => Ok(found),
        Some(_) => Err(FieldError::FactorizationIncomplete(n.to_string())),
    }
}

/// Primes as machine integers, failing for primes outside `u64`.
pub fn small_prime(p: &BigUint) -> Result<u64, FieldError> {
    u64::try_from(p).map_err(|_| FieldError::PrimeTooLarge(p.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_factorization() {
        let n = BigUint::from(2u32 * 2 * 3 * 97);
        let f = factor_integer(&n).unwrap();
        let v: Vec<(u64, usize)> = f.iter().map(|(p, e)| (small_prime(p).unwrap(), *e)).collect();
        assert_eq!(v, vec![(2, 2), (3, 1), (97, 1)]);
        assert!(factor_integer(&BigUint::one()).unwrap().is_empty());
    }
}
