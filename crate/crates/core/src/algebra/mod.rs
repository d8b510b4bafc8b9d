//! Exact symbolic kernel over the rationals.

mod groebner;
mod monomial;
mod multipoly;
mod sturm;
mod unipoly;

pub use groebner::{
    eliminant, eliminant_from_basis, groebner, groebner_with, normal_form, s_polynomial, Eliminant, GroebnerConfig,
    GroebnerError,
};
pub use monomial::{Monomial, MonomialOrder};
pub use multipoly::{MultiPoly, PolyError};
pub use num_rational::BigRational;
pub use sturm::{count_real_roots, sturm_count, sturm_sequence, Bound, RootCountError};
pub use unipoly::UniPoly;

use num_bigint::BigInt;

/// `n` as a rational.
pub fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// `p/q` as a rational in lowest terms. Panics if `q == 0`.
pub fn ratio(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

/// Parses `p/q` or `p`.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().ok()?;
            let q: BigInt = q.trim().parse().ok()?;
            if q == BigInt::from(0) {
                return None;
            }
            Some(BigRational::new(p, q))
        }
        None => Some(BigRational::from_integer(s.parse().ok()?)),
    }
}

/// Always `num/den`, including integers (`3/1`).
pub fn format_rational(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}
