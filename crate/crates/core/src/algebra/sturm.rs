//! Real root counting with Sturm sequences.
//!
//! Each sequence element is kept as its primitive integer part. Scaling by a
//! positive constant does not move sign variations, and integer evaluation
//! avoids rational blow-up at interval endpoints.

use num_bigint::BigInt;
use num_traits::Signed;
use thiserror::Error;

use super::{BigRational, UniPoly};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RootCountError {
    #[error("the zero polynomial has infinitely many roots")]
    ZeroPolynomial,
    #[error("interval endpoints must satisfy a < b")]
    EmptyInterval,
}

/// Interval endpoint on the extended real line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Bound {
    NegInfinity,
    Finite(BigRational),
    PosInfinity,
}

impl Bound {
    fn rank(&self) -> u8 {
        match self {
            Bound::NegInfinity => 0,
            Bound::Finite(_) => 1,
            Bound::PosInfinity => 2,
        }
    }

    fn less_than(&self, other: &Bound) -> bool {
        match (self, other) {
            (Bound::Finite(a), Bound::Finite(b)) => a < b,
            _ => self.rank() < other.rank(),
        }
    }
}

fn int_poly(ints: &[BigInt]) -> UniPoly {
    UniPoly::new(ints.iter().map(|c| BigRational::from_integer(c.clone())).collect())
}

/// `f, f', -rem(f, f'), ...` down to a nonzero constant, each element as a
/// primitive integer coefficient list.
pub fn sturm_sequence(f: &UniPoly) -> Vec<Vec<BigInt>> {
    let mut seq = Vec::new();
    if f.is_zero() {
        return seq;
    }
    let mut prev = f.primitive_integer_part();
    seq.push(prev.clone());
    let d = f.derivative();
    if d.is_zero() {
        return seq;
    }
    let mut cur = d.primitive_integer_part();
    loop {
        seq.push(cur.clone());
        let r = int_poly(&prev).rem(&int_poly(&cur));
        if r.is_zero() {
            break;
        }
        prev = cur;
        cur = r.neg().primitive_integer_part();
    }
    seq
}

fn sign_at_bound(p: &[BigInt], t: &Bound) -> i32 {
    let lead = p.last().map_or(0, |c| if c.is_positive() { 1 } else { -1 });
    match t {
        Bound::PosInfinity => lead,
        Bound::NegInfinity => {
            if (p.len() - 1).is_multiple_of(2) {
                lead
            } else {
                -lead
            }
        }
        Bound::Finite(x) => UniPoly::sign_at(p, x),
    }
}

fn variations(seq: &[Vec<BigInt>], t: &Bound) -> usize {
    let mut last = 0;
    let mut count = 0;
    for p in seq {
        let s = sign_at_bound(p, t);
        if s == 0 {
            continue;
        }
        if last != 0 && s != last {
            count += 1;
        }
        last = s;
    }
    count
}

/// Number of distinct real roots of `f` in the half-open interval `(a, b]`.
///
/// Non-square-free input is replaced by its square-free part.
pub fn sturm_count(f: &UniPoly, a: &Bound, b: &Bound) -> Result<usize, RootCountError> {
    if f.is_zero() {
        return Err(RootCountError::ZeroPolynomial);
    }
    if !a.less_than(b) {
        return Err(RootCountError::EmptyInterval);
    }
    let g = if f.is_squarefree() == Some(true) { f.clone() } else { f.squarefree_part() };
    let seq = sturm_sequence(&g);
    Ok(variations(&seq, a).saturating_sub(variations(&seq, b)))
}

/// Number of distinct real roots of `f`.
pub fn count_real_roots(f: &UniPoly) -> Result<usize, RootCountError> {
    if f.is_zero() {
        return Err(RootCountError::ZeroPolynomial);
    }
    let g = f.squarefree_part();
    let seq = sturm_sequence(&g);
    Ok(variations(&seq, &Bound::NegInfinity) - variations(&seq, &Bound::PosInfinity))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{rat, ratio};
    use proptest::prelude::*;

    const ALL: (Bound, Bound) = (Bound::NegInfinity, Bound::PosInfinity);

    #[test]
    fn textbook_counts() {
        let f = UniPoly::from_integers(&[1, 0, 1]);
        assert_eq!(sturm_count(&f, &ALL.0, &ALL.1), Ok(0));
        let f = UniPoly::from_integers(&[-2, 0, 1]);
        assert_eq!(sturm_count(&f, &ALL.0, &ALL.1), Ok(2));
        let f = UniPoly::from_roots(&[rat(1), rat(2), rat(3)]);
        assert_eq!(sturm_count(&f, &Bound::Finite(ratio(3, 2)), &ALL.1), Ok(2));
        assert_eq!(count_real_roots(&UniPoly::from_integers(&[1, 0, 0, 0, 1])), Ok(0));
    }

    #[test]
    fn half_open_interval() {
        let f = UniPoly::from_roots(&[rat(1), rat(2)]);
        assert_eq!(sturm_count(&f, &Bound::Finite(rat(1)), &Bound::Finite(rat(2))), Ok(1));
        assert_eq!(sturm_count(&f, &Bound::Finite(rat(0)), &Bound::Finite(rat(1))), Ok(1));
    }

    #[test]
    fn repeated_roots_counted_once() {
        let f = UniPoly::from_roots(&[rat(1), rat(1), rat(-4), rat(-4), rat(-4)]);
        assert_eq!(count_real_roots(&f), Ok(2));
        assert_eq!(sturm_count(&f, &ALL.0, &Bound::Finite(rat(0))), Ok(1));
    }

    #[test]
    fn errors() {
        assert_eq!(count_real_roots(&UniPoly::zero()), Err(RootCountError::ZeroPolynomial));
        let f = UniPoly::from_integers(&[1, 1]);
        assert_eq!(
            sturm_count(&f, &Bound::Finite(rat(1)), &Bound::Finite(rat(1))),
            Err(RootCountError::EmptyInterval)
        );
        assert_eq!(sturm_count(&f, &ALL.1, &ALL.0), Err(RootCountError::EmptyInterval));
    }

    #[test]
    fn constants_have_no_roots() {
        assert_eq!(count_real_roots(&UniPoly::from_integers(&[-5])), Ok(0));
    }

    proptest! {
        #[test]
        fn product_of_distinct_linear_factors(roots in proptest::collection::btree_set((-50i64..50, 1i64..8), 1..7)) {
            let rs: std::collections::BTreeSet<BigRational> = roots.iter().map(|&(p, q)| ratio(p, q)).collect();
            let rs: Vec<_> = rs.into_iter().collect();
            let f = UniPoly::from_roots(&rs);
            prop_assert_eq!(count_real_roots(&f).unwrap(), rs.len());
        }

        #[test]
        fn interval_additivity(c in proptest::collection::vec(-20i64..20, 2..7), a in -30i64..0, b in 0i64..10, c2 in 10i64..40) {
            let f = UniPoly::from_integers(&c);
            prop_assume!(!f.is_zero() && f.degree() > Some(0));
            let (a, b, c2) = (ratio(a, 3), ratio(b, 3), ratio(c2, 3));
            prop_assume!(f.eval(&b) != rat(0));
            let left = sturm_count(&f, &Bound::Finite(a.clone()), &Bound::Finite(b.clone())).unwrap();
            let right = sturm_count(&f, &Bound::Finite(b), &Bound::Finite(c2.clone())).unwrap();
            let whole = sturm_count(&f, &Bound::Finite(a), &Bound::Finite(c2)).unwrap();
            prop_assert_eq!(left + right, whole);
        }

        #[test]
        fn parity_and_degree_bound(c in proptest::collection::vec(-100i64..=100, 2..8)) {
            let f = UniPoly::from_integers(&c);
            prop_assume!(f.degree() > Some(0) && f.is_squarefree() == Some(true));
            let n = count_real_roots(&f).unwrap();
            let d = f.degree().unwrap();
            prop_assert!(n <= d);
            prop_assert_eq!(n % 2, d % 2);
        }
    }
}
