use std::sync::OnceLock;

use num_integer::Integer;
use num_traits::{One, Zero};

use super::{SchubertError, SchubertProblem};
use crate::algebra::{ratio, BigRational};

/// Size of the master point set.
pub const MASTER_SIZE: usize = 111;

/// The rationals `p/q` in lowest terms with `q >= 1` and `p^2 + q^2 <= 121`,
/// ascending.
pub fn master_points() -> &'static [BigRational] {
    static POINTS: OnceLock<Vec<BigRational>> = OnceLock::new();
    POINTS.get_or_init(|| {
        let mut pts = Vec::new();
        for q in 1i64..=11 {
            for p in -11i64..=11 {
                if p * p + q * q <= 121 && p.gcd(&q) == 1 {
                    pts.push(ratio(p, q));
                }
            }
        }
        pts.sort();
        pts
    })
}

/// `(1, t, t^2, ..., t^(n-1))`.
pub fn moment_curve_point(t: &BigRational, n: usize) -> Vec<BigRational> {
    let mut row = Vec::with_capacity(n);
    let mut acc = BigRational::one();
    for _ in 0..n {
        row.push(acc.clone());
        acc *= t;
    }
    row
}

/// A flag secant to the moment curve along the given points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecantFlag {
    /// Sorted, distinct curve parameters.
    pub points: Vec<BigRational>,
    /// `(d, rows)`: the d-dimensional subspace spanned by the curve points at
    /// the first `d` parameters, ascending in `d`.
    pub subspaces: Vec<(usize, Vec<Vec<BigRational>>)>,
}

impl SecantFlag {
    pub fn subspace(&self, d: usize) -> Option<&[Vec<BigRational>]> {
        self.subspaces.iter().find(|(dim, _)| *dim == d).map(|(_, rows)| rows.as_slice())
    }
}

/// One secant flag per condition of `problem`, in condition order.
pub fn build_flags(
    problem: &SchubertProblem,
    blocks: &[Vec<BigRational>],
) -> Result<Vec<SecantFlag>, SchubertError> {
    if blocks.len() != problem.conditions.len() {
        return Err(SchubertError::BlockCountMismatch {
            expected: problem.conditions.len(),
            got: blocks.len(),
        });
    }
    let mut seen: Vec<&BigRational> = blocks.iter().flatten().collect();
    seen.sort();
    if seen.windows(2).any(|w| w[0] == w[1]) {
        return Err(SchubertError::DuplicatePoint);
    }
    let sizes = problem.points_per_condition();
    problem
        .conditions
        .iter()
        .zip(blocks)
        .zip(sizes)
        .map(|((cond, block), size)| {
            if block.len() != size {
                return Err(SchubertError::BlockSizeMismatch { expected: size, got: block.len() });
            }
            let mut points = block.clone();
            points.sort();
            let rows: Vec<Vec<BigRational>> =
                points.iter().map(|t| moment_curve_point(t, problem.n)).collect();
            let subspaces = problem
                .flag_dimensions(cond)
                .into_iter()
                .map(|d| (d, rows[..d].to_vec()))
                .collect();
            Ok(SecantFlag { points, subspaces })
        })
        .collect()
}

/// Exact rank by Gaussian elimination over the rationals.
pub fn rank(rows: &[Vec<BigRational>]) -> usize {
    let mut m: Vec<Vec<BigRational>> = rows.to_vec();
    let ncols = m.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..ncols {
        let Some(pivot) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, pivot);
        for i in r + 1..m.len() {
            if m[i][c].is_zero() {
                continue;
            }
            let f = &m[i][c] / &m[r][c];
            let (top, bottom) = m.split_at_mut(i);
            for (x, y) in bottom[0][c..].iter_mut().zip(&top[r][c..]) {
                *x -= &f * y;
            }
        }
        r += 1;
    }
    r
}

/// Sum over ordered pairs of blocks `(i, j)` of the number of points of block
/// `j` lying strictly inside the hull `[min, max]` of block `i`. Zero exactly
/// when the hulls are pairwise disjoint.
pub fn overlap_number<T: Ord>(blocks: &[Vec<T>]) -> Result<usize, SchubertError> {
    let mut hulls = Vec::with_capacity(blocks.len());
    for b in blocks {
        let lo = b.iter().min().ok_or(SchubertError::EmptyBlock)?;
        let hi = b.iter().max().ok_or(SchubertError::EmptyBlock)?;
        hulls.push((lo, hi));
    }
    let mut total = 0;
    for (i, (lo, hi)) in hulls.iter().enumerate() {
        for (j, other) in blocks.iter().enumerate() {
            if i != j {
                total += other.iter().filter(|t| *lo < *t && *t < *hi).count();
            }
        }
    }
    Ok(total)
}
