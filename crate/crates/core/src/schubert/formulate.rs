//! Polynomial systems for Schubert problems in the chart `X = [I_k | Y]`.

use std::collections::HashMap;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::{SchubertError, SchubertProblem, SecantFlag};
use crate::algebra::{
    count_real_roots, eliminant_from_basis, groebner_with, BigRational, Eliminant, GroebnerConfig, GroebnerError,
    MonomialOrder, MultiPoly,
};

/// Index of the indeterminate `Y[row][col]`.
pub fn y_var(problem: &SchubertProblem, row: usize, col: usize) -> usize {
    row * (problem.n - problem.k) + col
}

/// The `k x n` matrix `[I_k | Y]` with polynomial entries.
fn chart(problem: &SchubertProblem) -> Vec<Vec<MultiPoly>> {
    let (k, n) = (problem.k, problem.n);
    let nv = problem.nvars();
    (0..k)
        .map(|r| {
            (0..n)
                .map(|c| {
                    if c < k {
                        if c == r {
                            MultiPoly::one(nv)
                        } else {
                            MultiPoly::zero(nv)
                        }
                    } else {
                        MultiPoly::var(nv, y_var(problem, r, c - k))
                    }
                })
                .collect()
        })
        .collect()
}

/// Determinant of the submatrix on `rows x cols` by Laplace expansion along
/// rows, memoised on the set of unused columns.
fn minor(m: &[Vec<MultiPoly>], rows: &[usize], cols: &[usize], nvars: usize) -> MultiPoly {
    fn rec(
        m: &[Vec<MultiPoly>],
        rows: &[usize],
        cols: &[usize],
        mask: u64,
        nvars: usize,
        memo: &mut HashMap<u64, MultiPoly>,
    ) -> MultiPoly {
        let depth = rows.len() - mask.count_ones() as usize;
        if depth == rows.len() {
            return MultiPoly::one(nvars);
        }
        if let Some(v) = memo.get(&mask) {
            return v.clone();
        }
        let row = &m[rows[depth]];
        let mut acc = MultiPoly::zero(nvars);
        let mut position = 0;
        for (ci, &c) in cols.iter().enumerate() {
            if mask & (1 << ci) == 0 {
                continue;
            }
            let entry = &row[c];
            if !entry.is_zero() {
                let sub = rec(m, rows, cols, mask & !(1 << ci), nvars, memo);
                if !sub.is_zero() {
                    let term = entry.try_mul(&sub).expect("same ring");
                    acc = if position % 2 == 0 {
                        acc.try_add(&term)
                    } else {
                        acc.try_sub(&term)
                    }
                    .expect("same ring");
                }
            }
            position += 1;
        }
        memo.insert(mask, acc.clone());
        acc
    }
    let mask = (1u64 << cols.len()) - 1;
    rec(m, rows, cols, mask, nvars, &mut HashMap::new())
}

fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < r - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, r, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, r, &mut Vec::new(), &mut out);
    out
}

/// The combined rank-condition system for all conditions.
///
/// For each corner `j` of a condition `lambda` with flag `F`, the stacked
/// matrix `[X; F_d]` with `d = n - k + j - lambda_j` must have rank at most
/// `k + d - j`; all minors one size larger are added. Zero minors are
/// dropped and the rest are made monic and deduplicated.
pub fn formulate(problem: &SchubertProblem, flags: &[SecantFlag]) -> Result<Vec<MultiPoly>, SchubertError> {
    if flags.len() != problem.conditions.len() {
        return Err(SchubertError::BlockCountMismatch {
            expected: problem.conditions.len(),
            got: flags.len(),
        });
    }
    let (k, n) = (problem.k, problem.n);
    let nv = problem.nvars();
    let x = chart(problem);
    let mut system: Vec<MultiPoly> = Vec::new();
    for (cond, flag) in problem.conditions.iter().zip(flags) {
        for j in cond.corners() {
            let d = n - k + j - cond.part(j) as usize;
            let sub = flag.subspace(d).ok_or(SchubertError::MissingSubspace(d))?;
            let mut stacked = x.clone();
            for row in sub {
                stacked.push(row.iter().map(|c| MultiPoly::constant(nv, c.clone())).collect());
            }
            let size = k + d - j + 1;
            let col_sets = combinations(n, size);
            for rows in combinations(k + d, size) {
                for cols in &col_sets {
                    let det = minor(&stacked, &rows, cols, nv);
                    if det.is_zero() {
                        continue;
                    }
                    let lc = det.leading_term(MonomialOrder::GrevLex).unwrap().1.clone();
                    let det = det.scale(&lc.recip());
                    if !system.contains(&det) {
                        system.push(det);
                    }
                }
            }
        }
    }
    Ok(system)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DegenerateReason {
    /// No eliminant was square-free of the expected degree.
    ShapeCheck,
    /// Buchberger ran out of budget.
    Budget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Solved { real_count: u64, keep_var: usize },
    Degenerate(DegenerateReason),
}

impl Outcome {
    pub fn real_count(&self) -> Option<u64> {
        match self {
            Outcome::Solved { real_count, .. } => Some(*real_count),
            Outcome::Degenerate(_) => None,
        }
    }
}

/// Candidate elimination variables: the last indeterminate, then the rest in
/// index order.
pub fn keep_var_order(nvars: usize) -> Vec<usize> {
    let mut order = vec![nvars - 1];
    order.extend(0..nvars - 1);
    order
}

/// Counts real solutions of one instance. An eliminant is accepted only if
/// it is square-free with degree equal to the problem's degree.
pub fn solve_system(problem: &SchubertProblem, system: &[MultiPoly], config: &GroebnerConfig) -> Outcome {
    if system.is_empty() {
        return Outcome::Degenerate(DegenerateReason::ShapeCheck);
    }
    let graded = match groebner_with(system, MonomialOrder::GrevLex, config) {
        Ok(b) => b,
        Err(_) => return Outcome::Degenerate(DegenerateReason::Budget),
    };
    for v in keep_var_order(problem.nvars()) {
        match eliminant_from_basis(&graded, v, config) {
            Ok(Eliminant::Poly(f)) => {
                if f.degree() == Some(problem.degree as usize) && f.is_squarefree() == Some(true) {
                    let real = count_real_roots(&f).expect("nonzero eliminant") as u64;
                    return Outcome::Solved { real_count: real, keep_var: v };
                }
            }
            Ok(Eliminant::Inconsistent | Eliminant::NotZeroDimensional) => {}
            Err(GroebnerError::BudgetExceeded(_) | GroebnerError::DeadlineExceeded) => {
                return Outcome::Degenerate(DegenerateReason::Budget);
            }
            Err(e) => unreachable!("well-formed system: {e}"),
        }
    }
    Outcome::Degenerate(DegenerateReason::ShapeCheck)
}

/// Solves the instance with secant flags along `blocks` (one block of curve
/// parameters per condition, in condition order).
pub fn solve_instance(
    problem: &SchubertProblem,
    blocks: &[Vec<BigRational>],
    config: &GroebnerConfig,
) -> Result<Outcome, SchubertError> {
    let flags = super::build_flags(problem, blocks)?;
    let system = formulate(problem, &flags)?;
    Ok(solve_system(problem, &system, config))
}

/// Evaluates the chart at a point `Y`; used by tests and debug dumps.
pub fn chart_matrix(problem: &SchubertProblem, y: &[BigRational]) -> Vec<Vec<BigRational>> {
    let (k, n) = (problem.k, problem.n);
    (0..k)
        .map(|r| {
            (0..n)
                .map(|c| {
                    if c < k {
                        if c == r {
                            BigRational::one()
                        } else {
                            BigRational::zero()
                        }
                    } else {
                        y[y_var(problem, r, c - k)].clone()
                    }
                })
                .collect()
        })
        .collect()
}
