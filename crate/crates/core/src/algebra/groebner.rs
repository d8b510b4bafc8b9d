//! Buchberger's algorithm over the rationals.
//!
//! Pairs are pruned with the Gebauer-Moeller criteria (which subsume the
//! product and chain criteria) and selected by the normal strategy: smallest
//! total degree of the lcm, ties broken by pair index. Every new basis element
//! is monic and is used to tail-reduce the rest of the basis.

use std::cmp::Ordering;
use std::time::Instant;

use num_traits::{One, Zero};
use thiserror::Error;

use super::monomial::{Monomial, MonomialOrder};
use super::{BigRational, MultiPoly, UniPoly};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroebnerError {
    #[error("Groebner basis budget exceeded after {0} S-pair reductions")]
    BudgetExceeded(u64),
    #[error("Groebner basis deadline passed")]
    DeadlineExceeded,
    #[error("generators live in different polynomial rings")]
    ArityMismatch,
    #[error("keep variable {0} out of range")]
    VariableOutOfRange(usize),
    #[error("empty generator list")]
    NoGenerators,
}

#[derive(Debug, Clone, Copy)]
pub struct GroebnerConfig {
    /// Maximum number of S-pair reductions before giving up.
    pub max_reductions: u64,
    /// Wall-clock limit. Only for probing; never set it on a path whose
    /// output must be reproducible.
    pub deadline: Option<Instant>,
}

impl Default for GroebnerConfig {
    fn default() -> Self {
        GroebnerConfig { max_reductions: 1_000_000, deadline: None }
    }
}

/// Terms sorted in strictly decreasing order.
#[derive(Clone, Debug)]
struct Poly {
    terms: Vec<(Monomial, BigRational)>,
}

impl Poly {
    fn from_multi(p: &MultiPoly, order: MonomialOrder) -> Poly {
        Poly { terms: p.sorted_terms(order) }
    }

    fn to_multi(&self, nvars: usize) -> MultiPoly {
        MultiPoly::from_terms(nvars, self.terms.iter().cloned())
    }

    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn lm(&self) -> &Monomial {
        &self.terms[0].0
    }

    fn make_monic(&mut self) {
        if let Some((_, lc)) = self.terms.first() {
            if !lc.is_one() {
                let inv = lc.recip();
                for (_, c) in &mut self.terms {
                    *c *= &inv;
                }
            }
        }
    }
}

/// `a[start..] - coeff * shift * b[1..]`, merged in order. The leading term
/// of `b` is assumed to have been cancelled by the caller.
fn sub_scaled_tail(
    a: &[(Monomial, BigRational)],
    coeff: &BigRational,
    shift: &Monomial,
    b: &[(Monomial, BigRational)],
    order: MonomialOrder,
) -> Vec<(Monomial, BigRational)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let mut i = 0;
    let mut bi = b.iter().skip(1).map(|(m, c)| (shift.mul(m), c));
    let mut next_b = bi.next();
    while i < a.len() || next_b.is_some() {
        match (a.get(i), &next_b) {
            (Some((ma, ca)), Some((mb, cb))) => match order.cmp(ma, mb) {
                Ordering::Greater => {
                    out.push((ma.clone(), ca.clone()));
                    i += 1;
                }
                Ordering::Less => {
                    out.push((mb.clone(), -(coeff * *cb)));
                    next_b = bi.next();
                }
                Ordering::Equal => {
                    let c = ca - coeff * *cb;
                    if !c.is_zero() {
                        out.push((ma.clone(), c));
                    }
                    i += 1;
                    next_b = bi.next();
                }
            },
            (Some(_), None) => {
                out.extend(a[i..].iter().cloned());
                break;
            }
            (None, Some((mb, cb))) => {
                out.push((mb.clone(), -(coeff * *cb)));
                next_b = bi.next();
            }
            (None, None) => break,
        }
    }
    out
}

/// Full reduction of `f` by monic `basis` elements.
fn reduce(f: Poly, basis: &[&Poly], order: MonomialOrder) -> Poly {
    let mut rem = f.terms;
    let mut out: Vec<(Monomial, BigRational)> = Vec::new();
    let mut start = 0;
    while start < rem.len() {
        let (lm, lc) = &rem[start];
        match basis.iter().find(|g| g.lm().divides(lm)) {
            Some(g) => {
                let shift = g.lm().quotient_of(lm);
                let c = lc.clone();
                rem = sub_scaled_tail(&rem[start + 1..], &c, &shift, &g.terms, order);
                start = 0;
            }
            None => {
                out.push(rem[start].clone());
                start += 1;
            }
        }
    }
    Poly { terms: out }
}

fn spoly(f: &Poly, g: &Poly, order: MonomialOrder) -> Poly {
    let lcm = f.lm().lcm(g.lm());
    let sf = f.lm().quotient_of(&lcm);
    let sg = g.lm().quotient_of(&lcm);
    let lcf = &f.terms[0].1;
    let lcg = &g.terms[0].1;
    let left: Vec<_> = f.terms[1..]
        .iter()
        .map(|(m, c)| (sf.mul(m), c / lcf))
        .collect();
    // left - (1/lcg) * sg * g, leading terms cancel
    Poly { terms: sub_scaled_tail(&left, &lcg.recip(), &sg, &g.terms, order) }
}

#[derive(Debug, Clone)]
struct Pair {
    i: usize,
    j: usize,
    lcm: Monomial,
}

struct Buchberger {
    order: MonomialOrder,
    polys: Vec<Poly>,
    active: Vec<bool>,
    pairs: Vec<Pair>,
}

impl Buchberger {
    fn active_refs(&self) -> Vec<&Poly> {
        self.polys
            .iter()
            .zip(&self.active)
            .filter_map(|(p, &a)| a.then_some(p))
            .collect()
    }

    /// Gebauer-Moeller update for a new element at index `h`.
    fn update(&mut self, h: usize) {
        let lm_h = self.polys[h].lm().clone();
        let mut cand: Vec<(usize, Monomial, bool)> = (0..h)
            .filter(|&g| self.active[g])
            .map(|g| {
                let lg = self.polys[g].lm();
                (g, lm_h.lcm(lg), lm_h.coprime(lg))
            })
            .collect();

        // Chain criterion among new pairs.
        let mut kept: Vec<(usize, Monomial, bool)> = Vec::new();
        while let Some(c) = cand.pop() {
            let (_, ref lcm1, coprime) = c;
            let dominated = cand.iter().any(|(_, l2, _)| l2.divides(lcm1))
                || kept.iter().any(|(_, l2, _)| l2.divides(lcm1));
            if coprime || !dominated {
                kept.push(c);
            }
        }
        // Product criterion.
        let new_pairs: Vec<Pair> = kept
            .into_iter()
            .filter(|(_, _, coprime)| !coprime)
            .map(|(g, lcm, _)| Pair { i: g, j: h, lcm })
            .collect();

        // Prune old pairs made redundant by h.
        let polys = &self.polys;
        self.pairs.retain(|p| {
            !lm_h.divides(&p.lcm)
                || lm_h.lcm(polys[p.i].lm()) == p.lcm
                || lm_h.lcm(polys[p.j].lm()) == p.lcm
        });
        self.pairs.extend(new_pairs);

        for g in 0..h {
            if self.active[g] && lm_h.divides(self.polys[g].lm()) {
                self.active[g] = false;
            }
        }
        self.active[h] = true;
    }

    fn insert(&mut self, mut h: Poly) {
        h.make_monic();
        let idx = self.polys.len();
        self.polys.push(h);
        self.active.push(false);
        // Tail-reduce the surviving basis by the newcomer.
        let lm_h = self.polys[idx].lm().clone();
        for g in 0..idx {
            if !self.active[g] || lm_h.divides(self.polys[g].lm()) {
                continue;
            }
            if self.polys[g].terms[1..].iter().any(|(m, _)| lm_h.divides(m)) {
                let mut terms = std::mem::take(&mut self.polys[g].terms);
                let head = terms.remove(0);
                let tail = reduce(Poly { terms }, &[&self.polys[idx]], self.order);
                let mut t = Vec::with_capacity(tail.terms.len() + 1);
                t.push(head);
                t.extend(tail.terms);
                self.polys[g].terms = t;
            }
        }
        self.update(idx);
    }

    fn select(&mut self) -> Option<Pair> {
        let best = self
            .pairs
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                a.lcm
                    .degree()
                    .cmp(&b.lcm.degree())
                    .then(a.i.cmp(&b.i))
                    .then(a.j.cmp(&b.j))
            })
            .map(|(k, _)| k)?;
        Some(self.pairs.swap_remove(best))
    }
}

/// Reduced Groebner basis with the default budget.
pub fn groebner(generators: &[MultiPoly], order: MonomialOrder) -> Result<Vec<MultiPoly>, GroebnerError> {
    groebner_with(generators, order, &GroebnerConfig::default())
}

/// Reduced Groebner basis, sorted by increasing leading monomial. Every
/// element is monic and no term of any element is divisible by another
/// element's leading monomial.
pub fn groebner_with(
    generators: &[MultiPoly],
    order: MonomialOrder,
    config: &GroebnerConfig,
) -> Result<Vec<MultiPoly>, GroebnerError> {
    let nvars = generators.first().ok_or(GroebnerError::NoGenerators)?.nvars();
    if generators.iter().any(|g| g.nvars() != nvars) {
        return Err(GroebnerError::ArityMismatch);
    }
    let mut bb = Buchberger { order, polys: Vec::new(), active: Vec::new(), pairs: Vec::new() };

    let mut inputs: Vec<Poly> = generators
        .iter()
        .filter(|g| !g.is_zero())
        .map(|g| Poly::from_multi(g, order))
        .collect();
    inputs.sort_by(|a, b| order.cmp(a.lm(), b.lm()));
    for f in inputs {
        let h = reduce(f, &bb.active_refs(), order);
        if !h.is_zero() {
            bb.insert(h);
        }
    }

    let mut reductions = 0u64;
    while let Some(pair) = bb.select() {
        reductions += 1;
        if reductions > config.max_reductions {
            return Err(GroebnerError::BudgetExceeded(config.max_reductions));
        }
        if let Some(deadline) = config.deadline {
            if Instant::now() > deadline {
                return Err(GroebnerError::DeadlineExceeded);
            }
        }
        let s = spoly(&bb.polys[pair.i], &bb.polys[pair.j], order);
        let h = reduce(s, &bb.active_refs(), order);
        if !h.is_zero() {
            bb.insert(h);
        }
    }

    // Final interreduction of tails.
    let mut basis: Vec<Poly> = bb
        .polys
        .into_iter()
        .zip(bb.active)
        .filter_map(|(p, a)| a.then_some(p))
        .collect();
    basis.sort_by(|a, b| order.cmp(a.lm(), b.lm()));
    for k in 0..basis.len() {
        let mut terms = std::mem::take(&mut basis[k].terms);
        let head = terms.remove(0);
        let others: Vec<&Poly> =
            basis.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, p)| p).collect();
        let tail = reduce(Poly { terms }, &others, order);
        let mut t = vec![head];
        t.extend(tail.terms);
        basis[k].terms = t;
    }
    Ok(basis.iter().map(|p| p.to_multi(nvars)).collect())
}

/// Normal form of `f` with respect to `basis` (need not be monic or a
/// Groebner basis).
pub fn normal_form(f: &MultiPoly, basis: &[MultiPoly], order: MonomialOrder) -> MultiPoly {
    let mut monic: Vec<Poly> = basis
        .iter()
        .filter(|g| !g.is_zero())
        .map(|g| Poly::from_multi(g, order))
        .collect();
    monic.iter_mut().for_each(Poly::make_monic);
    let refs: Vec<&Poly> = monic.iter().collect();
    reduce(Poly::from_multi(f, order), &refs, order).to_multi(f.nvars())
}

/// S-polynomial of two nonzero polynomials.
pub fn s_polynomial(f: &MultiPoly, g: &MultiPoly, order: MonomialOrder) -> MultiPoly {
    spoly(&Poly::from_multi(f, order), &Poly::from_multi(g, order), order).to_multi(f.nvars())
}

/// Outcome of eliminating every variable but one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Eliminant {
    /// Monic generator of the elimination ideal.
    Poly(UniPoly),
    /// The system has no solutions (the ideal is the whole ring).
    Inconsistent,
    /// The elimination ideal is zero.
    NotZeroDimensional,
}

/// Monic generator of `<system> ∩ Q[x_keep]`.
///
/// The system is first brought to a graded reverse lex basis, which then
/// seeds Buchberger under the elimination order that puts `x_keep` alone in
/// the trailing block. Starting the elimination order from raw generators is
/// orders of magnitude slower on rank-condition systems.
pub fn eliminant(
    system: &[MultiPoly],
    keep_var: usize,
    config: &GroebnerConfig,
) -> Result<Eliminant, GroebnerError> {
    let first = system.first().ok_or(GroebnerError::NoGenerators)?;
    if keep_var >= first.nvars() {
        return Err(GroebnerError::VariableOutOfRange(keep_var));
    }
    let seed = groebner_with(system, MonomialOrder::GrevLex, config)?;
    eliminant_from_basis(&seed, keep_var, config)
}

/// As [`eliminant`], starting from any generating set of the ideal
/// (typically a graded basis computed once and shared across variables).
pub fn eliminant_from_basis(
    generators: &[MultiPoly],
    keep_var: usize,
    config: &GroebnerConfig,
) -> Result<Eliminant, GroebnerError> {
    let nvars = generators.first().ok_or(GroebnerError::NoGenerators)?.nvars();
    if keep_var >= nvars {
        return Err(GroebnerError::VariableOutOfRange(keep_var));
    }
    if generators.iter().any(|g| g.total_degree() == Some(0)) {
        return Ok(Eliminant::Inconsistent);
    }
    // Move keep_var to the last slot so that it sits alone in the trailing
    // block of the elimination order.
    let perm: Vec<usize> = (0..nvars)
        .map(|i| match i.cmp(&keep_var) {
            Ordering::Less => i,
            Ordering::Equal => nvars - 1,
            Ordering::Greater => i - 1,
        })
        .collect();
    let permuted: Vec<MultiPoly> = generators.iter().map(|p| p.permute_vars(&perm)).collect();
    let order = MonomialOrder::Elimination { split: nvars - 1 };
    let basis = groebner_with(&permuted, order, config)?;
    if basis.iter().any(|g| g.total_degree() == Some(0)) {
        return Ok(Eliminant::Inconsistent);
    }
    let univariate = basis.iter().find_map(|g| g.to_univariate(nvars - 1));
    Ok(match univariate {
        Some(u) => Eliminant::Poly(u.monic()),
        None => Eliminant::NotZeroDimensional,
    })
}
