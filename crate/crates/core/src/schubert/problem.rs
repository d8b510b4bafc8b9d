use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::calculus::intersection_number;
use super::{Partition, SchubertError};

/// A Schubert problem on G(k, n) with its number of complex solutions.
///
/// Conditions are kept in canonical (descending) order, so equal multisets
/// produce equal values and identical text forms.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SchubertProblem {
    pub k: usize,
    pub n: usize,
    pub conditions: Vec<Partition>,
    pub degree: u64,
}

impl SchubertProblem {
    /// Validates the conditions and computes the degree.
    pub fn new(k: usize, n: usize, conditions: Vec<Partition>) -> Result<Self, SchubertError> {
        let degree = intersection_number(k, n, &conditions)?;
        Self::with_degree(k, n, conditions, degree)
    }

    pub(crate) fn with_degree(
        k: usize,
        n: usize,
        mut conditions: Vec<Partition>,
        degree: u64,
    ) -> Result<Self, SchubertError> {
        conditions.sort_by(|a, b| b.cmp(a));
        Ok(SchubertProblem { k, n, conditions, degree })
    }

    /// Number of local-coordinate indeterminates, `k (n - k)`.
    pub fn nvars(&self) -> usize {
        self.k * (self.n - self.k)
    }

    /// Flag dimensions a condition needs: `n - k + j - lambda_j` for each
    /// corner `j`, ascending.
    pub fn flag_dimensions(&self, lambda: &Partition) -> Vec<usize> {
        lambda
            .corners()
            .into_iter()
            .map(|j| self.n - self.k + j - lambda.part(j) as usize)
            .collect()
    }

    /// Points on the curve each condition's secant flag needs: its largest
    /// flag dimension.
    pub fn points_per_condition(&self) -> Vec<usize> {
        self.conditions
            .iter()
            .map(|c| self.flag_dimensions(c).into_iter().max().unwrap_or(0))
            .collect()
    }

    pub fn total_points(&self) -> usize {
        self.points_per_condition().iter().sum()
    }
}

impl fmt::Display for SchubertProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let conds: Vec<String> = self.conditions.iter().map(Partition::to_string).collect();
        write!(f, "{} {} | {}", self.k, self.n, conds.join(";"))
    }
}

impl FromStr for SchubertProblem {
    type Err = SchubertError;

    /// Parses `k n | l1 ; l2 ; ...`, e.g. `2 4 | 1;1;1;1`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SchubertError::InvalidProblem(s.to_string());
        let (head, tail) = s.split_once('|').ok_or_else(bad)?;
        let dims: Vec<usize> = head
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        let [k, n] = dims[..] else {
            return Err(bad());
        };
        let conditions = tail
            .split(';')
            .filter(|c| !c.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Partition>, _>>()?;
        if conditions.is_empty() {
            return Err(bad());
        }
        SchubertProblem::new(k, n, conditions)
    }
}
