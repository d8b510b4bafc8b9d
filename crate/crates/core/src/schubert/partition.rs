use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SchubertError;

/// Weakly decreasing list of positive parts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Partition(Vec<u32>);

impl Partition {
    pub fn new(mut parts: Vec<u32>) -> Result<Self, SchubertError> {
        while parts.last() == Some(&0) {
            parts.pop();
        }
        if parts.windows(2).any(|w| w[0] < w[1]) || parts.contains(&0) {
            return Err(SchubertError::InvalidPartition(format!("{parts:?}")));
        }
        Ok(Partition(parts))
    }

    pub fn empty() -> Self {
        Partition(Vec::new())
    }

    /// The `rows x cols` rectangle.
    pub fn rectangle(rows: usize, cols: u32) -> Self {
        Partition(vec![cols; rows])
    }

    pub fn parts(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn size(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Part `j` counted from 1; zero past the end.
    pub fn part(&self, j: usize) -> u32 {
        if j == 0 {
            return u32::MAX;
        }
        self.0.get(j - 1).copied().unwrap_or(0)
    }

    pub fn fits(&self, rows: usize, cols: u32) -> bool {
        self.0.len() <= rows && self.0.first().is_none_or(|&p| p <= cols)
    }

    pub fn contains(&self, other: &Partition) -> bool {
        other.0.len() <= self.0.len() && other.0.iter().zip(&self.0).all(|(a, b)| a <= b)
    }

    /// Indices `j` (1-based) with `part(j) > part(j + 1)`.
    pub fn corners(&self) -> Vec<usize> {
        (1..=self.0.len()).filter(|&j| self.part(j) > self.part(j + 1)).collect()
    }

    /// All partitions inside the `rows x cols` rectangle, grouped by size.
    pub fn all_in_rectangle(rows: usize, cols: u32) -> Vec<Partition> {
        fn rec(prefix: &mut Vec<u32>, max: u32, rows: usize, out: &mut Vec<Partition>) {
            out.push(Partition(prefix.clone()));
            if rows == 0 {
                return;
            }
            for p in 1..=max {
                prefix.push(p);
                rec(prefix, p, rows - 1, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        rec(&mut Vec::new(), cols, rows, &mut out);
        out.sort_by(|a, b| a.size().cmp(&b.size()).then_with(|| b.0.cmp(&a.0)));
        out
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.0.iter().map(u32::to_string).collect();
        write!(f, "{}", s.join(","))
    }
}

impl FromStr for Partition {
    type Err = SchubertError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts = s
            .split(',')
            .map(|p| p.trim().parse::<u32>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| SchubertError::InvalidPartition(s.to_string()))?;
        Partition::new(parts)
    }
}
