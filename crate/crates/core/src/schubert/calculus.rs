//! Schubert calculus on G(k, n): products of Schubert classes by the
//! Littlewood-Richardson rule, intersection numbers, and problem enumeration.

use std::collections::BTreeMap;

use super::{Partition, SchubertError, SchubertProblem};

/// Number of Littlewood-Richardson tableaux of skew shape `outer / inner`
/// with content `content`: semistandard fillings whose reverse row reading
/// word is a lattice word.
pub fn lr_coefficient(outer: &Partition, inner: &Partition, content: &Partition) -> u64 {
    if !outer.contains(inner) || outer.size() != inner.size() + content.size() {
        return 0;
    }
    // Cells in reading order: rows top to bottom, right to left within a row.
    let mut cells = Vec::new();
    for r in 1..=outer.len() {
        for c in (inner.part(r)..outer.part(r)).rev() {
            cells.push((r, c as usize));
        }
    }
    let width = outer.part(1) as usize;
    let mut grid = vec![vec![0u32; width]; outer.len() + 1];
    let mut used = vec![0u32; content.len() + 2];
    let mut count = 0;
    lr_fill(&cells, 0, inner, content, &mut grid, &mut used, &mut count);
    count
}

fn lr_fill(
    cells: &[(usize, usize)],
    idx: usize,
    inner: &Partition,
    content: &Partition,
    grid: &mut [Vec<u32>],
    used: &mut [u32],
    count: &mut u64,
) {
    let Some(&(r, c)) = cells.get(idx) else {
        *count += 1;
        return;
    };
    // The right neighbour in the same row bounds the entry from above (rows
    // weakly increase left to right); the cell above bounds it from below.
    let upper = if idx > 0 && cells[idx - 1].0 == r { grid[r][c + 1] } else { u32::MAX };
    let lower = if r > 1 && (c as u32) >= inner.part(r - 1) { grid[r - 1][c] + 1 } else { 1 };
    let top = upper.min(content.len() as u32);
    for v in lower..=top {
        let vi = v as usize;
        if used[vi] >= content.part(vi) {
            continue;
        }
        if vi > 1 && used[vi] + 1 > used[vi - 1] {
            continue;
        }
        used[vi] += 1;
        grid[r][c] = v;
        lr_fill(cells, idx + 1, inner, content, grid, used, count);
        used[vi] -= 1;
    }
    grid[r][c] = 0;
}

/// Pieri's rule for a single row `(p)`: partitions obtained from `lambda` by
/// adding a horizontal strip of size `p` inside the rectangle.
pub fn pieri(lambda: &Partition, p: u32, rows: usize, cols: u32) -> Vec<Partition> {
    let mut out = Vec::new();
    let mut parts = vec![0u32; rows];
    fn rec(
        i: usize,
        left: u32,
        lambda: &Partition,
        cols: u32,
        parts: &mut Vec<u32>,
        out: &mut Vec<Partition>,
    ) {
        if i == parts.len() {
            if left == 0 {
                out.push(Partition::new(parts.clone()).expect("valid by construction"));
            }
            return;
        }
        let base = lambda.part(i + 1);
        // horizontal strip: new part i bounded by the old part above it
        let cap = if i == 0 { cols } else { lambda.part(i).min(cols) };
        for add in 0..=left {
            let v = base + add;
            if v > cap {
                break;
            }
            parts[i] = v;
            rec(i + 1, left - add, lambda, cols, parts, out);
        }
    }
    rec(0, p, lambda, cols, &mut parts, &mut out);
    out
}

/// Product of a class expansion with one Schubert class in H*(G(k, n)).
pub fn multiply(
    classes: &BTreeMap<Partition, u64>,
    factor: &Partition,
    k: usize,
    n: usize,
) -> BTreeMap<Partition, u64> {
    let cols = (n - k) as u32;
    let mut out: BTreeMap<Partition, u64> = BTreeMap::new();
    for (lambda, coeff) in classes {
        if factor.len() <= 1 {
            for nu in pieri(lambda, factor.size(), k, cols) {
                *out.entry(nu).or_default() += coeff;
            }
            continue;
        }
        let target = lambda.size() + factor.size();
        for nu in Partition::all_in_rectangle(k, cols) {
            if nu.size() != target || !nu.contains(lambda) {
                continue;
            }
            let c = lr_coefficient(&nu, lambda, factor);
            if c > 0 {
                *out.entry(nu).or_default() += coeff * c;
            }
        }
    }
    out
}

fn check_conditions(k: usize, n: usize, conditions: &[Partition]) -> Result<(), SchubertError> {
    if k == 0 || k >= n {
        return Err(SchubertError::InvalidGrassmannian { k, n });
    }
    for c in conditions {
        if !c.fits(k, (n - k) as u32) {
            return Err(SchubertError::PartitionOutsideRectangle(c.to_string()));
        }
    }
    let total: u32 = conditions.iter().map(Partition::size).sum();
    if total as usize != k * (n - k) {
        return Err(SchubertError::CodimensionMismatch { expected: k * (n - k), got: total as usize });
    }
    Ok(())
}

/// Number of complex solutions of a Schubert problem with general flags.
pub fn intersection_number(k: usize, n: usize, conditions: &[Partition]) -> Result<u64, SchubertError> {
    check_conditions(k, n, conditions)?;
    let mut classes = BTreeMap::from([(Partition::empty(), 1u64)]);
    for c in conditions {
        classes = multiply(&classes, c, k, n);
    }
    Ok(classes.get(&Partition::rectangle(k, (n - k) as u32)).copied().unwrap_or(0))
}

/// Every Schubert problem on G(k, n) whose degree is at least `degree_min`.
pub fn enumerate_problems(k: usize, n: usize, degree_min: u64) -> Result<Vec<SchubertProblem>, SchubertError> {
    if k < 1 || k >= n {
        return Err(SchubertError::InvalidGrassmannian { k, n });
    }
    let cols = (n - k) as u32;
    let weight = (k * (n - k)) as u32;
    let mut shapes: Vec<Partition> = Partition::all_in_rectangle(k, cols);
    shapes.retain(|p| !p.is_empty());

    let mut found = Vec::new();
    let mut chosen: Vec<Partition> = Vec::new();
    let start = BTreeMap::from([(Partition::empty(), 1u64)]);
    enumerate_rec(&shapes, 0, weight, k, n, &start, &mut chosen, &mut |conds, degree| {
        if degree >= degree_min {
            found.push((conds.to_vec(), degree));
        }
    });
    found
        .into_iter()
        .map(|(conds, degree)| SchubertProblem::with_degree(k, n, conds, degree))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn enumerate_rec(
    shapes: &[Partition],
    from: usize,
    left: u32,
    k: usize,
    n: usize,
    classes: &BTreeMap<Partition, u64>,
    chosen: &mut Vec<Partition>,
    emit: &mut dyn FnMut(&[Partition], u64),
) {
    if left == 0 {
        let rect = Partition::rectangle(k, (n - k) as u32);
        emit(chosen, classes.get(&rect).copied().unwrap_or(0));
        return;
    }
    for (i, s) in shapes.iter().enumerate().skip(from) {
        if s.size() > left {
            continue;
        }
        let next = multiply(classes, s, k, n);
        if next.is_empty() {
            continue;
        }
        chosen.push(s.clone());
        enumerate_rec(shapes, i, left - s.size(), k, n, &next, chosen, emit);
        chosen.pop();
    }
}

/// Standard Young tableaux of the `rows x cols` rectangle, by the hook
/// length formula. Equals the degree of `(1)^(rows*cols)`.
pub fn hook_length_rectangle(rows: usize, cols: usize) -> u128 {
    let n = rows * cols;
    let mut num: u128 = (1..=n as u128).product();
    for i in 0..rows {
        for j in 0..cols {
            num /= ((rows - i) + (cols - j) - 1) as u128;
        }
    }
    num
}
