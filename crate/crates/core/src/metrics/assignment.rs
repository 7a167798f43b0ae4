//! Maximum-weight one-to-one assignment.
//!
//! Weights live in any totally ordered abelian group, so lexicographic
//! integer vectors can be optimized exactly. The solver is the
//! shortest-augmenting-path Hungarian method with row and column
//! potentials, O(n^2 m).

use std::cmp::Ordering;
use std::ops::{Add, Neg, Sub};

/// Ordered abelian group used as an assignment weight.
pub trait Weight: Copy + Ord + Add<Output = Self> + Sub<Output = Self> + Neg<Output = Self> {
    fn zero() -> Self;
}

impl Weight for i64 {
    fn zero() -> Self {
        0
    }
}

impl Weight for i128 {
    fn zero() -> Self {
        0
    }
}

/// Lexicographically compared triple: primary objective, secondary
/// objective, tie-break.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Lex3(pub i128, pub i128, pub i128);

impl Add for Lex3 {
    type Output = Lex3;
    fn add(self, o: Lex3) -> Lex3 {
        Lex3(self.0 + o.0, self.1 + o.1, self.2 + o.2)
    }
}

impl Sub for Lex3 {
    type Output = Lex3;
    fn sub(self, o: Lex3) -> Lex3 {
        Lex3(self.0 - o.0, self.1 - o.1, self.2 - o.2)
    }
}

impl Neg for Lex3 {
    type Output = Lex3;
    fn neg(self) -> Lex3 {
        Lex3(-self.0, -self.1, -self.2)
    }
}

impl Weight for Lex3 {
    fn zero() -> Self {
        Lex3(0, 0, 0)
    }
}

/// Maximum-weight matching between `rows` and `cols`.
///
/// `weight(r, c)` returns `None` for pairs that may not be matched. Only
/// pairs with strictly positive weight end up in the result, ordered by row.
pub fn max_weight_matching<W, F>(rows: usize, cols: usize, weight: F) -> Vec<(usize, usize)>
where
    W: Weight,
    F: Fn(usize, usize) -> Option<W>,
{
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    // Square cost matrix; forbidden and padding cells cost zero, which is the
    // same as leaving the row unmatched.
    let n = rows.max(cols);
    let mut cost = vec![vec![W::zero(); n]; n];
    let mut any = false;
    for (r, row) in cost.iter_mut().enumerate().take(rows) {
        for (c, cell) in row.iter_mut().enumerate().take(cols) {
            if let Some(w) = weight(r, c) {
                if w > W::zero() {
                    *cell = -w;
                    any = true;
                }
            }
        }
    }
    if !any {
        return Vec::new();
    }

    let assignment = hungarian_min(&cost);
    let mut out: Vec<(usize, usize)> = assignment
        .into_iter()
        .enumerate()
        .filter(|&(r, c)| r < rows && c < cols && cost[r][c] < W::zero())
        .collect();
    out.sort_unstable();
    out
}

/// Minimum-cost perfect assignment on a square matrix; returns the column
/// assigned to each row.
fn hungarian_min<W: Weight>(cost: &[Vec<W>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based internally; index 0 is the virtual column used while growing
    // an augmenting path.
    let mut u = vec![W::zero(); n + 1];
    let mut v = vec![W::zero(); n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv: Vec<Option<W>> = vec![None; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta: Option<W> = None;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if minv[j].is_none_or(|m| cur < m) {
                    minv[j] = Some(cur);
                    way[j] = j0;
                }
                let mj = minv[j].unwrap();
                if delta.is_none_or(|d| mj.cmp(&d) == Ordering::Less) {
                    delta = Some(mj);
                    j1 = j;
                }
            }
            let delta = delta.expect("an unused column remains");
            for j in 0..=n {
                if used[j] {
                    u[p[j]] = u[p[j]] + delta;
                    v[j] = v[j] - delta;
                } else if let Some(m) = minv[j] {
                    minv[j] = Some(m - delta);
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}
