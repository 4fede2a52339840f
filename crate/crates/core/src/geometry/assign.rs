//! Exact rectangular linear sum assignment.
//!
//! Shortest-augmenting-path Hungarian method with row/column potentials,
//! O(n²·m) for an n×m cost matrix with n ≤ m. Larger row counts are handled
//! by solving the transpose.

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `(row, col)` pairs, one per row of the smaller dimension, sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub total_cost: f64,
}

/// Minimum-cost assignment over a dense `rows × cols` matrix given as
/// `cost(row, col)`. Every index of the smaller side is matched exactly once.
pub fn linear_sum_assignment(
    rows: usize,
    cols: usize,
    cost: impl Fn(usize, usize) -> f64,
) -> Assignment {
    if rows == 0 || cols == 0 {
        return Assignment { pairs: Vec::new(), total_cost: 0.0 };
    }
    if rows > cols {
        let t = solve(cols, rows, |r, c| cost(c, r));
        let mut pairs: Vec<(usize, usize)> = t.iter().enumerate().map(|(c, &r)| (r, c)).collect();
        pairs.sort_unstable();
        let total_cost = pairs.iter().map(|&(r, c)| cost(r, c)).sum();
        return Assignment { pairs, total_cost };
    }
    let row_to_col = solve(rows, cols, &cost);
    let pairs: Vec<(usize, usize)> = row_to_col.into_iter().enumerate().collect();
    let total_cost = pairs.iter().map(|&(r, c)| cost(r, c)).sum();
    Assignment { pairs, total_cost }
}

/// Returns the column assigned to each row; requires `n <= m`.
fn solve(n: usize, m: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    debug_assert!(n <= m);
    // 1-based with a virtual column 0, after the classic formulation
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![0.0f64; m + 1];
    let mut used = vec![false; m + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|x| *x = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
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

    let mut row_to_col = vec![usize::MAX; n];
    for j in 1..=m {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}
