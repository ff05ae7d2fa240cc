//! Maximum-weight partial assignment with a lexicographic tie-break.

/// Min-cost perfect assignment on a square matrix (shortest augmenting
/// paths with potentials). Returns the column of each row and the duals.
fn hungarian(cost: &[Vec<i128>]) -> (Vec<usize>, Vec<i128>, Vec<i128>) {
    let n = cost.len();
    let inf = i128::MAX / 4;
    let mut u = vec![0i128; n + 1];
    let mut v = vec![0i128; n + 1];
    // p[j]: row assigned to column j (1-based, 0 = none).
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
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
    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    (row_to_col, u[1..].to_vec(), v[1..].to_vec())
}

struct Solution {
    total: i128,
    /// Tight cells under the optimal duals, indexed like the input.
    tight: Vec<Vec<bool>>,
}

/// Maximum total of a partial matching over non-negative values
/// (zero cells are as good as unmatched).
fn solve(values: &[Vec<i128>], rows: &[usize], cols: &[usize]) -> Solution {
    let k = rows.len().max(cols.len());
    let mut cost = vec![vec![0i128; k]; k];
    for (a, &r) in rows.iter().enumerate() {
        for (b, &c) in cols.iter().enumerate() {
            cost[a][b] = -values[r][c].max(0);
        }
    }
    let (assign, u, v) = hungarian(&cost);
    let total = assign.iter().enumerate().map(|(a, &b)| -cost[a][b]).sum();
    let tight = (0..rows.len())
        .map(|a| (0..cols.len()).map(|b| u[a] + v[b] == cost[a][b]).collect())
        .collect();
    Solution { total, tight }
}

/// Among all maximum-total partial matchings on `values` (cells ≤ 0 are
/// forbidden), returns the one whose pair list sorted by row is
/// lexicographically smallest, as `(row, col)` pairs.
pub fn max_weight_matching(values: &[Vec<i128>], cols: usize) -> Vec<(usize, usize)> {
    let rows = values.len();
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    let all_rows: Vec<usize> = (0..rows).collect();
    let all_cols: Vec<usize> = (0..cols).collect();
    let global = solve(values, &all_rows, &all_cols);
    let optimum = global.total;

    let mut pairs = Vec::new();
    let mut fixed = 0i128;
    let mut free_cols = all_cols;
    for r in 0..rows {
        let rest: Vec<usize> = (r + 1..rows).collect();
        for (idx, &c) in free_cols.iter().enumerate() {
            if values[r][c] <= 0 || !global.tight[r][c] {
                continue;
            }
            let mut others = free_cols.clone();
            others.remove(idx);
            if fixed + values[r][c] + solve(values, &rest, &others).total == optimum {
                pairs.push((r, c));
                fixed += values[r][c];
                free_cols = others;
                break;
            }
        }
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(values: &[Vec<i128>], cols: usize) -> i128 {
        fn go(values: &[Vec<i128>], r: usize, used: &mut Vec<bool>) -> i128 {
            if r == values.len() {
                return 0;
            }
            let mut best = go(values, r + 1, used);
            for c in 0..used.len() {
                if !used[c] && values[r][c] > 0 {
                    used[c] = true;
                    best = best.max(values[r][c] + go(values, r + 1, used));
                    used[c] = false;
                }
            }
            best
        }
        go(values, 0, &mut vec![false; cols])
    }

    #[test]
    fn picks_the_lexicographically_smallest_optimum() {
        // Both diagonals total 2; the main diagonal starts with (0,0).
        let values = vec![vec![1, 1], vec![1, 1]];
        assert_eq!(max_weight_matching(&values, 2), vec![(0, 0), (1, 1)]);
        let values = vec![vec![0, 5], vec![5, 0]];
        assert_eq!(max_weight_matching(&values, 2), vec![(0, 1), (1, 0)]);
        let values = vec![vec![3, 3, 3]];
        assert_eq!(max_weight_matching(&values, 3), vec![(0, 0)]);
    }

    #[test]
    fn rectangular_totals_match_brute_force() {
        let mut seed = 17u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 33) as i128 % 7
        };
        for rows in 0..5 {
            for cols in 0..5 {
                let values: Vec<Vec<i128>> =
                    (0..rows).map(|_| (0..cols).map(|_| next() - 2).collect()).collect();
                let pairs = max_weight_matching(&values, cols);
                let total: i128 = pairs.iter().map(|&(r, c)| values[r][c]).sum();
                assert_eq!(total, brute(&values, cols), "{values:?}");
            }
        }
    }
}
