//! Reference oracles for the rankfuse test suites.
//!
//! Everything here is written the slow, obvious way over plain slices and
//! shares no code with the library it checks.

// index loops mirror the textbook formulas on purpose
#![allow(clippy::needless_range_loop)]

/// Least squares with an intercept, solved by forming the normal equations
/// explicitly and running Gaussian elimination with partial pivoting.
///
/// Returns `[intercept, w_1, .., w_n]`, or `None` when elimination meets a
/// zero pivot.
pub fn ols_normal_equations(rows: &[Vec<f64>], targets: &[f64]) -> Option<Vec<f64>> {
    assert_eq!(rows.len(), targets.len());
    let n = rows.first().map_or(0, Vec::len);
    let dim = n + 1;
    let design = |r: usize, c: usize| if c == 0 { 1.0 } else { rows[r][c - 1] };

    // augmented [X'X | X'y]
    let mut aug = vec![vec![0.0f64; dim + 1]; dim];
    for i in 0..dim {
        for j in 0..dim {
            let mut s = 0.0;
            for r in 0..rows.len() {
                s += design(r, i) * design(r, j);
            }
            aug[i][j] = s;
        }
        let mut s = 0.0;
        for r in 0..rows.len() {
            s += design(r, i) * targets[r];
        }
        aug[i][dim] = s;
    }

    for col in 0..dim {
        let pivot = (col..dim).max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs()))?;
        if aug[pivot][col] == 0.0 {
            return None;
        }
        aug.swap(col, pivot);
        for row in 0..dim {
            if row == col {
                continue;
            }
            let factor = aug[row][col] / aug[col][col];
            for k in col..=dim {
                aug[row][k] -= factor * aug[col][k];
            }
        }
    }
    Some((0..dim).map(|i| aug[i][dim] / aug[i][i]).collect())
}

/// Sum of squared residuals of `beta = [intercept, w_1, .., w_n]`.
pub fn sum_squared_residuals(rows: &[Vec<f64>], targets: &[f64], beta: &[f64]) -> f64 {
    rows.iter()
        .zip(targets)
        .map(|(row, y)| {
            let pred = beta[0] + row.iter().zip(&beta[1..]).map(|(s, w)| s * w).sum::<f64>();
            (y - pred).powi(2)
        })
        .sum()
}

/// Univariate least squares by the textbook closed form,
/// `slope = cov(x, y) / var(x)` and `intercept = mean(y) - slope * mean(x)`.
pub fn univariate_closed_form(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = cov / var;
    (my - slope * mx, slope)
}

/// Minimises the univariate squared error by repeatedly scanning a shrinking
/// grid around the current best point. Returns `(intercept, slope)`.
pub fn univariate_grid_search(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let loss = |b0: f64, b1: f64| -> f64 {
        xs.iter().zip(ys).map(|(x, y)| (y - b0 - b1 * x).powi(2)).sum()
    };
    let (mut b0, mut b1) = (0.0, 0.0);
    let mut step = 4.0;
    while step > 1e-12 {
        let mut best = (loss(b0, b1), b0, b1);
        for i in -20..=20 {
            for j in -20..=20 {
                let c0 = b0 + f64::from(i) * step / 10.0;
                let c1 = b1 + f64::from(j) * step / 10.0;
                let l = loss(c0, c1);
                if l < best.0 {
                    best = (l, c0, c1);
                }
            }
        }
        b0 = best.1;
        b1 = best.2;
        step /= 4.0;
    }
    (b0, b1)
}

/// Counts relevant flags in `flags[..end]` one element at a time.
fn relevant_in_prefix(flags: &[bool], end: usize) -> usize {
    let mut count = 0;
    for i in 0..end.min(flags.len()) {
        if flags[i] {
            count += 1;
        }
    }
    count
}

/// Average precision by walking the list and recomputing precision at every
/// relevant position from scratch. `None` when `total_relevant == 0`.
pub fn average_precision(flags: &[bool], total_relevant: usize) -> Option<f64> {
    if total_relevant == 0 {
        return None;
    }
    let mut sum = 0.0;
    for pos in 0..flags.len() {
        if flags[pos] {
            let rank = pos + 1;
            sum += relevant_in_prefix(flags, rank) as f64 / rank as f64;
        }
    }
    Some(sum / total_relevant as f64)
}

/// Precision over the top `total_relevant` positions.
pub fn r_precision(flags: &[bool], total_relevant: usize) -> Option<f64> {
    if total_relevant == 0 {
        return None;
    }
    Some(relevant_in_prefix(flags, total_relevant) as f64 / total_relevant as f64)
}

/// Precision at `cutoff`; short lists count as padded with non-relevant docs.
pub fn precision_at(flags: &[bool], cutoff: usize) -> f64 {
    relevant_in_prefix(flags, cutoff) as f64 / cutoff as f64
}
