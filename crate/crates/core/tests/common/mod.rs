//! Brute-force oracles shared by the integration suites. Everything here is
//! independent of the solver code paths: objectives are evaluated by direct
//! enumeration over constraint-respecting grids.

use svddkit::dataio::DataMatrix;
use svddkit::kernel::{gram_matrix, KernelSpec};

/// Dense symmetric kernel matrix as plain nested vectors.
pub fn dense_gram(spec: &KernelSpec, data: &DataMatrix) -> Vec<Vec<f64>> {
    let g = gram_matrix(spec, data).unwrap();
    (0..g.n()).map(|i| g.row(i).to_vec()).collect()
}

/// Half-width, in grid units, of the search window kept around the incumbent
/// during each refinement round. Wide enough that the optimum cannot escape
/// between rounds even when coordinates ride the box bound (which the grid
/// only approaches as the step shrinks).
const REFINE_WINDOW: usize = 12;

/// Maximizes `sum_i a_i K_ii - a' K a` over the simplex slice
/// `sum a = 1, 0 <= a_i <= c` by exhaustive grid search at `resolution`,
/// then optionally re-grids around the best point at 5x finer steps per
/// round. Returns the best objective found.
pub fn svdd_grid_oracle(
    gram: &[Vec<f64>],
    c: f64,
    resolution: f64,
    refine_rounds: usize,
) -> f64 {
    let n = gram.len();
    let mut h = resolution;
    let mut total = (1.0 / h).round() as usize;
    let cap = |h: f64| (c / h + 1e-9).floor() as usize;
    let mut lo = vec![0usize; n];
    let mut hi = vec![cap(h).min(total); n];

    let (mut best_value, mut best_units) = simplex_search(gram, h, total, &lo, &hi);
    for _ in 0..refine_rounds {
        h /= 5.0;
        total *= 5;
        let cmax = cap(h).min(total);
        for i in 0..n {
            let center = best_units[i] * 5;
            lo[i] = center.saturating_sub(REFINE_WINDOW);
            hi[i] = (center + REFINE_WINDOW).min(cmax);
        }
        let (value, units) = simplex_search(gram, h, total, &lo, &hi);
        if value > best_value {
            best_value = value;
            best_units = units;
        }
    }
    best_value
}

/// Exhaustive search over `sum k = total` with per-coordinate bounds; the
/// objective is accumulated incrementally along the recursion. Returns the
/// best objective and its unit vector.
fn simplex_search(
    gram: &[Vec<f64>],
    h: f64,
    total: usize,
    lo: &[usize],
    hi: &[usize],
) -> (f64, Vec<usize>) {
    let n = gram.len();
    // suffix capacity for pruning: max units placeable from depth d onward
    let mut suffix_hi = vec![0usize; n + 1];
    let mut suffix_lo = vec![0usize; n + 1];
    for d in (0..n).rev() {
        suffix_hi[d] = suffix_hi[d + 1] + hi[d];
        suffix_lo[d] = suffix_lo[d + 1] + lo[d];
    }

    struct Ctx<'a> {
        gram: &'a [Vec<f64>],
        h: f64,
        lo: &'a [usize],
        hi: &'a [usize],
        suffix_hi: &'a [usize],
        suffix_lo: &'a [usize],
        units: Vec<usize>,
        best_value: f64,
        best_units: Vec<usize>,
    }

    fn recurse(ctx: &mut Ctx, depth: usize, remaining: usize, w: &[f64], obj: f64) {
        let n = ctx.gram.len();
        if depth == n {
            if remaining == 0 && obj > ctx.best_value {
                ctx.best_value = obj;
                ctx.best_units = ctx.units.clone();
            }
            return;
        }
        let min_k = ctx.lo[depth].max(remaining.saturating_sub(ctx.suffix_hi[depth + 1]));
        let max_k = ctx.hi[depth].min(remaining.saturating_sub(ctx.suffix_lo[depth + 1]));
        if min_k > max_k {
            return;
        }
        for k in min_k..=max_k {
            let a = k as f64 * ctx.h;
            let contribution =
                a * ctx.gram[depth][depth] * (1.0 - a) - 2.0 * a * w[depth];
            let mut w_next = w.to_vec();
            for (j, slot) in w_next.iter_mut().enumerate().skip(depth + 1) {
                *slot += a * ctx.gram[depth][j];
            }
            ctx.units[depth] = k;
            recurse(ctx, depth + 1, remaining - k, &w_next, obj + contribution);
        }
        ctx.units[depth] = 0;
    }

    let mut ctx = Ctx {
        gram,
        h,
        lo,
        hi,
        suffix_hi: &suffix_hi,
        suffix_lo: &suffix_lo,
        units: vec![0; n],
        best_value: f64::NEG_INFINITY,
        best_units: vec![0; n],
    };
    recurse(&mut ctx, 0, total, &vec![0.0; n], 0.0);
    (ctx.best_value, ctx.best_units)
}

/// Maximizes `sum a - (1/2) a' Q a` (`Q_ij = y_i y_j K_ij`) over
/// `0 <= a_i <= c, sum a_i y_i = 0` by exhaustive grid search at step
/// `resolution * c`, then optional 5x refinements around the best point.
pub fn svm_grid_oracle(
    gram: &[Vec<f64>],
    y: &[f64],
    c: f64,
    resolution: f64,
    refine_rounds: usize,
) -> f64 {
    let n = gram.len();
    let q: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| y[i] * y[j] * gram[i][j]).collect())
        .collect();
    let mut h = resolution * c;
    let mut cap = (c / h + 1e-9).floor() as usize;
    let mut lo = vec![0usize; n];
    let mut hi = vec![cap; n];

    let (mut best_value, mut best_units) = box_search(&q, y, h, &lo, &hi);
    for _ in 0..refine_rounds {
        h /= 5.0;
        cap = (c / h + 1e-9).floor() as usize;
        for i in 0..n {
            let center = best_units[i] * 5;
            lo[i] = center.saturating_sub(REFINE_WINDOW);
            hi[i] = (center + REFINE_WINDOW).min(cap);
        }
        let (value, units) = box_search(&q, y, h, &lo, &hi);
        if value > best_value {
            best_value = value;
            best_units = units;
        }
    }
    best_value
}

/// Exhaustive search over the box with the signed-sum-zero constraint.
fn box_search(
    q: &[Vec<f64>],
    y: &[f64],
    h: f64,
    lo: &[usize],
    hi: &[usize],
) -> (f64, Vec<usize>) {
    let n = q.len();
    // how far the signed unit sum can still move from depth d onward
    let mut pos_cap = vec![0i64; n + 1];
    let mut neg_cap = vec![0i64; n + 1];
    for d in (0..n).rev() {
        pos_cap[d] = pos_cap[d + 1] + if y[d] > 0.0 { hi[d] as i64 } else { 0 };
        neg_cap[d] = neg_cap[d + 1] + if y[d] < 0.0 { hi[d] as i64 } else { 0 };
    }

    struct Ctx<'a> {
        q: &'a [Vec<f64>],
        y: &'a [f64],
        h: f64,
        lo: &'a [usize],
        hi: &'a [usize],
        pos_cap: &'a [i64],
        neg_cap: &'a [i64],
        units: Vec<usize>,
        best_value: f64,
        best_units: Vec<usize>,
    }

    fn recurse(ctx: &mut Ctx, depth: usize, net: i64, w: &[f64], obj: f64) {
        let n = ctx.q.len();
        if depth == n {
            if net == 0 && obj > ctx.best_value {
                ctx.best_value = obj;
                ctx.best_units = ctx.units.clone();
            }
            return;
        }
        // prune: remaining coordinates must be able to bring net back to 0
        if net > ctx.neg_cap[depth] || -net > ctx.pos_cap[depth] {
            return;
        }
        for k in ctx.lo[depth]..=ctx.hi[depth] {
            let a = k as f64 * ctx.h;
            let contribution = a - a * w[depth] - 0.5 * a * a * ctx.q[depth][depth];
            let mut w_next = w.to_vec();
            for (j, slot) in w_next.iter_mut().enumerate().skip(depth + 1) {
                *slot += a * ctx.q[depth][j];
            }
            ctx.units[depth] = k;
            let signed = if ctx.y[depth] > 0.0 { k as i64 } else { -(k as i64) };
            recurse(ctx, depth + 1, net + signed, &w_next, obj + contribution);
        }
        ctx.units[depth] = 0;
    }

    let mut ctx = Ctx {
        q,
        y,
        h,
        lo,
        hi,
        pos_cap: &pos_cap,
        neg_cap: &neg_cap,
        units: vec![0; n],
        best_value: f64::NEG_INFINITY,
        best_units: vec![0; n],
    };
    recurse(&mut ctx, 0, 0, &vec![0.0; n], 0.0);
    (ctx.best_value, ctx.best_units)
}

/// O(n^2) rank statistic: fraction of (positive, negative) pairs ordered
/// correctly with ties counting one half.
pub fn pairwise_auc(scores: &[f64], truths: &[u8]) -> f64 {
    let mut correct = 0.0;
    let mut pairs = 0.0;
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if truths[i] == 1 && truths[j] == 0 {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    correct += 1.0;
                } else if scores[i] == scores[j] {
                    correct += 0.5;
                }
            }
        }
    }
    correct / pairs
}

/// Directed Hausdorff distance: the farthest any row of `from` sits from its
/// nearest row in `to`.
pub fn directed_hausdorff(from: &DataMatrix, to: &DataMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..from.n_rows() {
        let a = from.row(i);
        let nearest = (0..to.n_rows())
            .map(|j| {
                a.iter()
                    .zip(to.row(j))
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(nearest);
    }
    worst
}
