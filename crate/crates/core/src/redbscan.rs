//! REDBSCAN: density-weighted representative selection.
//!
//! Every row gets a weight equal to the number of rows inside its
//! eps-neighborhood (itself included). The reducer then repeatedly takes the
//! first remaining row, gathers its eps-neighborhood among the remaining
//! rows, keeps the heaviest row of that neighborhood as a representative and
//! deletes the whole neighborhood. Dense regions collapse onto few
//! representatives while boundary geometry survives: every deleted row is
//! within eps of the probe row and the chosen representative is within eps
//! of the same probe, so nothing ends up farther than `2 * eps` from a
//! representative.

use rayon::prelude::*;

use crate::dataio::DataMatrix;
use crate::error::{Error, Result};
use crate::kernel::dist_sq;

/// Reduction parameters. When `eps` is absent it is estimated as the mean
/// distance from each row to its `minpts`-th nearest neighbor (the usual
/// k-dist heuristic), which keeps the radius scale-aware.
#[derive(Clone, Copy, Debug)]
pub struct ReductionConfig {
    pub eps: Option<f64>,
    pub minpts: usize,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        ReductionConfig {
            eps: None,
            minpts: 4,
        }
    }
}

/// Output of [`reduce`].
#[derive(Clone, Debug)]
pub struct ReductionResult {
    /// Representative rows, in selection order. Labels carry over when the
    /// input had them.
    pub selected: DataMatrix,
    /// Original row indices of the representatives, in selection order.
    pub selected_indices: Vec<usize>,
    /// Neighborhood radius actually used.
    pub eps_used: f64,
    /// Per-input-row neighbor counts (self included).
    pub weights: Vec<usize>,
    /// For each input row, the original index of the representative chosen
    /// in the iteration that deleted it.
    pub provenance: Vec<usize>,
}

impl ReductionResult {
    /// `|selected| / |input|`.
    pub fn reduction_ratio(&self) -> f64 {
        self.selected.n_rows() as f64 / self.provenance.len() as f64
    }
}

/// Mean distance from each row to its `minpts`-th nearest neighbor
/// (self excluded). Errors when there are not enough rows or when the
/// estimate degenerates to zero (all rows identical).
pub fn estimate_eps(data: &DataMatrix, minpts: usize) -> Result<f64> {
    if minpts < 1 {
        return Err(Error::InvalidConfig("minpts must be >= 1".into()));
    }
    let n = data.n_rows();
    if n <= minpts {
        return Err(Error::DegenerateData(format!(
            "need more than minpts={} rows, got {}",
            minpts, n
        )));
    }
    let kth_sum: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = data.row(i);
            let mut dists: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| dist_sq(a, data.row(j)))
                .collect();
            let (_, kth, _) = dists.select_nth_unstable_by(minpts - 1, |x, y| {
                x.partial_cmp(y).unwrap()
            });
            kth.sqrt()
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    let eps = kth_sum / n as f64;
    if eps <= 0.0 {
        return Err(Error::DegenerateData(
            "all rows identical; eps estimate is zero".into(),
        ));
    }
    Ok(eps)
}

/// Counts, for every row, how many rows sit within `eps` of it (itself
/// included, so isolated rows keep weight 1 and survive as their own
/// representatives).
pub fn compute_weights(data: &DataMatrix, eps: f64) -> Result<Vec<usize>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidConfig(format!("eps must be > 0, got {}", eps)));
    }
    let n = data.n_rows();
    let eps_sq = eps * eps;
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let a = data.row(i);
            (0..n).filter(|&j| dist_sq(a, data.row(j)) <= eps_sq).count()
        })
        .collect())
}

/// Runs the reduction loop. Weights are computed once up front; the loop
/// itself is sequential because every iteration shrinks the remaining pool.
/// Ties on the maximum weight break toward the lowest original row index.
pub fn reduce(data: &DataMatrix, config: &ReductionConfig) -> Result<ReductionResult> {
    if data.is_empty() {
        return Err(Error::NoDataRows);
    }
    let eps = match config.eps {
        Some(e) if e > 0.0 => e,
        Some(e) => {
            return Err(Error::InvalidConfig(format!("eps must be > 0, got {}", e)));
        }
        None => estimate_eps(data, config.minpts)?,
    };
    let weights = compute_weights(data, eps)?;

    let n = data.n_rows();
    let eps_sq = eps * eps;
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut neighborhood: Vec<usize> = Vec::new();
    let mut selected_indices = Vec::new();
    let mut provenance = vec![usize::MAX; n];

    while !remaining.is_empty() {
        let ob = remaining[0];
        let probe = data.row(ob);
        neighborhood.clear();
        for &r in &remaining {
            if dist_sq(probe, data.row(r)) <= eps_sq {
                neighborhood.push(r);
            }
        }
        // `remaining` stays ascending, so the first maximum is the lowest
        // original index.
        let rep = *neighborhood
            .iter()
            .max_by_key(|&&r| (weights[r], std::cmp::Reverse(r)))
            .expect("neighborhood always contains ob itself");
        selected_indices.push(rep);
        for &r in &neighborhood {
            provenance[r] = rep;
        }
        remaining.retain(|&r| provenance[r] == usize::MAX);
    }

    Ok(ReductionResult {
        selected: data.select(&selected_indices),
        selected_indices,
        eps_used: eps,
        weights,
        provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matrix_1d(values: &[f64]) -> DataMatrix {
        DataMatrix::from_rows(values.iter().map(|&v| vec![v]).collect(), None).unwrap()
    }

    fn random_2d(n: usize, seed: u64, span: f64) -> DataMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DataMatrix::from_rows(
            (0..n)
                .map(|_| vec![rng.gen_range(0.0..span), rng.gen_range(0.0..span)])
                .collect(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn eps_three_collinear_points() {
        let data = matrix_1d(&[0.0, 1.0, 2.0]);
        let eps = estimate_eps(&data, 1).unwrap();
        assert!((eps - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eps_identical_points_degenerate() {
        let data = matrix_1d(&[3.0, 3.0, 3.0, 3.0]);
        assert!(matches!(
            estimate_eps(&data, 1),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn eps_too_few_rows() {
        let data = matrix_1d(&[0.0, 1.0]);
        assert!(estimate_eps(&data, 4).is_err());
    }

    #[test]
    fn eps_matches_exhaustive_knn() {
        let data = random_2d(100, 8, 1.0);
        let minpts = 4;
        // independent O(N^2) k-NN: full sort instead of selection
        let n = data.n_rows();
        let mut total = 0.0;
        for i in 0..n {
            let mut d: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    crate::kernel::euclidean_distance(data.row(i), data.row(j)).unwrap()
                })
                .collect();
            d.sort_by(|a, b| a.partial_cmp(b).unwrap());
            total += d[minpts - 1];
        }
        let oracle = total / n as f64;
        let eps = estimate_eps(&data, minpts).unwrap();
        assert_eq!(eps, oracle);
    }

    #[test]
    fn weight_isolated_point_is_one() {
        let data = matrix_1d(&[0.0, 100.0, 200.0]);
        let w = compute_weights(&data, 0.5).unwrap();
        assert_eq!(w, vec![1, 1, 1]);
    }

    #[test]
    fn weight_mutually_close_points() {
        let data = matrix_1d(&[0.0, 0.1, 0.2]);
        let w = compute_weights(&data, 10.0).unwrap();
        assert_eq!(w, vec![3, 3, 3]);
    }

    #[test]
    fn weights_match_recount_oracle() {
        let data = random_2d(200, 9, 1.0);
        let eps = 0.12;
        let w = compute_weights(&data, eps).unwrap();
        for i in 0..data.n_rows() {
            let mut count = 0;
            for j in 0..data.n_rows() {
                let d = crate::kernel::euclidean_distance(data.row(i), data.row(j)).unwrap();
                if d <= eps {
                    count += 1;
                }
            }
            assert_eq!(w[i], count, "row {}", i);
        }
    }

    #[test]
    fn reduce_single_cluster_collapses_to_one() {
        let data = matrix_1d(&[0.0, 0.01, 0.02]);
        let result = reduce(
            &data,
            &ReductionConfig {
                eps: Some(1.0),
                minpts: 1,
            },
        )
        .unwrap();
        assert_eq!(result.selected.n_rows(), 1);
    }

    #[test]
    fn reduce_two_far_clusters_keep_one_each() {
        let data = matrix_1d(&[0.0, 0.1, 0.2, 50.0, 50.1, 50.2]);
        let result = reduce(
            &data,
            &ReductionConfig {
                eps: Some(1.0),
                minpts: 1,
            },
        )
        .unwrap();
        assert_eq!(result.selected.n_rows(), 2);
        // one representative per cluster
        assert!(result.selected.row(0)[0] < 1.0);
        assert!(result.selected.row(1)[0] > 49.0);
    }

    #[test]
    fn reduce_collinear_trace() {
        // eps 0.5: iteration 1 deletes {0, 0.4}, iteration 2 deletes
        // {0.8, 1.2}, iteration 3 deletes {1.6} -> 3 representatives.
        let data = matrix_1d(&[0.0, 0.4, 0.8, 1.2, 1.6]);
        let result = reduce(
            &data,
            &ReductionConfig {
                eps: Some(0.5),
                minpts: 1,
            },
        )
        .unwrap();
        assert_eq!(result.selected.n_rows(), 3);
        assert!(result.selected_indices[0] == 0 || result.selected_indices[0] == 1);
        assert_eq!(result.provenance[0], result.provenance[1]);
        assert_eq!(result.provenance[2], result.provenance[3]);
        assert!([2usize, 3].contains(&result.provenance[2]));
        assert_eq!(result.provenance[4], 4);
    }

    #[test]
    fn reduce_tie_breaks_to_lowest_index() {
        // Uniform density: every point weight 2 inside pairs; first pair
        // member (lowest original index) must win.
        let data = matrix_1d(&[0.0, 0.1, 5.0, 5.1]);
        let result = reduce(
            &data,
            &ReductionConfig {
                eps: Some(0.5),
                minpts: 1,
            },
        )
        .unwrap();
        assert_eq!(result.selected_indices, vec![0, 2]);
    }

    #[test]
    fn coverage_within_two_eps() {
        let data = random_2d(300, 4, 1.0);
        let result = reduce(
            &data,
            &ReductionConfig {
                eps: None,
                minpts: 4,
            },
        )
        .unwrap();
        let bound = 2.0 * result.eps_used;
        for i in 0..data.n_rows() {
            let nearest = (0..result.selected.n_rows())
                .map(|s| {
                    crate::kernel::euclidean_distance(data.row(i), result.selected.row(s))
                        .unwrap()
                })
                .fold(f64::INFINITY, f64::min);
            assert!(
                nearest <= bound + 1e-12,
                "row {} at {} > 2*eps {}",
                i,
                nearest,
                bound
            );
        }
    }

    #[test]
    fn selected_rows_bit_identical_to_inputs() {
        let data = random_2d(150, 5, 1.0);
        let result = reduce(
            &data,
            &ReductionConfig {
                eps: Some(0.1),
                minpts: 1,
            },
        )
        .unwrap();
        for (k, &idx) in result.selected_indices.iter().enumerate() {
            assert_eq!(result.selected.row(k), data.row(idx));
        }
    }

    #[test]
    fn tiny_eps_keeps_everything() {
        let data = random_2d(50, 6, 100.0);
        // eps below the minimum pairwise distance
        let mut min_d = f64::INFINITY;
        for i in 0..50 {
            for j in (i + 1)..50 {
                let d =
                    crate::kernel::euclidean_distance(data.row(i), data.row(j)).unwrap();
                min_d = min_d.min(d);
            }
        }
        let result = reduce(
            &data,
            &ReductionConfig {
                eps: Some(min_d * 0.5),
                minpts: 1,
            },
        )
        .unwrap();
        assert_eq!(result.selected.n_rows(), 50);
    }

    #[test]
    fn provenance_total_and_self_coverage() {
        let data = random_2d(120, 7, 1.0);
        let result = reduce(
            &data,
            &ReductionConfig {
                eps: Some(0.15),
                minpts: 1,
            },
        )
        .unwrap();
        for (i, &rep) in result.provenance.iter().enumerate() {
            assert!(rep != usize::MAX, "row {} never covered", i);
            assert!(result.selected_indices.contains(&rep));
        }
        for &s in &result.selected_indices {
            assert_eq!(result.provenance[s], s, "representative must cover itself");
        }
    }

    #[test]
    fn reduce_deterministic() {
        let data = random_2d(200, 10, 1.0);
        let cfg = ReductionConfig {
            eps: None,
            minpts: 3,
        };
        let a = reduce(&data, &cfg).unwrap();
        let b = reduce(&data, &cfg).unwrap();
        assert_eq!(a.selected_indices, b.selected_indices);
        assert_eq!(a.eps_used, b.eps_used);
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.provenance, b.provenance);
    }
}
