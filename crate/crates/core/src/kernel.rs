//! Distance and kernel evaluations shared by the solvers and the sample
//! reducer.
//!
//! The RBF kernel uses `K(a, b) = exp(-||a - b||^2 / sigma^2)` — note the
//! plain `sigma^2` denominator rather than `2 sigma^2`. Tuned sigma values
//! are only meaningful under this convention.

use rayon::prelude::*;

use crate::dataio::DataMatrix;
use crate::error::{Error, Result};

/// Kernel choice plus its parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelSpec {
    /// Gaussian kernel with width `sigma` in feature units.
    Rbf { sigma: f64 },
    /// Plain dot product.
    Linear,
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::Rbf { sigma } if !(*sigma > 0.0) => Err(Error::InvalidConfig(format!(
                "rbf sigma must be > 0, got {}",
                sigma
            ))),
            _ => Ok(()),
        }
    }

    /// Kernel value of a point with itself.
    pub fn self_similarity(&self, a: &[f64]) -> f64 {
        match self {
            KernelSpec::Rbf { .. } => 1.0,
            KernelSpec::Linear => dot(a, a),
        }
    }

    /// Unchecked evaluation; callers must guarantee equal arity.
    pub(crate) fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            KernelSpec::Rbf { sigma } => (-dist_sq(a, b) / (sigma * sigma)).exp(),
            KernelSpec::Linear => dot(a, b),
        }
    }
}

impl std::fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KernelSpec::Rbf { sigma } => write!(f, "rbf {}", sigma),
            KernelSpec::Linear => write!(f, "linear"),
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

fn check_arity(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::ArityMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

/// Euclidean norm of the difference of two equal-arity rows.
pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_arity(a, b)?;
    Ok(dist_sq(a, b).sqrt())
}

/// Evaluates the kernel on two equal-arity rows.
pub fn kernel_eval(spec: &KernelSpec, a: &[f64], b: &[f64]) -> Result<f64> {
    spec.validate()?;
    check_arity(a, b)?;
    Ok(spec.eval_unchecked(a, b))
}

/// Dense symmetric kernel matrix.
#[derive(Clone, Debug)]
pub struct Gram {
    n: usize,
    data: Vec<f64>,
}

impl Gram {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

/// Computes the full Gram matrix of a dataset. Entry `(i, j)` is the kernel
/// value of rows `i` and `j`; RBF diagonals are exactly 1.
pub fn gram_matrix(spec: &KernelSpec, rows: &DataMatrix) -> Result<Gram> {
    spec.validate()?;
    if rows.is_empty() {
        return Err(Error::NoDataRows);
    }
    let n = rows.n_rows();
    let mut data = vec![0.0f64; n * n];
    data.par_chunks_mut(n).enumerate().for_each(|(i, out)| {
        let a = rows.row(i);
        for (j, slot) in out.iter_mut().enumerate() {
            *slot = if i == j {
                spec.self_similarity(a)
            } else {
                spec.eval_unchecked(a, rows.row(j))
            };
        }
    });
    Ok(Gram { n, data })
}

/// Above this many rows the solvers stop precomputing the full Gram matrix
/// and fall back to on-demand rows with a bounded cache. A full matrix at
/// the limit is 8192^2 * 8 bytes = 512 MiB.
pub const DENSE_GRAM_LIMIT: usize = 8192;

/// Budget for cached on-demand kernel rows, in bytes.
const ROW_CACHE_BYTES: usize = 1 << 30;

/// Kernel matrix access for the iterative solvers: either a dense
/// precomputed Gram or on-demand rows behind a FIFO cache. Row values are
/// identical either way; only memory and speed differ.
pub enum KernelMatrix<'a> {
    Dense(Gram),
    Cached(RowCache<'a>),
}

impl<'a> KernelMatrix<'a> {
    pub fn new(spec: &KernelSpec, rows: &'a DataMatrix) -> Result<Self> {
        if rows.n_rows() <= DENSE_GRAM_LIMIT {
            Ok(KernelMatrix::Dense(gram_matrix(spec, rows)?))
        } else {
            spec.validate()?;
            Ok(KernelMatrix::Cached(RowCache::new(*spec, rows)))
        }
    }

    pub fn n(&self) -> usize {
        match self {
            KernelMatrix::Dense(g) => g.n(),
            KernelMatrix::Cached(c) => c.n(),
        }
    }

    pub fn diag(&self, i: usize) -> f64 {
        match self {
            KernelMatrix::Dense(g) => g.get(i, i),
            KernelMatrix::Cached(c) => c.diag(i),
        }
    }

    /// Kernel rows `i` and `j`, valid until the next call.
    pub fn pair(&mut self, i: usize, j: usize) -> (&[f64], &[f64]) {
        match self {
            KernelMatrix::Dense(g) => (g.row(i), g.row(j)),
            KernelMatrix::Cached(c) => c.pair(i, j),
        }
    }

    pub fn row(&mut self, i: usize) -> &[f64] {
        match self {
            KernelMatrix::Dense(g) => g.row(i),
            KernelMatrix::Cached(c) => {
                c.ensure(&[i]);
                c.rows[i].as_deref().unwrap()
            }
        }
    }
}

/// FIFO-evicted cache of kernel rows for datasets too large for a dense Gram.
pub struct RowCache<'a> {
    spec: KernelSpec,
    data: &'a DataMatrix,
    rows: Vec<Option<Box<[f64]>>>,
    order: std::collections::VecDeque<usize>,
    capacity: usize,
}

impl<'a> RowCache<'a> {
    fn new(spec: KernelSpec, data: &'a DataMatrix) -> Self {
        let n = data.n_rows();
        let capacity = (ROW_CACHE_BYTES / (8 * n)).clamp(8, n);
        RowCache {
            spec,
            data,
            rows: vec![None; n],
            order: std::collections::VecDeque::new(),
            capacity,
        }
    }

    fn n(&self) -> usize {
        self.data.n_rows()
    }

    fn diag(&self, i: usize) -> f64 {
        self.spec.self_similarity(self.data.row(i))
    }

    fn compute_row(&self, i: usize) -> Box<[f64]> {
        let a = self.data.row(i);
        let mut out = vec![0.0f64; self.n()];
        // Rows run long (tens of thousands of entries); split across workers.
        out.par_chunks_mut(2048).enumerate().for_each(|(c, chunk)| {
            let base = c * 2048;
            for (k, slot) in chunk.iter_mut().enumerate() {
                let j = base + k;
                *slot = if i == j {
                    self.spec.self_similarity(a)
                } else {
                    self.spec.eval_unchecked(a, self.data.row(j))
                };
            }
        });
        out.into_boxed_slice()
    }

    fn ensure(&mut self, keep: &[usize]) {
        for &i in keep {
            if self.rows[i].is_some() {
                continue;
            }
            while self.order.len() >= self.capacity {
                let victim = self.order.pop_front().unwrap();
                if keep.contains(&victim) {
                    self.order.push_back(victim);
                    continue;
                }
                self.rows[victim] = None;
            }
            self.rows[i] = Some(self.compute_row(i));
            self.order.push_back(i);
        }
    }

    fn pair(&mut self, i: usize, j: usize) -> (&[f64], &[f64]) {
        self.ensure(&[i, j]);
        (self.rows[i].as_deref().unwrap(), self.rows[j].as_deref().unwrap())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn distance_identity() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(euclidean_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn distance_three_four_five() {
        assert_eq!(euclidean_distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
    }

    #[test]
    fn distance_arity_mismatch() {
        assert!(matches!(
            euclidean_distance(&[0.0], &[1.0, 2.0]),
            Err(Error::ArityMismatch { .. })
        ));
    }

    #[test]
    fn rbf_at_zero_distance_is_one() {
        let spec = KernelSpec::Rbf { sigma: 0.37 };
        let a = [0.5, -2.0];
        assert_eq!(kernel_eval(&spec, &a, &a).unwrap(), 1.0);
    }

    #[test]
    fn rbf_unit_distance_unit_sigma() {
        let spec = KernelSpec::Rbf { sigma: 1.0 };
        let v = kernel_eval(&spec, &[0.0], &[1.0]).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-12);
        assert!((v - 0.367879441).abs() < 1e-9);
    }

    #[test]
    fn rbf_huge_sigma_limit() {
        let spec = KernelSpec::Rbf { sigma: 1e6 };
        let v = kernel_eval(&spec, &[0.0], &[1.0]).unwrap();
        assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rbf_invalid_sigma() {
        let spec = KernelSpec::Rbf { sigma: 0.0 };
        assert!(kernel_eval(&spec, &[0.0], &[1.0]).is_err());
    }

    #[test]
    fn linear_is_dot_product() {
        let v = kernel_eval(&KernelSpec::Linear, &[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(v, 11.0);
    }

    #[test]
    fn gram_single_row_rbf() {
        let m = DataMatrix::from_rows(vec![vec![0.3, 0.7]], None).unwrap();
        let g = gram_matrix(&KernelSpec::Rbf { sigma: 2.0 }, &m).unwrap();
        assert_eq!(g.n(), 1);
        assert_eq!(g.get(0, 0), 1.0);
    }

    fn random_matrix(n: usize, dim: usize, seed: u64) -> DataMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..n)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        DataMatrix::from_rows(rows, None).unwrap()
    }

    #[test]
    fn gram_symmetry_and_unit_diagonal() {
        let m = random_matrix(5, 3, 11);
        let g = gram_matrix(&KernelSpec::Rbf { sigma: 0.8 }, &m).unwrap();
        for i in 0..5 {
            assert_eq!(g.get(i, i), 1.0);
            for j in 0..5 {
                assert_eq!(g.get(i, j), g.get(j, i));
            }
        }
    }

    // Jacobi eigenvalue iteration for small symmetric matrices; test-only
    // oracle, independent of any solver code.
    fn symmetric_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
        let n = a.len();
        for _ in 0..100 {
            let mut p = 0;
            let mut q = 1;
            let mut off = 0.0f64;
            for i in 0..n {
                for j in (i + 1)..n {
                    if a[i][j].abs() > off {
                        off = a[i][j].abs();
                        p = i;
                        q = j;
                    }
                }
            }
            if off < 1e-14 {
                break;
            }
            let theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for k in 0..n {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..n {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
        }
        (0..n).map(|i| a[i][i]).collect()
    }

    #[test]
    fn rbf_gram_positive_semidefinite() {
        for seed in 0..20u64 {
            let m = random_matrix(4, 2, seed);
            let g = gram_matrix(&KernelSpec::Rbf { sigma: 0.6 }, &m).unwrap();
            let dense: Vec<Vec<f64>> = (0..4).map(|i| g.row(i).to_vec()).collect();
            let eigs = symmetric_eigenvalues(dense);
            for e in eigs {
                assert!(e >= -1e-9, "eigenvalue {} below tolerance (seed {})", e, seed);
            }
        }
    }

    #[test]
    fn cached_rows_match_dense() {
        let m = random_matrix(40, 2, 5);
        let spec = KernelSpec::Rbf { sigma: 0.9 };
        let g = gram_matrix(&spec, &m).unwrap();
        let mut cache = RowCache::new(spec, &m);
        cache.capacity = 4;
        for i in [0usize, 7, 13, 0, 39, 7, 21, 2, 0] {
            cache.ensure(&[i]);
            assert_eq!(cache.rows[i].as_deref().unwrap(), g.row(i));
        }
    }

    proptest! {
        #[test]
        fn distance_symmetric(ax in -10.0f64..10.0, ay in -10.0f64..10.0,
                              bx in -10.0f64..10.0, by in -10.0f64..10.0) {
            let d1 = euclidean_distance(&[ax, ay], &[bx, by]).unwrap();
            let d2 = euclidean_distance(&[bx, by], &[ax, ay]).unwrap();
            prop_assert_eq!(d1, d2);
        }

        // Closer pairs score at least as high as farther ones.
        #[test]
        fn rbf_monotone_in_distance(x in -5.0f64..5.0, u in 0.1f64..4.0, v in 0.1f64..4.0,
                                    sigma in 0.2f64..3.0) {
            let spec = KernelSpec::Rbf { sigma };
            let near = kernel_eval(&spec, &[x], &[x + u.min(v)]).unwrap();
            let far = kernel_eval(&spec, &[x], &[x + u.max(v)]).unwrap();
            prop_assert!(near >= far);
        }
    }
}
