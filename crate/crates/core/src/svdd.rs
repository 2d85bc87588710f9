//! Support vector data description: the minimum enclosing hypersphere of
//! target-class data in kernel feature space.
//!
//! Training maximizes `sum_i a_i K(x_i, x_i) - sum_ij a_i a_j K(x_i, x_j)`
//! subject to `sum_i a_i = 1` and `0 <= a_i <= C` with `C = 1 / (N * fracrej)`.
//! The solver performs pairwise coordinate ascent: each step picks the most
//! violating pair of coefficients and moves them along the direction that
//! preserves their sum, clipped to the box. New points are scored by their
//! squared kernel-space distance to the sphere center against the squared
//! radius.

use rayon::prelude::*;

use crate::dataio::DataMatrix;
use crate::error::{Error, Result};
use crate::kernel::{KernelMatrix, KernelSpec};

/// Training parameters for the hypersphere fit.
#[derive(Clone, Copy, Debug)]
pub struct SvddConfig {
    pub kernel: KernelSpec,
    /// Fraction of target-class training objects allowed outside the sphere.
    /// Maps to the box constraint `C = 1 / (N * fracrej)`.
    pub fracrej: f64,
    /// KKT gap at which the dual is considered solved.
    pub solver_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SvddConfig {
    fn default() -> Self {
        SvddConfig {
            kernel: KernelSpec::Rbf { sigma: 1.0 },
            fracrej: 0.05,
            solver_tolerance: 1e-6,
            max_iterations: 4_000_000,
        }
    }
}

impl SvddConfig {
    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if !(self.fracrej > 0.0 && self.fracrej < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "fracrej must be in (0,1), got {}",
                self.fracrej
            )));
        }
        if !(self.solver_tolerance > 0.0) {
            return Err(Error::InvalidConfig(
                "solver_tolerance must be > 0".into(),
            ));
        }
        Ok(())
    }
}

/// A trained hypersphere model. Only rows whose coefficient exceeds
/// `1e-8 * C` are retained as support vectors.
#[derive(Clone, Debug)]
pub struct SvddModel {
    pub support_rows: DataMatrix,
    pub alphas: Vec<f64>,
    pub kernel: KernelSpec,
    /// Squared sphere radius: mean squared center distance of the
    /// unbounded support vectors.
    pub radius_sq: f64,
    /// Cached `sum_ij a_i a_j K(x_i, x_j)` (squared center norm term).
    pub offset_term: f64,
}

/// Relative coefficient threshold below which a row is not a support vector.
const SV_THRESHOLD_FACTOR: f64 = 1e-8;

/// Trains the hypersphere on single-class data.
pub fn train_svdd(data: &DataMatrix, config: &SvddConfig) -> Result<SvddModel> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::NoDataRows);
    }
    if let Some(labels) = data.labels() {
        let first = labels[0];
        if labels.iter().any(|&l| l != first) {
            return Err(Error::InvalidConfig(
                "one-class training data must contain a single class".into(),
            ));
        }
    }
    let n = data.n_rows();
    let c = 1.0 / (n as f64 * config.fracrej);
    if c * (n as f64) < 1.0 {
        return Err(Error::Infeasible(format!(
            "box constraint C = {} cannot satisfy sum(alpha) = 1 over {} rows",
            c, n
        )));
    }

    let mut kmat = KernelMatrix::new(&config.kernel, data)?;
    let diag: Vec<f64> = (0..n).map(|i| kmat.diag(i)).collect();

    // Feasible start: pile the unit mass onto the first rows at the box
    // bound so the initial gradient costs only a handful of kernel rows.
    let mut alphas = vec![0.0f64; n];
    let full = (1.0 / c).floor() as usize;
    let mut seeded = Vec::new();
    for (i, a) in alphas.iter_mut().enumerate().take(full.min(n)) {
        *a = c;
        seeded.push(i);
    }
    let remainder = 1.0 - c * full.min(n) as f64;
    if remainder > 0.0 && full < n {
        alphas[full] = remainder;
        seeded.push(full);
    }

    let mut grad = diag.clone();
    for &j in &seeded {
        let a_j = alphas[j];
        let row_j = kmat.row(j);
        for (g, &k) in grad.iter_mut().zip(row_j) {
            *g -= 2.0 * a_j * k;
        }
    }

    let mut iterations = 0usize;
    loop {
        // Most violating pair: the best coefficient to grow against the
        // best to shrink.
        let mut up: Option<usize> = None;
        let mut low: Option<usize> = None;
        for i in 0..n {
            if alphas[i] < c && up.map_or(true, |u| grad[i] > grad[u]) {
                up = Some(i);
            }
            if alphas[i] > 0.0 && low.map_or(true, |l| grad[i] < grad[l]) {
                low = Some(i);
            }
        }
        let (i, j) = match (up, low) {
            (Some(i), Some(j)) => (i, j),
            _ => break,
        };
        let gap = grad[i] - grad[j];
        if gap <= config.solver_tolerance {
            break;
        }
        if iterations >= config.max_iterations {
            return Err(Error::NonConvergence {
                iterations: config.max_iterations,
            });
        }
        iterations += 1;

        let (row_i, row_j) = kmat.pair(i, j);
        let curvature = diag[i] + diag[j] - 2.0 * row_i[j];
        let t_max = (c - alphas[i]).min(alphas[j]);
        let t = if curvature > f64::EPSILON {
            (gap / (2.0 * curvature)).min(t_max)
        } else {
            t_max
        };
        let new_i = (alphas[i] + t).min(c);
        let new_j = (alphas[j] - t).max(0.0);
        if new_i == alphas[i] && new_j == alphas[j] {
            break; // no representable progress left
        }
        alphas[i] = new_i;
        alphas[j] = new_j;
        for ((g, &ki), &kj) in grad.iter_mut().zip(row_i).zip(row_j) {
            *g -= 2.0 * t * (ki - kj);
        }
    }

    // offset = alpha' K alpha, recovered from the maintained gradient:
    // grad_i = K_ii - 2 (K alpha)_i.
    let offset_term = alphas
        .iter()
        .zip(diag.iter().zip(&grad))
        .map(|(&a, (&d, &g))| a * (d - g))
        .sum::<f64>()
        / 2.0;

    let sv_threshold = SV_THRESHOLD_FACTOR * c;
    let mut sv_indices = Vec::new();
    let mut unbounded_dist = Vec::new();
    let mut max_sv_dist = f64::NEG_INFINITY;
    for i in 0..n {
        if alphas[i] > sv_threshold {
            sv_indices.push(i);
            let dist_sq = grad[i] + offset_term;
            max_sv_dist = max_sv_dist.max(dist_sq);
            if alphas[i] < c - sv_threshold {
                unbounded_dist.push(dist_sq);
            }
        }
    }
    let radius_sq = if unbounded_dist.is_empty() {
        // every coefficient saturated: fall back to the farthest support
        // vector so the model stays usable
        max_sv_dist.max(0.0)
    } else {
        (unbounded_dist.iter().sum::<f64>() / unbounded_dist.len() as f64).max(0.0)
    };

    Ok(SvddModel {
        support_rows: data.select(&sv_indices).without_labels(),
        alphas: sv_indices.iter().map(|&i| alphas[i]).collect(),
        kernel: config.kernel,
        radius_sq,
        offset_term,
    })
}

impl SvddModel {
    fn check_arity(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.support_rows.dim() {
            return Err(Error::ArityMismatch {
                expected: self.support_rows.dim(),
                got: z.len(),
            });
        }
        Ok(())
    }

    /// Squared kernel-space distance from `z` to the sphere center:
    /// `K(z,z) - 2 sum_i a_i K(x_i, z) + offset_term`.
    pub fn kernel_distance_sq(&self, z: &[f64]) -> Result<f64> {
        self.check_arity(z)?;
        let cross: f64 = self
            .alphas
            .iter()
            .zip(self.support_rows.rows())
            .map(|(&a, x)| a * self.kernel.eval_unchecked(x, z))
            .sum();
        Ok(self.kernel.self_similarity(z) - 2.0 * cross + self.offset_term)
    }

    /// Signed acceptance score: `radius_sq - kernel_distance_sq(z)`.
    /// Non-negative means accept (target class), negative means fraud-flag.
    /// Negate it when a fraud-likeness score is needed.
    pub fn decision_score(&self, z: &[f64]) -> Result<f64> {
        Ok(self.radius_sq - self.kernel_distance_sq(z)?)
    }

    /// Batch prediction: 1 (fraud) where the decision score is negative.
    pub fn classify(&self, data: &DataMatrix) -> Result<Vec<u8>> {
        if data.dim() != self.support_rows.dim() {
            return Err(Error::ArityMismatch {
                expected: self.support_rows.dim(),
                got: data.dim(),
            });
        }
        Ok((0..data.n_rows())
            .into_par_iter()
            .map(|i| u8::from(self.decision_score(data.row(i)).unwrap() < 0.0))
            .collect())
    }

    /// Fraud-likeness scores for a whole table (higher = more fraud-like).
    pub fn fraud_scores(&self, data: &DataMatrix) -> Result<Vec<f64>> {
        if data.dim() != self.support_rows.dim() {
            return Err(Error::ArityMismatch {
                expected: self.support_rows.dim(),
                got: data.dim(),
            });
        }
        Ok((0..data.n_rows())
            .into_par_iter()
            .map(|i| -self.decision_score(data.row(i)).unwrap())
            .collect())
    }

    /// Value of the trained dual objective, recomputed from the support
    /// vectors.
    pub fn dual_objective(&self) -> f64 {
        let linear: f64 = self
            .alphas
            .iter()
            .zip(self.support_rows.rows())
            .map(|(&a, x)| a * self.kernel.self_similarity(x))
            .sum();
        linear - self.offset_term
    }
}
