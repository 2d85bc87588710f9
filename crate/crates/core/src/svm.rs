//! Soft-margin two-class SVM baseline with k-fold cross validation.
//!
//! The dual is solved with two-index updates on the most violating pair,
//! preserving the signed-sum constraint and clipping to the box. Fraud
//! (label 1) maps to the positive side, so the decision value doubles as a
//! fraud-likeness score.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataio::DataMatrix;
use crate::error::{Error, Result};
use crate::eval::{confusion, roc_and_auc, ConfusionCounts};
use crate::kernel::{KernelMatrix, KernelSpec};

/// Training parameters for the two-class baseline.
#[derive(Clone, Copy, Debug)]
pub struct SvmConfig {
    pub kernel: KernelSpec,
    /// Box constraint on every dual coefficient.
    pub box_c: f64,
    /// KKT gap at which the dual is considered solved.
    pub solver_tolerance: f64,
    pub max_iterations: usize,
    /// Multiplier on `box_c` for the minority class; 1.0 disables weighting.
    pub minority_weight: f64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            kernel: KernelSpec::Rbf { sigma: 1.0 },
            box_c: 1.0,
            solver_tolerance: 1e-4,
            max_iterations: 4_000_000,
            minority_weight: 1.0,
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if !(self.box_c > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "box_c must be > 0, got {}",
                self.box_c
            )));
        }
        if !(self.solver_tolerance > 0.0) {
            return Err(Error::InvalidConfig(
                "solver_tolerance must be > 0".into(),
            ));
        }
        if !(self.minority_weight > 0.0) {
            return Err(Error::InvalidConfig(
                "minority_weight must be > 0".into(),
            ));
        }
        Ok(())
    }
}

/// A trained SVM. `signed_alphas[k]` is `alpha_k * y_k` for support vector
/// `k`, with fraud mapped to `y = +1`.
#[derive(Clone, Debug)]
pub struct SvmModel {
    pub support_rows: DataMatrix,
    pub signed_alphas: Vec<f64>,
    pub bias: f64,
    pub kernel: KernelSpec,
}

/// Trains the soft-margin dual on labeled data containing both classes.
pub fn train_svm(data: &DataMatrix, config: &SvmConfig) -> Result<SvmModel> {
    config.validate()?;
    let labels = data.labels().ok_or(Error::MissingLabels)?;
    let n = data.n_rows();
    let n_pos = data.count_label(1);
    if n_pos == 0 || n_pos == n {
        return Err(Error::SingleClass);
    }

    let y: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let minority_label = if n_pos * 2 <= n { 1 } else { 0 };
    let bound: Vec<f64> = labels
        .iter()
        .map(|&l| {
            if l == minority_label {
                config.box_c * config.minority_weight
            } else {
                config.box_c
            }
        })
        .collect();

    let mut kmat = KernelMatrix::new(&config.kernel, data)?;
    let diag: Vec<f64> = (0..n).map(|i| kmat.diag(i)).collect();

    // Minimization form: f(a) = a'Qa/2 - sum(a), gradient starts at -1.
    let mut alphas = vec![0.0f64; n];
    let mut grad = vec![-1.0f64; n];

    let mut iterations = 0usize;
    loop {
        // violating pair over the feasible ascent/descent sets
        let mut up: Option<(usize, f64)> = None;
        let mut low: Option<(usize, f64)> = None;
        for i in 0..n {
            let v = -y[i] * grad[i];
            let in_up = (y[i] > 0.0 && alphas[i] < bound[i]) || (y[i] < 0.0 && alphas[i] > 0.0);
            let in_low = (y[i] > 0.0 && alphas[i] > 0.0) || (y[i] < 0.0 && alphas[i] < bound[i]);
            if in_up && up.map_or(true, |(_, best)| v > best) {
                up = Some((i, v));
            }
            if in_low && low.map_or(true, |(_, best)| v < best) {
                low = Some((i, v));
            }
        }
        let ((i, m), (j, m_low)) = match (up, low) {
            (Some(a), Some(b)) => (a, b),
            _ => break,
        };
        if m - m_low <= config.solver_tolerance {
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
        // step along (y_i e_i - y_j e_j): a_i moves by y_i t, a_j by -y_j t
        let t_max_i = if y[i] > 0.0 { bound[i] - alphas[i] } else { alphas[i] };
        let t_max_j = if y[j] > 0.0 { alphas[j] } else { bound[j] - alphas[j] };
        let t_max = t_max_i.min(t_max_j);
        let t = if curvature > f64::EPSILON {
            ((m - m_low) / curvature).min(t_max)
        } else {
            t_max
        };
        let new_i = (alphas[i] + y[i] * t).clamp(0.0, bound[i]);
        let new_j = (alphas[j] - y[j] * t).clamp(0.0, bound[j]);
        if new_i == alphas[i] && new_j == alphas[j] {
            break;
        }
        alphas[i] = new_i;
        alphas[j] = new_j;
        for ((g, &ki), (&kj, &yk)) in grad.iter_mut().zip(row_i).zip(row_j.iter().zip(&y)) {
            *g += yk * t * (ki - kj);
        }
    }

    // bias from unbounded SVs; fall back to the violating-pair midpoint
    let mut bias_sum = 0.0;
    let mut bias_count = 0usize;
    for i in 0..n {
        if alphas[i] > 1e-8 * bound[i] && alphas[i] < bound[i] * (1.0 - 1e-8) {
            bias_sum += -y[i] * grad[i];
            bias_count += 1;
        }
    }
    let bias = if bias_count > 0 {
        bias_sum / bias_count as f64
    } else {
        let mut m = f64::NEG_INFINITY;
        let mut m_low = f64::INFINITY;
        for i in 0..n {
            let v = -y[i] * grad[i];
            if (y[i] > 0.0 && alphas[i] < bound[i]) || (y[i] < 0.0 && alphas[i] > 0.0) {
                m = m.max(v);
            }
            if (y[i] > 0.0 && alphas[i] > 0.0) || (y[i] < 0.0 && alphas[i] < bound[i]) {
                m_low = m_low.min(v);
            }
        }
        (m + m_low) / 2.0
    };

    let mut sv_indices = Vec::new();
    let mut signed = Vec::new();
    for i in 0..n {
        if alphas[i] > 1e-8 * bound[i] {
            sv_indices.push(i);
            signed.push(alphas[i] * y[i]);
        }
    }
    Ok(SvmModel {
        support_rows: data.select(&sv_indices).without_labels(),
        signed_alphas: signed,
        bias,
        kernel: config.kernel,
    })
}

impl SvmModel {
    fn check_arity(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.support_rows.dim() {
            return Err(Error::ArityMismatch {
                expected: self.support_rows.dim(),
                got: z.len(),
            });
        }
        Ok(())
    }

    /// Signed margin `sum_k alpha_k y_k K(x_k, z) + bias`; positive means
    /// fraud.
    pub fn decision(&self, z: &[f64]) -> Result<f64> {
        self.check_arity(z)?;
        let s: f64 = self
            .signed_alphas
            .iter()
            .zip(self.support_rows.rows())
            .map(|(&a, x)| a * self.kernel.eval_unchecked(x, z))
            .sum();
        Ok(s + self.bias)
    }

    /// Batch prediction: 1 (fraud) where the decision value is positive.
    pub fn classify(&self, data: &DataMatrix) -> Result<Vec<u8>> {
        if data.dim() != self.support_rows.dim() {
            return Err(Error::ArityMismatch {
                expected: self.support_rows.dim(),
                got: data.dim(),
            });
        }
        Ok((0..data.n_rows())
            .into_par_iter()
            .map(|i| u8::from(self.decision(data.row(i)).unwrap() > 0.0))
            .collect())
    }

    /// Fraud-likeness scores (the raw decision values).
    pub fn fraud_scores(&self, data: &DataMatrix) -> Result<Vec<f64>> {
        if data.dim() != self.support_rows.dim() {
            return Err(Error::ArityMismatch {
                expected: self.support_rows.dim(),
                got: data.dim(),
            });
        }
        Ok((0..data.n_rows())
            .into_par_iter()
            .map(|i| self.decision(data.row(i)).unwrap())
            .collect())
    }

    /// Value of the trained dual objective, recomputed from the support
    /// vectors: `sum |a| - (1/2) sum_kl a_k a_l y_k y_l K(x_k, x_l)`.
    pub fn dual_objective(&self) -> f64 {
        let linear: f64 = self.signed_alphas.iter().map(|a| a.abs()).sum();
        let mut quad = 0.0;
        for (k, xk) in self.support_rows.rows().enumerate() {
            for (l, xl) in self.support_rows.rows().enumerate() {
                quad += self.signed_alphas[k]
                    * self.signed_alphas[l]
                    * self.kernel.eval_unchecked(xk, xl);
            }
        }
        linear - 0.5 * quad
    }
}

/// Evaluation of one held-out fold.
#[derive(Clone, Debug)]
pub struct FoldMetrics {
    pub counts: ConfusionCounts,
    pub accuracy: f64,
    /// Absent when the holdout carries a single class.
    pub auc: Option<f64>,
}

/// Cross-validation outcome: per-fold metrics plus their means.
#[derive(Clone, Debug)]
pub struct CrossValidation {
    pub folds: Vec<FoldMetrics>,
    pub mean_accuracy: f64,
    /// Mean over folds where AUC was defined.
    pub mean_auc: Option<f64>,
    /// Fold index assigned to every row.
    pub fold_assignment: Vec<usize>,
}

/// Shuffles once with the seed, splits into `k` near-equal groups, holds
/// each group out exactly once while training on the rest, and keeps the
/// per-fold scores while discarding the models.
///
/// With `stratified` set, rows are dealt to folds class by class so the
/// minority class lands in every fold; this requires at least `k` members
/// per class. Unstratified folding only requires `k <= n`.
pub fn kfold_cross_validate(
    data: &DataMatrix,
    config: &SvmConfig,
    k: usize,
    seed: u64,
    stratified: bool,
) -> Result<CrossValidation> {
    let labels = data.labels().ok_or(Error::MissingLabels)?;
    let n = data.n_rows();
    if k < 2 || k > n {
        return Err(Error::InvalidConfig(format!(
            "k must be in [2, {}], got {}",
            n, k
        )));
    }
    if stratified {
        let n_pos = data.count_label(1);
        if n_pos < k || n - n_pos < k {
            return Err(Error::InvalidConfig(format!(
                "stratified folding needs >= {} rows per class",
                k
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let mut fold_assignment = vec![0usize; n];
    if stratified {
        // deal one global round-robin counter across both classes so fold
        // sizes still differ by at most one
        let mut counter = 0usize;
        for class in [0u8, 1u8] {
            for &i in order.iter().filter(|&&i| labels[i] == class) {
                fold_assignment[i] = counter % k;
                counter += 1;
            }
        }
    } else {
        for (pos, &i) in order.iter().enumerate() {
            fold_assignment[i] = pos % k;
        }
    }

    let mut folds = Vec::with_capacity(k);
    for fold in 0..k {
        let train_idx: Vec<usize> = (0..n).filter(|&i| fold_assignment[i] != fold).collect();
        let test_idx: Vec<usize> = (0..n).filter(|&i| fold_assignment[i] == fold).collect();
        let train = data.select(&train_idx);
        let test = data.select(&test_idx);
        let model = train_svm(&train, config)?;
        let predictions = model.classify(&test)?;
        let truths = test.labels().unwrap();
        let counts = confusion(&predictions, truths)?;
        let scores = model.fraud_scores(&test)?;
        let auc = roc_and_auc(&scores, truths).ok().map(|r| r.auc);
        folds.push(FoldMetrics {
            counts,
            accuracy: counts.accuracy(),
            auc,
        });
    }

    let mean_accuracy = folds.iter().map(|f| f.accuracy).sum::<f64>() / k as f64;
    let with_auc: Vec<f64> = folds.iter().filter_map(|f| f.auc).collect();
    let mean_auc = if with_auc.is_empty() {
        None
    } else {
        Some(with_auc.iter().sum::<f64>() / with_auc.len() as f64)
    };
    Ok(CrossValidation {
        folds,
        mean_accuracy,
        mean_auc,
        fold_assignment,
    })
}
