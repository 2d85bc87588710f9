//! Config-driven orchestration: ingest → normalize → split → reduce → tune
//! → train → evaluate → report.
//!
//! Every stage reads its inputs from files in the run directory and writes
//! its outputs back there, so running stages one by one produces byte
//! for byte the same artifacts as a monolithic run. All randomness derives
//! from one master seed: each stage uses the first eight bytes of
//! `sha256(master_seed_le || '/' || stage_name)`, so adding stages never
//! perturbs earlier ones. Outputs land in a directory named by a hash of
//! the effective configuration, keeping reruns reproducible and separate
//! configs apart.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataio::{self, DataMatrix, LoadOptions, ShapeKind, SplitSpec};
use crate::error::{Error, Result};
use crate::eval::{self, ModelMetrics, TimingReport};
use crate::kernel::KernelSpec;
use crate::model_io;
use crate::redbscan::{self, ReductionConfig};
use crate::svdd::{self, SvddConfig};
use crate::svm::{self, SvmConfig};
use crate::tuner::{self, GaConfig};

fn default_delimiter() -> String {
    ",".into()
}
fn default_label_column() -> String {
    "label".into()
}
fn default_folds() -> usize {
    5
}
fn default_true_fraction() -> f64 {
    0.3
}
fn default_one() -> f64 {
    1.0
}
fn default_minpts() -> usize {
    10
}
fn default_mode() -> TrainMode {
    TrainMode::Tune
}
fn default_fracrej() -> f64 {
    0.05
}
fn default_svdd_tol() -> f64 {
    1e-5
}
fn default_svm_tol() -> f64 {
    1e-3
}
fn default_max_iter() -> usize {
    4_000_000
}
fn default_cv_cap() -> usize {
    2500
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}

/// Whether a model's hyperparameters come from the GA or from the config.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    Tune,
    Fixed,
}

/// Data source: either a delimited file or a built-in generator.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub generate: Option<GenerateConfig>,
    #[serde(default = "default_delimiter")]
    pub delimiter: String,
    #[serde(default = "default_label_column")]
    pub label_column: String,
    /// Feature columns in order; when absent every non-label column is used.
    #[serde(default)]
    pub feature_columns: Option<Vec<String>>,
    #[serde(default)]
    pub categorical_columns: Vec<String>,
}

/// Built-in dataset generator settings. `shape` is one of `rings`, `moons`,
/// `gaussians` or `fraud`; the first three use `n_per_class`, `fraud` uses
/// `n_rows` plus `fraud_fraction`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub shape: String,
    #[serde(default)]
    pub n_per_class: Option<usize>,
    #[serde(default)]
    pub n_rows: Option<usize>,
    #[serde(default)]
    pub fraud_fraction: Option<f64>,
    #[serde(default)]
    pub noise: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(default = "default_true_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_one")]
    pub train_target_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            test_fraction: 0.3,
            train_target_fraction: 1.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionSettings {
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default = "default_minpts")]
    pub minpts: usize,
}

impl Default for ReductionSettings {
    fn default() -> Self {
        ReductionSettings {
            eps: None,
            minpts: default_minpts(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvddSettings {
    #[serde(default = "default_mode")]
    pub mode: TrainMode,
    #[serde(default = "default_one")]
    pub sigma: f64,
    #[serde(default = "default_fracrej")]
    pub fracrej: f64,
    #[serde(default = "default_svdd_tol")]
    pub tolerance: f64,
    #[serde(default = "default_max_iter")]
    pub max_iterations: usize,
}

impl Default for SvddSettings {
    fn default() -> Self {
        SvddSettings {
            mode: TrainMode::Tune,
            sigma: 1.0,
            fracrej: 0.05,
            tolerance: 1e-5,
            max_iterations: default_max_iter(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvmSettings {
    #[serde(default = "default_mode")]
    pub mode: TrainMode,
    #[serde(default = "default_one")]
    pub sigma: f64,
    #[serde(default = "default_one")]
    pub box_c: f64,
    #[serde(default = "default_svm_tol")]
    pub tolerance: f64,
    #[serde(default = "default_max_iter")]
    pub max_iterations: usize,
    /// Cross-validation during tuning runs on at most this many rows.
    #[serde(default = "default_cv_cap")]
    pub cv_subsample_cap: usize,
    #[serde(default = "default_one")]
    pub minority_weight: f64,
}

impl Default for SvmSettings {
    fn default() -> Self {
        SvmSettings {
            mode: TrainMode::Tune,
            sigma: 1.0,
            box_c: 1.0,
            tolerance: 1e-3,
            max_iterations: default_max_iter(),
            cv_subsample_cap: 2500,
            minority_weight: 1.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaSettings {
    #[serde(default = "default_ga_pop")]
    pub population_size: usize,
    #[serde(default = "default_ga_gens")]
    pub generations: usize,
    #[serde(default = "default_ga_cx")]
    pub crossover_rate: f64,
    #[serde(default = "default_ga_mut")]
    pub mutation_rate: f64,
    #[serde(default = "default_ga_scale")]
    pub mutation_scale: f64,
    #[serde(default = "default_ga_elite")]
    pub elitism_count: usize,
}

fn default_ga_pop() -> usize {
    12
}
fn default_ga_gens() -> usize {
    8
}
fn default_ga_cx() -> f64 {
    0.9
}
fn default_ga_mut() -> f64 {
    0.25
}
fn default_ga_scale() -> f64 {
    0.05
}
fn default_ga_elite() -> usize {
    1
}

impl Default for GaSettings {
    fn default() -> Self {
        GaSettings {
            population_size: 12,
            generations: 8,
            crossover_rate: 0.9,
            mutation_rate: 0.25,
            mutation_scale: 0.05,
            elitism_count: 1,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
}

/// Full pipeline configuration as parsed from TOML.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_folds")]
    pub folds: usize,
    pub input: InputConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub reduction: ReductionSettings,
    #[serde(default)]
    pub svdd: SvddSettings,
    #[serde(default)]
    pub svm: SvmSettings,
    #[serde(default)]
    pub ga: GaSettings,
    #[serde(default)]
    pub output: OutputConfig,
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::ConfigFormat(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Self::from_toml_str(&s)
    }

    /// Directory all artifacts of this configuration land in:
    /// `<output.dir>/run-<config hash>`.
    pub fn run_dir(&self) -> PathBuf {
        self.output.dir.join(format!("run-{}", config_hash(self)))
    }

    fn delimiter_byte(&self) -> Result<u8> {
        let bytes = self.input.delimiter.as_bytes();
        if bytes.len() != 1 {
            return Err(Error::InvalidConfig(format!(
                "delimiter must be a single byte, got '{}'",
                self.input.delimiter
            )));
        }
        Ok(bytes[0])
    }
}

/// Per-stage seed: first eight little-endian bytes of
/// `sha256(master_seed_le || '/' || stage_name)`.
pub fn stage_seed(master: u64, stage: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(b"/");
    hasher.update(stage.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Hash of the effective configuration (output directory excluded), used to
/// name the run directory.
pub fn config_hash(config: &PipelineConfig) -> String {
    let mut redacted = config.clone();
    redacted.output.dir = PathBuf::new();
    let canonical = toml::to_string(&redacted).expect("config serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    digest[..8].iter().map(|b| format!("{:02x}", b)).collect()
}

// Fixed artifact names inside a run directory.
pub const NORMALIZED_FILE: &str = "normalized.csv";
pub const MAXIMA_FILE: &str = "maxima.txt";
pub const SVDD_TRAIN_FILE: &str = "svdd_train.csv";
pub const SVM_TRAIN_FILE: &str = "svm_train.csv";
pub const TEST_FILE: &str = "test.csv";
pub const REDUCED_FILE: &str = "reduced.csv";
pub const REDUCED_META_FILE: &str = "reduced.meta";
pub const PARAMS_FILE: &str = "params.toml";
pub const TIMING_FILE: &str = "timing.txt";
pub const COMPARISON_FILE: &str = "comparison.txt";
pub const FAILED_MARKER: &str = "FAILED";

/// Hyperparameters as resolved by the tune stage (or copied from the config
/// in fixed mode).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ResolvedParams {
    pub svdd: SvddParams,
    pub svm: SvmParams,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SvddParams {
    pub sigma: f64,
    pub fracrej: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SvmParams {
    pub sigma: f64,
    pub box_c: f64,
}

impl ResolvedParams {
    pub fn save(&self, path: &Path) -> Result<()> {
        let s = toml::to_string(self).map_err(|e| Error::ConfigFormat(e.to_string()))?;
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        toml::from_str(&s).map_err(|e| Error::ConfigFormat(e.to_string()))
    }
}

fn svdd_config(settings: &SvddSettings, params: SvddParams) -> SvddConfig {
    SvddConfig {
        kernel: KernelSpec::Rbf {
            sigma: params.sigma,
        },
        fracrej: params.fracrej,
        solver_tolerance: settings.tolerance,
        max_iterations: settings.max_iterations,
    }
}

fn svm_config(settings: &SvmSettings, params: SvmParams) -> SvmConfig {
    SvmConfig {
        kernel: KernelSpec::Rbf {
            sigma: params.sigma,
        },
        box_c: params.box_c,
        solver_tolerance: settings.tolerance,
        max_iterations: settings.max_iterations,
        minority_weight: settings.minority_weight,
    }
}

/// Loads or generates the raw input table described by the config.
pub fn load_input(config: &PipelineConfig) -> Result<DataMatrix> {
    match (&config.input.path, &config.input.generate) {
        (Some(_), Some(_)) => Err(Error::InvalidConfig(
            "input.path and input.generate are mutually exclusive".into(),
        )),
        (None, None) => Err(Error::InvalidConfig(
            "input needs either path or generate".into(),
        )),
        (Some(path), None) => {
            let delimiter = config.delimiter_byte()?;
            let schema = match &config.input.feature_columns {
                Some(cols) => cols.clone(),
                None => header_features(path, delimiter, &config.input.label_column)?,
            };
            let options = LoadOptions {
                delimiter,
                categorical: config.input.categorical_columns.clone(),
            };
            dataio::load_table(path, &schema, &config.input.label_column, &options)
        }
        (None, Some(generate)) => {
            let seed = stage_seed(config.seed, "generate");
            generate_input(generate, seed)
        }
    }
}

fn header_features(path: &Path, delimiter: u8, label_column: &str) -> Result<Vec<String>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .from_path(path)?;
    let headers = reader.headers()?;
    let features: Vec<String> = headers
        .iter()
        .filter(|h| *h != label_column)
        .map(String::from)
        .collect();
    if features.len() == headers.len() {
        return Err(Error::MissingColumn(label_column.to_string()));
    }
    Ok(features)
}

fn generate_input(generate: &GenerateConfig, seed: u64) -> Result<DataMatrix> {
    if generate.shape.eq_ignore_ascii_case("fraud") {
        let n_rows = generate.n_rows.ok_or_else(|| {
            Error::InvalidConfig("fraud generator needs n_rows".into())
        })?;
        let fraction = generate.fraud_fraction.unwrap_or(0.01);
        let noise = if generate.noise > 0.0 {
            generate.noise
        } else {
            0.5
        };
        dataio::generate_fraud_like(n_rows, fraction, noise, seed)
    } else {
        let shape: ShapeKind = generate.shape.parse()?;
        let n = generate.n_per_class.ok_or_else(|| {
            Error::InvalidConfig("shape generator needs n_per_class".into())
        })?;
        dataio::generate_two_class_shapes(n, shape, generate.noise, seed)
    }
}

/// Ingest stage: load or generate the input, normalize by column maxima,
/// split into the three protocol partitions and write all four tables plus
/// the maxima sidecar.
pub fn stage_ingest(config: &PipelineConfig, dir: &Path) -> Result<()> {
    let raw = load_input(config)?;
    let normalized = dataio::normalize_by_column_max(&raw)?;
    let delimiter = config.delimiter_byte()?;
    dataio::write_table(&normalized, &dir.join(NORMALIZED_FILE), delimiter)?;
    dataio::save_maxima(
        normalized.column_maxima().unwrap(),
        &dir.join(MAXIMA_FILE),
    )?;
    let spec = SplitSpec {
        test_fraction: config.split.test_fraction,
        train_target_fraction: config.split.train_target_fraction,
        seed: stage_seed(config.seed, "split"),
    };
    let (svdd_train, svm_train, test) = dataio::split_for_protocol(&normalized, &spec)?;
    dataio::write_table(&svdd_train, &dir.join(SVDD_TRAIN_FILE), delimiter)?;
    dataio::write_table(&svm_train, &dir.join(SVM_TRAIN_FILE), delimiter)?;
    dataio::write_table(&test, &dir.join(TEST_FILE), delimiter)?;
    Ok(())
}

/// Reduce stage: shrink the one-class training table and write the selected
/// rows plus a metadata sidecar.
pub fn stage_reduce(config: &PipelineConfig, dir: &Path) -> Result<redbscan::ReductionResult> {
    let delimiter = config.delimiter_byte()?;
    let svdd_train = dataio::read_table(&dir.join(SVDD_TRAIN_FILE), delimiter)?;
    let reduction = ReductionConfig {
        eps: config.reduction.eps,
        minpts: config.reduction.minpts,
    };
    let result = redbscan::reduce(&svdd_train, &reduction)?;
    dataio::write_table(&result.selected, &dir.join(REDUCED_FILE), delimiter)?;
    std::fs::write(
        dir.join(REDUCED_META_FILE),
        format!(
            "eps_used={}\nminpts={}\ninput_rows={}\noutput_rows={}\n",
            result.eps_used,
            config.reduction.minpts,
            svdd_train.n_rows(),
            result.selected.n_rows()
        ),
    )?;
    Ok(result)
}

/// Subsamples `m` rows preserving the class mix, with at least
/// `min_minority` minority rows when available. Deterministic per seed.
pub fn stratified_subsample(
    data: &DataMatrix,
    m: usize,
    min_minority: usize,
    seed: u64,
) -> Result<DataMatrix> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let labels = data.labels().ok_or(Error::MissingLabels)?;
    let n = data.n_rows();
    let m = m.clamp(2, n);

    let mut pos: Vec<usize> = (0..n).filter(|&i| labels[i] == 1).collect();
    let mut neg: Vec<usize> = (0..n).filter(|&i| labels[i] == 0).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::SingleClass);
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);

    // Exactly m rows, both classes represented, class mix preserved except
    // that the minority gets at least min_minority rows when it has them.
    let mut desired_pos = (m as f64 * pos.len() as f64 / n as f64).round() as usize;
    if pos.len() <= neg.len() {
        desired_pos = desired_pos.max(min_minority.min(pos.len()));
    } else {
        let desired_neg = (m - desired_pos.min(m)).max(min_minority.min(neg.len()));
        desired_pos = m.saturating_sub(desired_neg);
    }
    let lo = 1.max(m.saturating_sub(neg.len()));
    let hi = pos.len().min(m - 1);
    let m_pos = desired_pos.clamp(lo, hi);
    let m_neg = m - m_pos;

    let mut chosen: Vec<usize> = pos[..m_pos].iter().chain(neg[..m_neg].iter()).copied().collect();
    chosen.sort_unstable();
    Ok(data.select(&chosen))
}

/// Tune stage: resolve SVDD and SVM hyperparameters, either by seeded GA
/// runs or straight from the config, and write `params.toml`. GA histories
/// go to `tuning_svdd.csv` / `tuning_svm.csv`.
pub fn stage_tune(config: &PipelineConfig, dir: &Path) -> Result<ResolvedParams> {
    let delimiter = config.delimiter_byte()?;
    let svdd_params = match config.svdd.mode {
        TrainMode::Fixed => SvddParams {
            sigma: config.svdd.sigma,
            fracrej: config.svdd.fracrej,
        },
        TrainMode::Tune => {
            let reduced = dataio::read_table(&dir.join(REDUCED_FILE), delimiter)?;
            let svm_train = dataio::read_table(&dir.join(SVM_TRAIN_FILE), delimiter)?;
            // Validation slice borrowed from the SVM training partition;
            // the test partition stays untouched. Rows that survived the
            // reduction are the actual training set, so they are excluded —
            // scoring them back rewards degenerate memorizing kernels.
            // Fraud rows are rare, so the slice keeps every one it can get
            // (up to half its size): an AUC estimated from a handful of
            // positives is pure noise and the GA would happily overfit it.
            let reduced_keys: std::collections::HashSet<Vec<u64>> = reduced
                .rows()
                .map(|r| r.iter().map(|v| v.to_bits()).collect())
                .collect();
            let candidates: Vec<usize> = (0..svm_train.n_rows())
                .filter(|&i| {
                    let key: Vec<u64> = svm_train.row(i).iter().map(|v| v.to_bits()).collect();
                    !reduced_keys.contains(&key)
                })
                .collect();
            let pool = svm_train.select(&candidates);
            let validation = stratified_subsample(
                &pool,
                1000,
                500,
                stage_seed(config.seed, "tune-svdd-validation"),
            )?;
            if validation.count_label(1) == 0 {
                return Err(Error::SingleClass);
            }
            let ga = ga_config(config, stage_seed(config.seed, "tune-svdd"), tuner::default_svdd_bounds());
            let settings = config.svdd.clone();
            let objective = move |genes: &[f64]| -> Result<f64> {
                let params = SvddParams {
                    sigma: 10f64.powf(genes[0]),
                    fracrej: genes[1],
                };
                let model = svdd::train_svdd(&reduced, &svdd_config(&settings, params))?;
                let scores = model.fraud_scores(&validation)?;
                Ok(eval::roc_and_auc(&scores, validation.labels().unwrap())?.auc)
            };
            let outcome = tuner::run_ga(&ga, &objective)?;
            write_ga_history(&outcome, &dir.join("tuning_svdd.csv"))?;
            SvddParams {
                sigma: 10f64.powf(outcome.best.genes[0]),
                fracrej: outcome.best.genes[1],
            }
        }
    };

    let svm_params = match config.svm.mode {
        TrainMode::Fixed => SvmParams {
            sigma: config.svm.sigma,
            box_c: config.svm.box_c,
        },
        TrainMode::Tune => {
            let svm_train = dataio::read_table(&dir.join(SVM_TRAIN_FILE), delimiter)?;
            // As for the validation slice: keep every minority row the cap
            // allows, so the per-fold AUC has enough positives to rank
            // candidates meaningfully.
            let cv_data = stratified_subsample(
                &svm_train,
                config.svm.cv_subsample_cap,
                config.svm.cv_subsample_cap / 2,
                stage_seed(config.seed, "tune-svm-subsample"),
            )?;
            let fold_seed = stage_seed(config.seed, "tune-svm-folds");
            let folds = config.folds;
            let ga = ga_config(config, stage_seed(config.seed, "tune-svm"), tuner::default_svm_bounds());
            let settings = config.svm.clone();
            let objective = move |genes: &[f64]| -> Result<f64> {
                let params = SvmParams {
                    sigma: 10f64.powf(genes[0]),
                    box_c: 10f64.powf(genes[1]),
                };
                let cv = svm::kfold_cross_validate(
                    &cv_data,
                    &svm_config(&settings, params),
                    folds,
                    fold_seed,
                    true,
                )?;
                cv.mean_auc
                    .ok_or_else(|| Error::DegenerateData("no fold produced an AUC".into()))
            };
            let outcome = tuner::run_ga(&ga, &objective)?;
            write_ga_history(&outcome, &dir.join("tuning_svm.csv"))?;
            SvmParams {
                sigma: 10f64.powf(outcome.best.genes[0]),
                box_c: 10f64.powf(outcome.best.genes[1]),
            }
        }
    };

    let params = ResolvedParams {
        svdd: svdd_params,
        svm: svm_params,
    };
    params.save(&dir.join(PARAMS_FILE))?;
    Ok(params)
}

fn ga_config(config: &PipelineConfig, seed: u64, bounds: Vec<(f64, f64)>) -> GaConfig {
    GaConfig {
        population_size: config.ga.population_size,
        generations: config.ga.generations,
        crossover_rate: config.ga.crossover_rate,
        mutation_rate: config.ga.mutation_rate,
        mutation_scale: config.ga.mutation_scale,
        elitism_count: config.ga.elitism_count,
        seed,
        bounds,
    }
}

/// Tuning history as delimited text for plotting.
fn write_ga_history(outcome: &tuner::GaOutcome, path: &Path) -> Result<()> {
    use std::io::Write;
    let mut f = std::fs::File::create(path)?;
    let n_genes = outcome.best.genes.len();
    let gene_cols: Vec<String> = (0..n_genes).map(|i| format!("gene{}", i)).collect();
    writeln!(f, "generation,best_fitness,mean_fitness,{}", gene_cols.join(","))?;
    for entry in &outcome.history {
        let genes: Vec<String> = entry.best_genes.iter().map(|g| g.to_string()).collect();
        writeln!(
            f,
            "{},{},{},{}",
            entry.generation,
            entry.best_fitness,
            entry.mean_fitness,
            genes.join(",")
        )?;
    }
    Ok(())
}

/// Train stage, SVDD half: fit on the reduced table and save the model.
pub fn stage_train_svdd(config: &PipelineConfig, dir: &Path) -> Result<()> {
    let delimiter = config.delimiter_byte()?;
    let reduced = dataio::read_table(&dir.join(REDUCED_FILE), delimiter)?;
    let params = ResolvedParams::load(&dir.join(PARAMS_FILE))?;
    let model = svdd::train_svdd(&reduced, &svdd_config(&config.svdd, params.svdd))?;
    model_io::save_svdd(&model, &dir.join("svdd.model"))
}

/// Train stage, SVM half: fit on the full two-class training partition and
/// save the model.
pub fn stage_train_svm(config: &PipelineConfig, dir: &Path) -> Result<()> {
    let delimiter = config.delimiter_byte()?;
    let svm_train = dataio::read_table(&dir.join(SVM_TRAIN_FILE), delimiter)?;
    let params = ResolvedParams::load(&dir.join(PARAMS_FILE))?;
    let model = svm::train_svm(&svm_train, &svm_config(&config.svm, params.svm))?;
    model_io::save_svm(&model, &dir.join("svm.model"))
}

/// Scores a saved model against a test table; returns the metrics and the
/// curve. Output files are named `<stem>_metrics.txt` / `<stem>_roc.csv`.
pub fn evaluate_model_file(
    model_path: &Path,
    test: &DataMatrix,
    dir: &Path,
) -> Result<(String, ModelMetrics, eval::RocCurve)> {
    let stem = model_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("model")
        .to_string();
    let truths = test.labels().ok_or(Error::MissingLabels)?;
    let scores = match model_io::load_model(model_path)? {
        model_io::Model::Svdd(m) => m.fraud_scores(test)?,
        model_io::Model::Svm(m) => m.fraud_scores(test)?,
    };
    let metrics = ModelMetrics::from_scores(&scores, truths)?;
    let roc = eval::roc_and_auc(&scores, truths)?;
    std::fs::write(dir.join(format!("{}_metrics.txt", stem)), metrics.to_kv())?;
    eval::write_roc_text(&roc, &dir.join(format!("{}_roc.csv", stem)))?;
    Ok((stem, metrics, roc))
}

/// Evaluate stage: score the given models on the shared test partition and
/// write metric, ROC and chart files.
pub fn stage_evaluate(
    config: &PipelineConfig,
    dir: &Path,
    model_files: &[&str],
) -> Result<Vec<(String, ModelMetrics)>> {
    let delimiter = config.delimiter_byte()?;
    let test = dataio::read_table(&dir.join(TEST_FILE), delimiter)?;
    let mut out = Vec::new();
    let mut curves = Vec::new();
    for file in model_files {
        let (stem, metrics, roc) = evaluate_model_file(&dir.join(file), &test, dir)?;
        curves.push((stem.clone(), roc));
        out.push((stem, metrics));
    }
    let curve_refs: Vec<(&str, &eval::RocCurve)> = curves
        .iter()
        .map(|(name, roc)| (name.as_str(), roc))
        .collect();
    eval::write_roc_svg(&curve_refs, &dir.join("roc.svg"))?;
    Ok(out)
}

/// What a full run produced, beyond the files on disk.
#[derive(Clone, Debug)]
pub struct PipelineOutcome {
    pub run_dir: PathBuf,
    pub params: ResolvedParams,
    pub reduced_rows: usize,
    pub svdd_metrics: ModelMetrics,
    pub svm_metrics: ModelMetrics,
    /// Present in equal-budget comparison runs only.
    pub svdd_unreduced_metrics: Option<ModelMetrics>,
    /// Present in equal-budget comparison runs only.
    pub svm_equal_metrics: Option<ModelMetrics>,
    pub timing: TimingReport,
}

fn run_stage<T>(
    dir: &Path,
    timing: &mut TimingReport,
    name: &'static str,
    work: impl FnOnce() -> Result<T>,
) -> Result<T> {
    let (outcome, _secs) = timing.timed(name, work);
    outcome.map_err(|e| {
        let err = e.in_stage(name);
        let _ = std::fs::write(dir.join(FAILED_MARKER), format!("{}\n", err));
        err
    })
}

fn write_timing(timing: &TimingReport, path: &Path) -> Result<()> {
    use std::io::Write;
    let mut f = std::fs::File::create(path)?;
    for (name, secs) in timing.entries() {
        writeln!(f, "{}={:.6}s", name, secs)?;
    }
    Ok(())
}

/// Runs every stage in order inside the config-hash-named run directory.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutcome> {
    run_impl(config, false)
}

/// As [`run_pipeline`], plus an SVDD trained on the unreduced one-class
/// partition and an SVM trained on a stratified subsample of the training
/// partition holding exactly as many rows as the reduced set. The extra
/// AUC entries land in `comparison.txt`.
pub fn run_equal_budget_comparison(config: &PipelineConfig) -> Result<PipelineOutcome> {
    run_impl(config, true)
}

fn run_impl(config: &PipelineConfig, equal_budget: bool) -> Result<PipelineOutcome> {
    let dir = config.run_dir();
    std::fs::create_dir_all(&dir)?;
    let _ = std::fs::remove_file(dir.join(FAILED_MARKER));
    let mut timing = TimingReport::new();

    run_stage(&dir, &mut timing, "ingest", || stage_ingest(config, &dir))?;
    let reduction = run_stage(&dir, &mut timing, "reduce", || stage_reduce(config, &dir))?;
    let params = run_stage(&dir, &mut timing, "tune", || stage_tune(config, &dir))?;
    run_stage(&dir, &mut timing, "train-svdd", || {
        stage_train_svdd(config, &dir)
    })?;
    run_stage(&dir, &mut timing, "train-svm", || {
        stage_train_svm(config, &dir)
    })?;

    let mut model_files = vec!["svdd.model", "svm.model"];
    let mut svdd_unreduced_metrics = None;
    let mut svm_equal_metrics = None;
    let mut equal_rows = 0usize;

    if equal_budget {
        let delimiter = config.delimiter_byte()?;
        run_stage(&dir, &mut timing, "train-svdd-unreduced", || {
            let svdd_train = dataio::read_table(&dir.join(SVDD_TRAIN_FILE), delimiter)?;
            let model = svdd::train_svdd(&svdd_train, &svdd_config(&config.svdd, params.svdd))?;
            model_io::save_svdd(&model, &dir.join("svdd_unreduced.model"))
        })?;
        equal_rows = run_stage(&dir, &mut timing, "train-svm-equal", || {
            let svm_train = dataio::read_table(&dir.join(SVM_TRAIN_FILE), delimiter)?;
            let budget = reduction.selected.n_rows();
            let sample = stratified_subsample(
                &svm_train,
                budget,
                1,
                stage_seed(config.seed, "equal-budget"),
            )?;
            let model = svm::train_svm(&sample, &svm_config(&config.svm, params.svm))?;
            model_io::save_svm(&model, &dir.join("svm_equal.model"))?;
            Ok(sample.n_rows())
        })?;
        model_files.push("svdd_unreduced.model");
        model_files.push("svm_equal.model");
    }

    let evaluated = run_stage(&dir, &mut timing, "evaluate", || {
        stage_evaluate(config, &dir, &model_files)
    })?;
    let find = |stem: &str| -> Option<ModelMetrics> {
        evaluated
            .iter()
            .find(|(name, _)| name == stem)
            .map(|(_, m)| m.clone())
    };
    let svdd_metrics = find("svdd").expect("svdd evaluated");
    let svm_metrics = find("svm").expect("svm evaluated");
    if equal_budget {
        svdd_unreduced_metrics = find("svdd_unreduced");
        svm_equal_metrics = find("svm_equal");
        let mut comparison = format!(
            "reduced_rows={}\nequal_budget_rows={}\nauc_svdd={}\nauc_svm_full={}\nauc_svm_equal={}\n",
            reduction.selected.n_rows(),
            equal_rows,
            svdd_metrics.auc,
            svm_metrics.auc,
            svm_equal_metrics.as_ref().map(|m| m.auc).unwrap_or(f64::NAN),
        );
        if let Some(m) = &svdd_unreduced_metrics {
            comparison.push_str(&format!("auc_svdd_unreduced={}\n", m.auc));
        }
        std::fs::write(dir.join(COMPARISON_FILE), comparison)?;
    }

    write_timing(&timing, &dir.join(TIMING_FILE))?;
    Ok(PipelineOutcome {
        run_dir: dir,
        params,
        reduced_rows: reduction.selected.n_rows(),
        svdd_metrics,
        svm_metrics,
        svdd_unreduced_metrics,
        svm_equal_metrics,
        timing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_seeds_differ_and_repeat() {
        let a = stage_seed(42, "split");
        let b = stage_seed(42, "reduce");
        let c = stage_seed(43, "split");
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, stage_seed(42, "split"));
    }

    #[test]
    fn config_hash_ignores_output_dir() {
        let base = r#"
            seed = 1
            [input]
            path = "x.csv"
        "#;
        let mut a = PipelineConfig::from_toml_str(base).unwrap();
        let mut b = a.clone();
        a.output.dir = PathBuf::from("runs-a");
        b.output.dir = PathBuf::from("runs-b");
        assert_eq!(config_hash(&a), config_hash(&b));
        b.seed = 2;
        assert_ne!(config_hash(&a), config_hash(&b));
    }

    #[test]
    fn config_defaults_parse() {
        let cfg = PipelineConfig::from_toml_str(
            r#"
            [input]
            generate = { shape = "gaussians", n_per_class = 50, noise = 0.3 }
        "#,
        )
        .unwrap();
        assert_eq!(cfg.folds, 5);
        assert_eq!(cfg.svdd.mode, TrainMode::Tune);
        assert_eq!(cfg.reduction.minpts, 4);
        assert_eq!(cfg.input.delimiter, ",");
    }

    #[test]
    fn unknown_config_keys_rejected() {
        let err = PipelineConfig::from_toml_str(
            r#"
            [input]
            path = "x.csv"
            [svdd]
            sigmma = 2.0
        "#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::ConfigFormat(_)));
    }

    #[test]
    fn stratified_subsample_keeps_classes() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..100 {
            rows.push(vec![i as f64]);
            labels.push(u8::from(i < 5));
        }
        let data = DataMatrix::from_rows(rows, Some(labels)).unwrap();
        let sample = stratified_subsample(&data, 20, 2, 7).unwrap();
        assert_eq!(sample.n_rows(), 20);
        assert!(sample.count_label(1) >= 2);
        let again = stratified_subsample(&data, 20, 2, 7).unwrap();
        assert_eq!(sample, again);
    }
}
