//! Solver-vs-brute-force checks on instances small enough to enumerate.

mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use svddkit::dataio::DataMatrix;
use svddkit::kernel::KernelSpec;
use svddkit::svdd::{train_svdd, SvddConfig};
use svddkit::svm::{train_svm, SvmConfig};

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> DataMatrix {
    DataMatrix::from_rows(
        (0..n)
            .map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)])
            .collect(),
        None,
    )
    .unwrap()
}

#[test]
fn svdd_five_points_matches_plain_grid() {
    // N = 5, C = 1, sigma = 1: dense 0.02-resolution sweep of the simplex,
    // no refinement.
    let mut rng = ChaCha8Rng::seed_from_u64(501);
    let data = random_points(&mut rng, 5);
    let spec = KernelSpec::Rbf { sigma: 1.0 };
    let config = SvddConfig {
        kernel: spec,
        fracrej: 0.2, // C = 1/(5 * 0.2) = 1
        solver_tolerance: 1e-8,
        max_iterations: 1_000_000,
    };
    let model = train_svdd(&data, &config).unwrap();
    let gram = common::dense_gram(&spec, &data);
    let oracle = common::svdd_grid_oracle(&gram, 1.0, 0.02, 0);
    assert!(
        (model.dual_objective() - oracle).abs() <= 1e-3,
        "solver {} vs grid {}",
        model.dual_objective(),
        oracle
    );
}

#[test]
fn svdd_small_instances_match_refined_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for trial in 0..10 {
        let n = rng.gen_range(2..=6usize);
        let data = random_points(&mut rng, n);
        let sigma = rng.gen_range(0.5..2.0);
        let fracrej = rng.gen_range(0.15..0.8);
        let spec = KernelSpec::Rbf { sigma };
        let config = SvddConfig {
            kernel: spec,
            fracrej,
            solver_tolerance: 1e-9,
            max_iterations: 1_000_000,
        };
        let model = train_svdd(&data, &config).unwrap();
        let c = 1.0 / (n as f64 * fracrej);
        let gram = common::dense_gram(&spec, &data);
        let oracle = common::svdd_grid_oracle(&gram, c, 0.02, 4);
        assert!(
            (model.dual_objective() - oracle).abs() <= 1e-3,
            "trial {}: solver {} vs grid {} (n={}, c={})",
            trial,
            model.dual_objective(),
            oracle,
            n,
            c
        );
    }
}

#[test]
fn svm_small_instances_match_refined_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    for trial in 0..10 {
        let n = rng.gen_range(2..=6usize);
        let data = random_points(&mut rng, n);
        let mut labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        labels[0] = 1;
        labels[1 % n] = 0;
        let data = DataMatrix::from_rows(
            (0..n).map(|i| data.row(i).to_vec()).collect(),
            Some(labels.clone()),
        )
        .unwrap();
        let sigma = rng.gen_range(0.5..2.0);
        let box_c = rng.gen_range(0.4..3.0);
        let spec = KernelSpec::Rbf { sigma };
        let config = SvmConfig {
            kernel: spec,
            box_c,
            solver_tolerance: 1e-9,
            max_iterations: 1_000_000,
            minority_weight: 1.0,
        };
        let model = train_svm(&data, &config).unwrap();
        let gram = common::dense_gram(&spec, &data);
        let y: Vec<f64> = labels
            .iter()
            .map(|&l| if l == 1 { 1.0 } else { -1.0 })
            .collect();
        let oracle = common::svm_grid_oracle(&gram, &y, box_c, 0.05, 4);
        assert!(
            (model.dual_objective() - oracle).abs() <= 1e-3,
            "trial {}: solver {} vs grid {} (n={}, c={})",
            trial,
            model.dual_objective(),
            oracle,
            n,
            box_c
        );
    }
}
