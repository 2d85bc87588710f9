//! Shared dataset builders for the component benchmarks.

use svddkit::dataio::{self, DataMatrix, ShapeKind};
use svddkit::redbscan::{self, ReductionConfig};

/// Dense one-class blob (class-0 rows of a gaussians dataset).
pub fn one_class_blob(n: usize, seed: u64) -> DataMatrix {
    let data = dataio::generate_two_class_shapes(n, ShapeKind::Gaussians, 0.6, seed).unwrap();
    let class0: Vec<usize> = (0..n).collect();
    data.select(&class0).without_labels()
}

/// Two-class moons dataset.
pub fn moons(n_per_class: usize, seed: u64) -> DataMatrix {
    dataio::generate_two_class_shapes(n_per_class, ShapeKind::Moons, 0.08, seed).unwrap()
}

/// Reduces a blob with the default epsilon heuristic.
pub fn reduce_blob(data: &DataMatrix) -> DataMatrix {
    redbscan::reduce(
        data,
        &ReductionConfig {
            eps: None,
            minpts: 4,
        },
    )
    .unwrap()
    .selected
}
