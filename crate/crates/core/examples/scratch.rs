// temporary measurement harness; removed before release
use std::time::Instant;

use svddkit::pipeline::{run_equal_budget_comparison, PipelineConfig};

fn main() {
    for seed in [41u64, 42, 43, 44, 45] {
        let toml = format!(
            r#"
            seed = {seed}
            folds = 3

            [input]
            generate = {{ shape = "fraud", n_rows = 20000, fraud_fraction = 0.01, noise = 0.5 }}

            [output]
            dir = "/tmp/svddkit-scratch"
            "#,
            seed = seed
        );
        let config = PipelineConfig::from_toml_str(&toml).unwrap();
        let t = Instant::now();
        let outcome = run_equal_budget_comparison(&config).unwrap();
        println!(
            "seed {}: reduced {} | svdd {:.4} unred {:.4} (diff {:.4}) | svm_full {:.4} svm_eq {:.4} (drop {:+.4}) | svdd s={:.3} f={:.3}, svm s={:.3} C={:.3} | {:.0?}",
            seed,
            outcome.reduced_rows,
            outcome.svdd_metrics.auc,
            outcome.svdd_unreduced_metrics.as_ref().unwrap().auc,
            (outcome.svdd_metrics.auc - outcome.svdd_unreduced_metrics.as_ref().unwrap().auc).abs(),
            outcome.svm_metrics.auc,
            outcome.svm_equal_metrics.as_ref().unwrap().auc,
            outcome.svm_metrics.auc - outcome.svm_equal_metrics.as_ref().unwrap().auc,
            outcome.params.svdd.sigma,
            outcome.params.svdd.fracrej,
            outcome.params.svm.sigma,
            outcome.params.svm.box_c,
            t.elapsed()
        );
    }
}
