//! A small federated comparison: plain averaging versus topologically
//! aligned local training on a label-skewed synthetic split.
//!
//! ```bash
//! cargo run --release -p fedtopo --example training
//! ```

use fedtopo::data::{gen_synthetic, Split, SyntheticSpec};
use fedtopo::federation::{run_federation, AlphaConfig, AlphaSchedule, FederationConfig, Method};
use fedtopo::partitions::l_skew;

fn main() -> fedtopo::Result<()> {
    let train = gen_synthetic(&SyntheticSpec {
        count_per_class: 150,
        noise: 0.25,
        seed: 5,
        ..Default::default()
    })?;
    let mut test = gen_synthetic(&SyntheticSpec {
        count_per_class: 75,
        noise: 0.25,
        seed: 6,
        ..Default::default()
    })?;
    test.split = Split::Test;
    let partition = l_skew(&train.labels, 3, 0.2, 42)?;

    let base = FederationConfig {
        clients: 3,
        rounds: 3,
        local_epochs: 3,
        batch_size: 16,
        alpha: AlphaConfig {
            schedule: AlphaSchedule::SmoothTopo,
            alpha_max: 0.2,
            alpha_min_global: 0.02,
            loss_range: (0.05, 2.0),
            ..AlphaConfig::default()
        },
        ..FederationConfig::default()
    };

    for method in [Method::FedAvg, Method::FedTopo] {
        let cfg = FederationConfig { method, ..base.clone() };
        let run = run_federation(&cfg, &train, &test, &partition, 99)?;
        let accs: Vec<String> =
            run.logs.iter().map(|r| format!("{:.3}", r.test_accuracy)).collect();
        println!("{method:?}: rounds {} -> final {:.4}", accs.join(" "), run
            .logs
            .last()
            .map_or(run.initial_accuracy, |r| r.test_accuracy));
        if method == Method::FedTopo {
            for r in &run.logs {
                let mean_tal: f64 = r
                    .clients
                    .iter()
                    .flat_map(|c| c.epochs.iter().map(|e| e.tal))
                    .sum::<f64>()
                    / r.clients.iter().map(|c| c.epochs.len()).sum::<usize>() as f64;
                println!("  round {}: mean alignment loss {:.4}", r.round, mean_tal);
            }
        }
    }
    Ok(())
}
