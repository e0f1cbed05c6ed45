use fedtopo::config::seed_stream;
use fedtopo::data::{gen_synthetic, Split, SyntheticSpec};
use fedtopo::federation::{run_federation, AlphaConfig, AlphaSchedule, FederationConfig, Method};
use fedtopo::partitions::l_skew;

fn main() {
    for (method, block) in
        [(Method::FedAvg, "conv1"), (Method::FedTopo, "conv1"), (Method::FedTopo, "conv2")]
    {
        for seed in [11u64, 22, 33] {
            let train = gen_synthetic(&SyntheticSpec {
                count_per_class: 1000,
                noise: 0.25,
                seed: seed_stream(seed, "synthetic:train"),
                ..Default::default()
            })
            .unwrap()
            .stratified_subsample(2000);
            let mut test = gen_synthetic(&SyntheticSpec {
                count_per_class: 500,
                noise: 0.25,
                seed: seed_stream(seed, "synthetic:test"),
                ..Default::default()
            })
            .unwrap()
            .stratified_subsample(1000);
            test.split = Split::Test;
            let cfg = FederationConfig {
                clients: 5,
                rounds: 5,
                local_epochs: 5,
                batch_size: 32,
                method,
                tapped_block: block.into(),
                alpha: AlphaConfig {
                    schedule: AlphaSchedule::Warmup,
                    alpha_max: 0.2,
                    alpha_min_global: 0.05,
                    ..Default::default()
                },
                ..Default::default()
            };
            let partition =
                l_skew(&train.labels, 5, 0.1, seed_stream(seed, "partition")).unwrap();
            let run = run_federation(&cfg, &train, &test, &partition, seed).unwrap();
            let tal = |r: usize| -> f64 {
                let v: Vec<f64> = run.logs[r]
                    .clients
                    .iter()
                    .flat_map(|c| c.epochs.iter().map(|e| e.tal))
                    .collect();
                v.iter().sum::<f64>() / v.len() as f64
            };
            println!(
                "{method:?} tap {block} seed {seed}: acc {:.4} tal r1 {:.3} r5 {:.3}",
                run.logs.last().unwrap().test_accuracy,
                tal(0),
                tal(4)
            );
        }
    }
}
