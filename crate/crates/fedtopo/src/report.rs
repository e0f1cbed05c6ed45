//! Experiment orchestration behind the command-line interface: dataset
//! loading, partition construction, screening and training runs, and
//! atomic artifact emission.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{seed_stream, DatasetConfig, ExperimentConfig, ScreenConfig};
use crate::data::{gen_synthetic, load_cifar10, load_idx, Dataset, Split};
use crate::error::{Error, Result};
use crate::federation::{run_federation, client_logs_to_csv, round_logs_to_csv, FederationRun};
use crate::nn::checkpoint::write_checkpoint;
use crate::nn::model::Model;
use crate::partitions::{self, Partition, SchemeParams};
use crate::screening::{screen_model, scores_to_csv, BlockScore, ScreenParams};

pub struct LoadedData {
    pub train: Dataset,
    pub test: Dataset,
}

/// Loads train/test splits per the config, applying stratified subsampling.
/// Synthetic seeds derive from the experiment seed.
pub fn load_datasets(cfg: &ExperimentConfig, seed: u64) -> Result<LoadedData> {
    let (train, test) = match &cfg.dataset {
        DatasetConfig::Synthetic { spec, test_per_class } => {
            let mut train_spec = spec.clone();
            train_spec.seed = seed_stream(seed, "synthetic:train");
            let mut test_spec = spec.clone();
            test_spec.count_per_class = *test_per_class;
            test_spec.seed = seed_stream(seed, "synthetic:test");
            let train = gen_synthetic(&train_spec)?;
            let mut test = gen_synthetic(&test_spec)?;
            test.split = Split::Test;
            (train, test)
        }
        DatasetConfig::Fmnist { train_images, train_labels, test_images, test_labels } => {
            let train = load_idx(train_images, train_labels, Split::Train, None)?;
            let test =
                load_idx(test_images, test_labels, Split::Test, Some(&train.normalization))?;
            (train, test)
        }
        DatasetConfig::Cifar10 { train_batches, test_batches } => {
            let train_paths: Vec<&Path> = train_batches.iter().map(PathBuf::as_path).collect();
            let test_paths: Vec<&Path> = test_batches.iter().map(PathBuf::as_path).collect();
            let train = load_cifar10(&train_paths, Split::Train, None)?;
            let test = load_cifar10(&test_paths, Split::Test, Some(&train.normalization))?;
            (train, test)
        }
    };
    let train = match cfg.train_subsample {
        Some(n) => train.stratified_subsample(n),
        None => train,
    };
    let test = match cfg.test_subsample {
        Some(n) => test.stratified_subsample(n),
        None => test,
    };
    Ok(LoadedData { train, test })
}

/// Builds the configured partition from the partition seed stream.
pub fn build_partition(cfg: &ExperimentConfig, train: &Dataset, seed: u64) -> Result<Partition> {
    let pconf = cfg
        .partition
        .as_ref()
        .ok_or_else(|| Error::Config("config has no partition section".into()))?;
    let pseed = seed_stream(seed, "partition");
    match pconf.scheme {
        SchemeParams::QSkew { alpha } => {
            partitions::q_skew(train.len(), pconf.clients, alpha, pseed)
        }
        SchemeParams::LSkew { alpha } => {
            partitions::l_skew(&train.labels, pconf.clients, alpha, pseed)
        }
        SchemeParams::FixedK { k } => {
            partitions::fixed_k_skew(&train.labels, pconf.clients, k, pseed)
        }
        SchemeParams::NSkew { sigma_bar } => partitions::n_skew(pconf.clients, sigma_bar, pseed),
    }
}

/// Staging directory that moves its files into the target on success and
/// removes everything on failure.
struct Staging {
    dir: PathBuf,
    target: PathBuf,
    committed: bool,
}

impl Staging {
    fn new(target: &Path) -> Result<Self> {
        std::fs::create_dir_all(target)?;
        let dir = target.join(format!(".stage-{}", std::process::id()));
        if dir.exists() {
            std::fs::remove_dir_all(&dir)?;
        }
        std::fs::create_dir(&dir)?;
        Ok(Self { dir, target: target.to_path_buf(), committed: false })
    }

    fn write(&self, name: &str, contents: &[u8]) -> Result<()> {
        std::fs::write(self.dir.join(name), contents)?;
        Ok(())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn commit(mut self) -> Result<()> {
        for entry in std::fs::read_dir(&self.dir)? {
            let entry = entry?;
            std::fs::rename(entry.path(), self.target.join(entry.file_name()))?;
        }
        std::fs::remove_dir(&self.dir)?;
        self.committed = true;
        Ok(())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed && self.dir.exists() {
            let _ = std::fs::remove_dir_all(&self.dir);
        }
    }
}

/// Summary emitted by a training run; deliberately free of method or config
/// echoes so equivalent runs produce identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub version: u32,
    pub rounds: usize,
    pub initial_accuracy: f64,
    pub final_accuracy: f64,
    pub round_accuracy: Vec<f64>,
    pub round_overhead: Vec<f64>,
    /// Per-round mean of the regularizer column over clients and epochs.
    pub round_mean_tal: Vec<f64>,
}

pub fn report_from_run(run: &FederationRun) -> TrainReport {
    let round_mean_tal = run
        .logs
        .iter()
        .map(|r| {
            let (mut sum, mut n) = (0.0, 0usize);
            for c in &r.clients {
                for e in &c.epochs {
                    sum += e.tal;
                    n += 1;
                }
            }
            if n == 0 {
                0.0
            } else {
                sum / n as f64
            }
        })
        .collect();
    TrainReport {
        version: 1,
        rounds: run.logs.len(),
        initial_accuracy: run.initial_accuracy,
        final_accuracy: run.logs.last().map_or(run.initial_accuracy, |r| r.test_accuracy),
        round_accuracy: run.logs.iter().map(|r| r.test_accuracy).collect(),
        round_overhead: run.logs.iter().map(|r| r.overhead).collect(),
        round_mean_tal,
    }
}

/// Full training command: runs federation and writes round logs, checkpoint,
/// and report atomically into the output directory.
pub fn run_train(cfg: &ExperimentConfig, out_dir: &Path, seed: u64) -> Result<TrainReport> {
    let fed = cfg
        .federation
        .as_ref()
        .ok_or_else(|| Error::Config("config has no federation section".into()))?;
    let data = load_datasets(cfg, seed)?;
    let partition = build_partition(cfg, &data.train, seed)?;
    let run = run_federation(fed, &data.train, &data.test, &partition, seed)?;
    let report = report_from_run(&run);

    let staging = Staging::new(out_dir)?;
    staging.write("round_client.csv", client_logs_to_csv(&run.logs).as_bytes())?;
    staging.write("round_global.csv", round_logs_to_csv(&run.logs).as_bytes())?;
    staging.write("report.json", serde_json::to_string_pretty(&report)?.as_bytes())?;
    write_checkpoint(&staging.path("model.ftck"), &run.model.params)?;
    staging.commit()?;
    Ok(report)
}

/// Screening command: samples the training split, screens the configured
/// blocks on a freshly initialized model, writes the score CSV.
pub fn run_screen(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    seed: u64,
) -> Result<(String, Vec<BlockScore>)> {
    let screen: &ScreenConfig = cfg
        .screen
        .as_ref()
        .ok_or_else(|| Error::Config("config has no screen section".into()))?;
    let data = load_datasets(cfg, seed)?;
    let sample = data.train.stratified_subsample(screen.sample_count);
    let spec = match screen.model {
        crate::nn::model::ModelKind::SimpleCnn => {
            crate::nn::model::ModelSpec::simple_cnn(sample.classes)
        }
        crate::nn::model::ModelKind::MiniResNet => {
            crate::nn::model::ModelSpec::mini_resnet(sample.classes)
        }
    };
    if spec.input != sample.image_dims() {
        return Err(Error::Config(format!(
            "model expects {:?} input, dataset provides {:?}",
            spec.input,
            sample.image_dims()
        )));
    }
    let model = Model::init(spec, seed_stream(seed, "init"));
    for b in &screen.blocks {
        if !model.spec.block_names().contains(&b.as_str()) {
            return Err(Error::Config(format!("model has no block named {b}")));
        }
    }
    let blocks = screen.blocks.clone();
    let params = ScreenParams {
        metrics: screen.metrics.clone(),
        n_pairs: screen.n_pairs,
        pca_k: screen.pca_k,
        pi: screen.pi.clone(),
        seed: seed_stream(seed, "pairs"),
    };
    let images = sample.batch(&(0..sample.len()).collect::<Vec<_>>());
    let (winner, scores) = screen_model(&model, &images, &sample.labels, &blocks, &params)?;

    let staging = Staging::new(out_dir)?;
    staging.write("screen.csv", scores_to_csv(&winner, &scores).as_bytes())?;
    staging.commit()?;
    Ok((winner, scores))
}

/// Partition command: builds the partition, writes JSON plus a per-client
/// count/label-histogram summary CSV.
pub fn run_partition(cfg: &ExperimentConfig, out_dir: &Path, seed: u64) -> Result<Partition> {
    let data = load_datasets(cfg, seed)?;
    let partition = build_partition(cfg, &data.train, seed)?;

    let mut summary = String::from("client,count");
    for c in 0..data.train.classes {
        summary.push_str(&format!(",n{c}"));
    }
    summary.push('\n');
    for client in &partition.clients {
        let (count, hist) = match &client.indices {
            Some(indices) => {
                let mut hist = vec![0usize; data.train.classes];
                for &i in indices {
                    hist[data.train.labels[i]] += 1;
                }
                (indices.len(), hist)
            }
            None => {
                // Noise-skew clients share the full index set.
                let mut hist = vec![0usize; data.train.classes];
                for &y in &data.train.labels {
                    hist[y] += 1;
                }
                (data.train.len(), hist)
            }
        };
        summary.push_str(&format!("{},{}", client.id, count));
        for h in hist {
            summary.push_str(&format!(",{h}"));
        }
        summary.push('\n');
    }

    let staging = Staging::new(out_dir)?;
    staging.write("partition.json", partition.to_json()?.as_bytes())?;
    staging.write("partition_summary.csv", summary.as_bytes())?;
    staging.commit()?;
    Ok(partition)
}

/// Report command: reads a previous run's report and renders a summary.
pub fn render_report(out_dir: &Path) -> Result<String> {
    let path = out_dir.join("report.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let report: TrainReport = serde_json::from_str(&text)?;
    let mut out = String::new();
    out.push_str(&format!("rounds:            {}\n", report.rounds));
    out.push_str(&format!("initial accuracy:  {:.4}\n", report.initial_accuracy));
    out.push_str(&format!("final accuracy:    {:.4}\n", report.final_accuracy));
    out.push_str("round  accuracy  mean_tal  delta\n");
    for (i, acc) in report.round_accuracy.iter().enumerate() {
        out.push_str(&format!(
            "{:<6} {:<9.4} {:<9.6} {}\n",
            i + 1,
            acc,
            report.round_mean_tal.get(i).copied().unwrap_or(0.0),
            report.round_overhead.get(i).copied().unwrap_or(0.0),
        ));
    }
    Ok(out)
}

/// Parses a whitespace-free comma-separated field file into row vectors.
pub fn parse_field_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (col, cell) in line.split(',').enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                location: format!("line {}, column {}", lineno + 1, col + 1),
                message: format!("not a number: {cell:?}"),
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            location: "line 1".into(),
            message: "empty field file".into(),
        });
    }
    let width = rows[0].len();
    if let Some(bad) = rows.iter().position(|r| r.len() != width) {
        return Err(Error::Parse {
            location: format!("line {}", bad + 1),
            message: format!("row has {} cells, expected {width}", rows[bad].len()),
        });
    }
    Ok(rows)
}
