//! Federated training: round loop, local training with the topological
//! alignment term, server aggregation, adaptive alpha scheduling, and the
//! FedAvg/FedProx baselines.

use std::collections::VecDeque;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::seed_stream;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::graph::{topo_embedding_batch, Graph};
use crate::nn::model::{Model, ModelKind, ModelSpec, NamedParam};
use crate::nn::optim::OptimizerState;
use crate::nn::tensor::Tensor;
use crate::partitions::Partition;
use crate::pimage::PiConfig;

const RANGE_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "fedavg")]
    FedAvg,
    #[serde(rename = "fedprox")]
    FedProx,
    #[serde(rename = "fedtopo")]
    FedTopo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaSchedule {
    Warmup,
    LinearTopo,
    Piecewise,
    SmoothTopo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlphaConfig {
    pub schedule: AlphaSchedule,
    pub alpha_max: f64,
    /// Global lower bound; the per-client bound scales it by the normalized
    /// entropy of the client's label histogram (balanced clients keep the
    /// full bound, single-label clients drop to zero).
    pub alpha_min_global: f64,
    /// Explicit per-client lower bounds, overriding the entropy rule.
    pub alpha_min_per_client: Option<Vec<f64>>,
    pub warmup_epochs: usize,
    pub round_decay: f64,
    pub beta: f64,
    /// Ring-buffer window over recent per-batch alignment losses.
    pub window: usize,
    pub ewma_factor: f64,
    /// Loss normalization range (l_min, l_max).
    pub loss_range: (f64, f64),
}

impl Default for AlphaConfig {
    fn default() -> Self {
        Self {
            schedule: AlphaSchedule::SmoothTopo,
            alpha_max: 0.7,
            alpha_min_global: 0.1,
            alpha_min_per_client: None,
            warmup_epochs: 5,
            round_decay: 0.05,
            beta: 1.0,
            window: 3,
            ewma_factor: 0.3,
            loss_range: (0.1, 0.85),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FederationConfig {
    pub clients: usize,
    pub rounds: usize,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub lr_step_size: usize,
    pub lr_gamma: f64,
    pub method: Method,
    pub fedprox_mu: f64,
    pub model: ModelKind,
    /// Block feeding the topological embedding (FedTopo only).
    pub tapped_block: String,
    pub pi: PiConfig,
    pub alpha: AlphaConfig,
    /// Price one embedding upload per round in the logs (the protocol never
    /// needs it; alignment is computed locally).
    pub upload_te: bool,
    /// When set, the alignment expectation runs over a fixed per-round
    /// sample of this size instead of each minibatch.
    pub te_sample_count: Option<usize>,
    /// Ablation: report the alignment loss but keep it out of the gradient.
    pub detach_topology: bool,
    pub eval_batch_size: usize,
}

impl Default for FederationConfig {
    fn default() -> Self {
        Self {
            clients: 5,
            rounds: 5,
            local_epochs: 5,
            batch_size: 32,
            learning_rate: 0.01,
            momentum: 0.9,
            lr_step_size: 30,
            lr_gamma: 0.01,
            method: Method::FedTopo,
            fedprox_mu: 0.01,
            model: ModelKind::SimpleCnn,
            tapped_block: "conv1".into(),
            pi: PiConfig::default(),
            alpha: AlphaConfig::default(),
            upload_te: false,
            te_sample_count: None,
            detach_topology: false,
            eval_batch_size: 64,
        }
    }
}

impl FederationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clients == 0 || self.local_epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("clients, epochs and batch size must be positive".into()));
        }
        if self.alpha.warmup_epochs == 0 {
            return Err(Error::Config("warmup_epochs must be at least 1".into()));
        }
        if self.alpha.round_decay < 0.0 {
            return Err(Error::Config("round_decay must be non-negative".into()));
        }
        if !(self.alpha.beta > 0.0 && self.alpha.beta <= 1.0) {
            return Err(Error::Config("beta must lie in (0, 1]".into()));
        }
        if self.alpha.loss_range.1 <= self.alpha.loss_range.0 {
            return Err(Error::Config("loss range must satisfy l_max > l_min".into()));
        }
        if self.alpha.alpha_min_global > self.alpha.alpha_max {
            return Err(Error::Config("alpha_min_global must not exceed alpha_max".into()));
        }
        if self.alpha.window == 0 {
            return Err(Error::Config("window must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha.ewma_factor) {
            return Err(Error::Config("ewma_factor must lie in [0, 1]".into()));
        }
        self.pi.validate()?;
        Ok(())
    }

    pub fn model_spec(&self, classes: usize) -> ModelSpec {
        match self.model {
            ModelKind::SimpleCnn => ModelSpec::simple_cnn(classes),
            ModelKind::MiniResNet => ModelSpec::mini_resnet(classes),
        }
    }
}

/// Warm-up and round-decay factor: min(1, (e+1)/E_warm) * exp(-decay * r),
/// with 0-based round and epoch indices.
pub fn lambda_factor(round: usize, epoch: usize, warmup_epochs: usize, decay: f64) -> f64 {
    (((epoch + 1) as f64) / warmup_epochs as f64).min(1.0) * (-decay * round as f64).exp()
}

/// Recent alignment-loss statistics feeding the adaptive schedules.
#[derive(Debug, Clone)]
pub struct SchedulerState {
    window: VecDeque<f64>,
    capacity: usize,
    ewma: Option<f64>,
    ewma_factor: f64,
}

impl SchedulerState {
    pub fn new(capacity: usize, ewma_factor: f64) -> Self {
        Self { window: VecDeque::with_capacity(capacity), capacity, ewma: None, ewma_factor }
    }

    pub fn record(&mut self, loss: f64) {
        if self.window.len() == self.capacity {
            self.window.pop_front();
        }
        self.window.push_back(loss);
        self.ewma = Some(match self.ewma {
            None => loss,
            Some(prev) => (1.0 - self.ewma_factor) * prev + self.ewma_factor * loss,
        });
    }

    pub fn windowed_mean(&self) -> Option<f64> {
        if self.window.is_empty() {
            None
        } else {
            Some(self.window.iter().sum::<f64>() / self.window.len() as f64)
        }
    }

    pub fn smoothed(&self) -> Option<f64> {
        self.ewma
    }
}

fn blend(level: Option<f64>, alpha_max: f64, alpha_min: f64, beta: f64, range: (f64, f64)) -> f64 {
    // Empty history means maximal regularization at the start.
    let eta = match level {
        None => 1.0,
        Some(l) => (((l - range.0) / (range.1 - range.0 + RANGE_EPS)).clamp(0.0, 1.0)).powf(beta),
    };
    alpha_min + (alpha_max - alpha_min) * eta
}

/// Strategy-specific base weight; bounded by [alpha_min, alpha_max] for the
/// feedback-driven strategies.
pub fn alpha_base(
    schedule: AlphaSchedule,
    state: &SchedulerState,
    alpha_max: f64,
    alpha_min: f64,
    beta: f64,
    range: (f64, f64),
) -> f64 {
    match schedule {
        AlphaSchedule::Warmup => alpha_max,
        AlphaSchedule::LinearTopo => blend(state.windowed_mean(), alpha_max, alpha_min, beta, range),
        AlphaSchedule::SmoothTopo => blend(state.smoothed(), alpha_max, alpha_min, beta, range),
        AlphaSchedule::Piecewise => match state.windowed_mean() {
            None => alpha_max,
            Some(l) if l <= range.0 => alpha_min,
            Some(l) if l >= range.1 => alpha_max,
            Some(l) => {
                alpha_min + (l - range.0) / (range.1 - range.0 + RANGE_EPS) * (alpha_max - alpha_min)
            }
        },
    }
}

/// Client lower bound from label imbalance: the global bound scaled by the
/// normalized entropy of the client's label histogram.
pub fn client_alpha_min(labels: &[usize], classes: usize, alpha_min_global: f64) -> f64 {
    if labels.is_empty() || classes < 2 {
        return alpha_min_global;
    }
    let mut hist = vec![0usize; classes];
    for &y in labels {
        hist[y] += 1;
    }
    let total = labels.len() as f64;
    let entropy: f64 = hist
        .iter()
        .filter(|&&h| h > 0)
        .map(|&h| {
            let p = h as f64 / total;
            -p * p.ln()
        })
        .sum();
    alpha_min_global * entropy / (classes as f64).ln()
}

/// Communication overhead of uploading one length-m embedding relative to a
/// full model upload.
pub fn overhead_ratio(m: usize, param_count: usize) -> f64 {
    assert!(param_count >= 1, "parameter count must be positive");
    m as f64 / param_count as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub ce: f64,
    /// Regularizer value: alignment loss for FedTopo, proximal penalty for
    /// FedProx, zero for FedAvg.
    pub tal: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientRoundLog {
    pub client: usize,
    pub epochs: Vec<EpochLog>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    /// 1-based round number as written to the logs.
    pub round: usize,
    pub clients: Vec<ClientRoundLog>,
    pub test_accuracy: f64,
    /// Not serialized into the deterministic artifacts.
    #[serde(skip)]
    pub wall_seconds: f64,
    /// Upload overhead priced this round (zero unless embeddings are sent).
    pub overhead: f64,
}

/// Outcome of a federated run.
pub struct FederationRun {
    pub model: Model,
    pub initial_accuracy: f64,
    pub logs: Vec<RoundLog>,
}

/// Sample-count-weighted parameter mean, reduced in ascending client order.
pub fn aggregate(client_params: &[Vec<NamedParam>], counts: &[usize]) -> Result<Vec<NamedParam>> {
    if client_params.is_empty() {
        return Err(Error::InvalidArgument("no client models to aggregate".into()));
    }
    if client_params.len() != counts.len() {
        return Err(Error::InvalidArgument("one sample count per client required".into()));
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::InvalidArgument("aggregation weights sum to zero".into()));
    }
    let first = &client_params[0];
    let mut out: Vec<NamedParam> = first
        .iter()
        .map(|p| NamedParam { name: p.name.clone(), value: Tensor::zeros(&p.value.shape) })
        .collect();
    for (params, &count) in client_params.iter().zip(counts) {
        if params.len() != first.len() {
            return Err(Error::Shape("client models disagree on parameter count".into()));
        }
        let weight = count as f64 / total as f64;
        for (acc, p) in out.iter_mut().zip(params) {
            if acc.value.shape != p.value.shape {
                return Err(Error::Shape(format!("shape mismatch for {}", p.name)));
            }
            acc.value.add_scaled(&p.value, weight);
        }
    }
    Ok(out)
}

/// Global test accuracy under the current weights.
pub fn evaluate(model: &Model, dataset: &Dataset, batch_size: usize) -> Result<f64> {
    if dataset.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    let indices: Vec<usize> = (0..dataset.len()).collect();
    for chunk in indices.chunks(batch_size.max(1)) {
        let images = dataset.batch(chunk);
        let preds = model.predict(&images)?;
        correct += preds
            .iter()
            .zip(dataset.batch_labels(chunk))
            .filter(|(p, y)| **p == *y)
            .count();
    }
    Ok(correct as f64 / dataset.len() as f64)
}

fn te_rows_to_tensor(rows: Vec<Vec<f64>>) -> Tensor {
    let b = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    Tensor { shape: vec![b, m], data: rows.concat() }
}

/// Mean squared embedding distance computed outside the record (detached
/// ablation and logging).
fn detached_alignment(local: &Tensor, reference: &Tensor) -> f64 {
    let batch = local.shape[0] as f64;
    local
        .data
        .iter()
        .zip(&reference.data)
        .map(|(a, r)| (a - r) * (a - r))
        .sum::<f64>()
        / batch
}

struct LocalOutcome {
    params: Vec<NamedParam>,
    epochs: Vec<EpochLog>,
    scheduler: SchedulerState,
}

#[allow(clippy::too_many_arguments)]
fn local_train(
    global: &Model,
    shard: &Dataset,
    cfg: &FederationConfig,
    round: usize,
    client: usize,
    mut scheduler: SchedulerState,
    alpha_min: f64,
    seed: u64,
) -> Result<LocalOutcome> {
    let mut model = global.clone();
    let mut opt = OptimizerState::new(
        cfg.learning_rate,
        cfg.momentum,
        cfg.lr_step_size,
        cfg.lr_gamma,
        &model.params,
    );
    // The step schedule counts epochs across rounds; momentum restarts with
    // each broadcast.
    opt.epoch = round * cfg.local_epochs;
    opt.lr = opt.lr_for_epoch(opt.epoch);

    // Fixed per-round alignment sample (optional mode); references against
    // the frozen broadcast weights are computed once.
    let te_set: Option<(Tensor, Tensor)> = match (cfg.method, cfg.te_sample_count) {
        (Method::FedTopo, Some(count)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed_stream(
                seed,
                &format!("te-sample:{client}:{round}"),
            ));
            let mut idx: Vec<usize> = (0..shard.len()).collect();
            idx.shuffle(&mut rng);
            idx.truncate(count.max(1).min(shard.len()));
            let images = shard.batch(&idx);
            let act = global.block_activation(&images, &cfg.tapped_block)?;
            let reference = te_rows_to_tensor(topo_embedding_batch(&act, &cfg.pi)?);
            Some((images, reference))
        }
        _ => None,
    };

    let mut epochs = Vec::with_capacity(cfg.local_epochs);
    for epoch in 0..cfg.local_epochs {
        let alpha = match cfg.method {
            Method::FedTopo => {
                lambda_factor(round, epoch, cfg.alpha.warmup_epochs, cfg.alpha.round_decay)
                    * alpha_base(
                        cfg.alpha.schedule,
                        &scheduler,
                        cfg.alpha.alpha_max,
                        alpha_min,
                        cfg.alpha.beta,
                        cfg.alpha.loss_range,
                    )
            }
            _ => 0.0,
        };
        let mut order: Vec<usize> = (0..shard.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed_stream(
            seed,
            &format!("batch:{client}:{round}:{epoch}"),
        ));
        order.shuffle(&mut rng);

        let mut ce_sum = 0.0;
        let mut tal_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let images = shard.batch(chunk);
            let labels = shard.batch_labels(chunk);
            let mut graph = Graph::new();
            let pass = model.forward(&mut graph, &images)?;
            let ce = graph.softmax_cross_entropy(pass.logits, &labels)?;
            let ce_value = graph.value(ce).scalar();

            let mut tal_value = 0.0;
            let loss = match cfg.method {
                Method::FedTopo if alpha != 0.0 => {
                    let tap = *pass.taps.get(&cfg.tapped_block).ok_or_else(|| {
                        Error::Config(format!("model exposes no block named {}", cfg.tapped_block))
                    })?;
                    if cfg.detach_topology {
                        let local_act = graph.value(tap).clone();
                        let local_te =
                            te_rows_to_tensor(topo_embedding_batch(&local_act, &cfg.pi)?);
                        let ref_act = global.block_activation(&images, &cfg.tapped_block)?;
                        let reference =
                            te_rows_to_tensor(topo_embedding_batch(&ref_act, &cfg.pi)?);
                        tal_value = detached_alignment(&local_te, &reference);
                        scheduler.record(tal_value);
                        ce
                    } else {
                        let (te_node, reference) = match &te_set {
                            None => {
                                let ref_act =
                                    global.block_activation(&images, &cfg.tapped_block)?;
                                let reference =
                                    te_rows_to_tensor(topo_embedding_batch(&ref_act, &cfg.pi)?);
                                (graph.topo_embed(tap, &cfg.pi)?, reference)
                            }
                            Some((te_images, reference)) => {
                                // Re-forward the fixed sample set through the
                                // current weights, sharing parameter leaves.
                                let te_pass = model.forward_on(
                                    &mut graph,
                                    &pass.param_nodes,
                                    te_images,
                                    Some(&cfg.tapped_block),
                                )?;
                                let te_tap = te_pass.taps[&cfg.tapped_block];
                                (graph.topo_embed(te_tap, &cfg.pi)?, reference.clone())
                            }
                        };
                        let tal = graph.squared_dist_to_const(te_node, reference)?;
                        tal_value = graph.value(tal).scalar();
                        scheduler.record(tal_value);
                        graph.scale_add(ce, tal, alpha)?
                    }
                }
                Method::FedProx => {
                    // Quadratic penalty handled analytically after backward.
                    let mut penalty = 0.0;
                    for (p, p0) in model.params.iter().zip(&global.params) {
                        penalty += p
                            .value
                            .data
                            .iter()
                            .zip(&p0.value.data)
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>();
                    }
                    tal_value = 0.5 * cfg.fedprox_mu * penalty;
                    ce
                }
                _ => ce,
            };

            let grads_all = graph.backward(loss)?;
            let mut grads = model.param_grads(&grads_all, &pass);
            if cfg.method == Method::FedProx {
                for (g, (p, p0)) in grads.iter_mut().zip(model.params.iter().zip(&global.params)) {
                    for i in 0..g.data.len() {
                        g.data[i] += cfg.fedprox_mu * (p.value.data[i] - p0.value.data[i]);
                    }
                }
            }
            opt.sgd_step(&mut model.params, &grads)?;
            ce_sum += ce_value;
            tal_sum += tal_value;
            batches += 1;
        }
        opt.scheduler_step();
        let denom = batches.max(1) as f64;
        epochs.push(EpochLog { epoch, ce: ce_sum / denom, tal: tal_sum / denom, alpha });
    }
    Ok(LocalOutcome { params: model.params, epochs, scheduler })
}

/// Runs the full protocol: broadcast, parallel local training, weighted
/// aggregation, evaluation. Deterministic given the seed.
pub fn run_federation(
    cfg: &FederationConfig,
    train: &Dataset,
    test: &Dataset,
    partition: &Partition,
    seed: u64,
) -> Result<FederationRun> {
    cfg.validate()?;
    if partition.n_clients() != cfg.clients {
        return Err(Error::Config(format!(
            "partition has {} clients, config expects {}",
            partition.n_clients(),
            cfg.clients
        )));
    }
    let spec = cfg.model_spec(train.classes);
    if spec.input != train.image_dims() {
        return Err(Error::Config(format!(
            "model expects {:?} input, dataset provides {:?}",
            spec.input,
            train.image_dims()
        )));
    }
    let mut global = Model::init(spec, seed_stream(seed, "init"));
    let param_count = global.param_count();
    let initial_accuracy = evaluate(&global, test, cfg.eval_batch_size)?;

    let mut shards = Vec::with_capacity(cfg.clients);
    for client in &partition.clients {
        let shard = train.client_shard(partition, client)?;
        if shard.is_empty() {
            eprintln!("warning: client {} has an empty shard and will be skipped", client.id);
        }
        shards.push(shard);
    }
    let mut schedulers: Vec<SchedulerState> = (0..cfg.clients)
        .map(|_| SchedulerState::new(cfg.alpha.window, cfg.alpha.ewma_factor))
        .collect();
    let alpha_mins: Vec<f64> = match &cfg.alpha.alpha_min_per_client {
        Some(explicit) => {
            if explicit.len() != cfg.clients {
                return Err(Error::Config("alpha_min_per_client length mismatch".into()));
            }
            explicit.clone()
        }
        None => shards
            .iter()
            .map(|s| client_alpha_min(&s.labels, train.classes, cfg.alpha.alpha_min_global))
            .collect(),
    };

    let mut logs = Vec::with_capacity(cfg.rounds);
    for round in 0..cfg.rounds {
        let start = std::time::Instant::now();
        let participating: Vec<usize> =
            (0..cfg.clients).filter(|&i| !shards[i].is_empty()).collect();
        if participating.is_empty() {
            return Err(Error::InvalidArgument("no client has data".into()));
        }
        let outcomes: Vec<(usize, LocalOutcome)> = participating
            .par_iter()
            .map(|&i| {
                local_train(
                    &global,
                    &shards[i],
                    cfg,
                    round,
                    i,
                    schedulers[i].clone(),
                    alpha_mins[i],
                    seed,
                )
                .map(|o| (i, o))
            })
            .collect::<Result<Vec<_>>>()?;

        let mut client_logs = Vec::with_capacity(outcomes.len());
        let mut weight_sets = Vec::with_capacity(outcomes.len());
        let mut counts = Vec::with_capacity(outcomes.len());
        for (i, outcome) in outcomes {
            schedulers[i] = outcome.scheduler;
            client_logs.push(ClientRoundLog { client: i, epochs: outcome.epochs });
            weight_sets.push(outcome.params);
            counts.push(shards[i].len());
        }
        global.params = aggregate(&weight_sets, &counts)?;
        let test_accuracy = evaluate(&global, test, cfg.eval_batch_size)?;
        let overhead = if cfg.upload_te { overhead_ratio(cfg.pi.len(), param_count) } else { 0.0 };
        logs.push(RoundLog {
            round: round + 1,
            clients: client_logs,
            test_accuracy,
            wall_seconds: start.elapsed().as_secs_f64(),
            overhead,
        });
    }
    Ok(FederationRun { model: global, initial_accuracy, logs })
}

/// `round,client,epoch,ce,tal,alpha` rows over all rounds.
pub fn client_logs_to_csv(logs: &[RoundLog]) -> String {
    let mut out = String::from("round,client,epoch,ce,tal,alpha\n");
    for round in logs {
        for client in &round.clients {
            for e in &client.epochs {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    round.round, client.client, e.epoch, e.ce, e.tal, e.alpha
                ));
            }
        }
    }
    out
}

/// `round,test_acc,delta` rows over all rounds.
pub fn round_logs_to_csv(logs: &[RoundLog]) -> String {
    let mut out = String::from("round,test_acc,delta\n");
    for round in logs {
        out.push_str(&format!("{},{},{}\n", round.round, round.test_accuracy, round.overhead));
    }
    out
}
