//! Non-I.I.D. client partition generators: quantity skew, label skew,
//! fixed-k label skew, and amplitude-noise skew.
//!
//! Q/L/K schemes produce disjoint index lists covering the dataset exactly.
//! N-skew clients share every index and differ by an additive Gaussian noise
//! scale; client 0 is the noiseless control.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchemeParams {
    QSkew { alpha: f64 },
    LSkew { alpha: f64 },
    FixedK { k: usize },
    NSkew { sigma_bar: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientShard {
    pub id: usize,
    /// Index list into the source dataset (Q/L/K schemes).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub indices: Option<Vec<usize>>,
    /// Additive noise scale (N-skew).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub params: SchemeParams,
    pub seed: u64,
    pub clients: Vec<ClientShard>,
}

/// Wire schema for export/import: the scheme name sits beside its
/// parameters rather than inside them.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartitionWire {
    scheme: String,
    params: serde_json::Value,
    seed: u64,
    clients: Vec<ClientShard>,
}

impl Partition {
    pub fn n_clients(&self) -> usize {
        self.clients.len()
    }

    pub fn to_json(&self) -> Result<String> {
        let (scheme, params) = match &self.params {
            SchemeParams::QSkew { alpha } => ("q_skew", serde_json::json!({ "alpha": alpha })),
            SchemeParams::LSkew { alpha } => ("l_skew", serde_json::json!({ "alpha": alpha })),
            SchemeParams::FixedK { k } => ("fixed_k", serde_json::json!({ "k": k })),
            SchemeParams::NSkew { sigma_bar } => {
                ("n_skew", serde_json::json!({ "sigma_bar": sigma_bar }))
            }
        };
        let wire = PartitionWire {
            scheme: scheme.to_string(),
            params,
            seed: self.seed,
            clients: self.clients.clone(),
        };
        Ok(serde_json::to_string_pretty(&wire)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let wire: PartitionWire = serde_json::from_str(s)?;
        let field = |name: &str| -> Result<f64> {
            wire.params
                .get(name)
                .and_then(serde_json::Value::as_f64)
                .ok_or_else(|| Error::Config(format!("partition params missing {name}")))
        };
        let params = match wire.scheme.as_str() {
            "q_skew" => SchemeParams::QSkew { alpha: field("alpha")? },
            "l_skew" => SchemeParams::LSkew { alpha: field("alpha")? },
            "fixed_k" => SchemeParams::FixedK { k: field("k")? as usize },
            "n_skew" => SchemeParams::NSkew { sigma_bar: field("sigma_bar")? },
            other => return Err(Error::Config(format!("unknown partition scheme {other}"))),
        };
        Ok(Partition { params, seed: wire.seed, clients: wire.clients })
    }
}

/// Dirichlet draw as normalized per-coordinate Gamma(alpha, 1) samples.
fn dirichlet(rng: &mut ChaCha8Rng, n: usize, alpha: f64) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("alpha > 0");
    let mut draws: Vec<f64> = (0..n).map(|_| gamma.sample(rng)).collect();
    let sum: f64 = draws.iter().sum();
    if sum <= 0.0 {
        // All-zero draws can occur for tiny alpha at f64 resolution.
        return vec![1.0 / n as f64; n];
    }
    for d in &mut draws {
        *d /= sum;
    }
    draws
}

/// Splits [0, count) into contiguous ranges by cumulative proportions,
/// flooring each boundary; the last client absorbs the remainder.
fn contiguous_split(proportions: &[f64], count: usize) -> Vec<(usize, usize)> {
    let n = proportions.len();
    let mut bounds = Vec::with_capacity(n + 1);
    bounds.push(0usize);
    let mut cum = 0.0;
    for (j, p) in proportions.iter().enumerate() {
        cum += p;
        let b = if j + 1 == n { count } else { (cum * count as f64).floor() as usize };
        bounds.push(b.clamp(bounds[j], count));
    }
    (0..n).map(|j| (bounds[j], bounds[j + 1])).collect()
}

/// Quantity skew: Dirichlet proportions over contiguous index ranges.
pub fn q_skew(total: usize, n_clients: usize, alpha: f64, seed: u64) -> Result<Partition> {
    if n_clients == 0 || total < n_clients {
        return Err(Error::InvalidArgument(format!(
            "need at least one sample per client: N={total}, n={n_clients}"
        )));
    }
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::InvalidArgument("alpha must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = dirichlet(&mut rng, n_clients, alpha);
    // Normalization is a no-op safeguard; the draw already sums to one.
    let sum: f64 = p.iter().sum();
    let p: Vec<f64> = p.iter().map(|x| x / sum).collect();
    let clients = contiguous_split(&p, total)
        .into_iter()
        .enumerate()
        .map(|(id, (lo, hi))| ClientShard { id, indices: Some((lo..hi).collect()), sigma: None })
        .collect();
    Ok(Partition { params: SchemeParams::QSkew { alpha }, seed, clients })
}

/// Label skew: per-class Dirichlet proportions over contiguous ranges of
/// each class's index list.
pub fn l_skew(labels: &[usize], n_clients: usize, alpha: f64, seed: u64) -> Result<Partition> {
    if n_clients == 0 {
        return Err(Error::InvalidArgument("need at least one client".into()));
    }
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::InvalidArgument("alpha must be positive".into()));
    }
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    if n_classes == 0 {
        return Err(Error::InvalidArgument("empty label set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_client: Vec<Vec<usize>> = vec![Vec::new(); n_clients];
    for class in 0..n_classes {
        let class_indices: Vec<usize> =
            labels.iter().enumerate().filter(|(_, &y)| y == class).map(|(i, _)| i).collect();
        let p = dirichlet(&mut rng, n_clients, alpha);
        for (j, (lo, hi)) in contiguous_split(&p, class_indices.len()).into_iter().enumerate() {
            per_client[j].extend(&class_indices[lo..hi]);
        }
    }
    let clients = per_client
        .into_iter()
        .enumerate()
        .map(|(id, mut indices)| {
            indices.sort_unstable();
            ClientShard { id, indices: Some(indices), sigma: None }
        })
        .collect();
    Ok(Partition { params: SchemeParams::LSkew { alpha }, seed, clients })
}

/// Fixed-k label skew: every client holds exactly k distinct labels and all
/// labels are covered. Label slots fill round-robin over a seeded label
/// permutation; each class's indices split into near-equal contiguous shards
/// handed to its owners in client order.
pub fn fixed_k_skew(labels: &[usize], n_clients: usize, k: usize, seed: u64) -> Result<Partition> {
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    if n_classes == 0 {
        return Err(Error::InvalidArgument("empty label set".into()));
    }
    if k == 0 || k > n_classes {
        return Err(Error::InvalidArgument(format!("k={k} outside 1..={n_classes}")));
    }
    if n_clients * k < n_classes {
        return Err(Error::InvalidArgument(format!(
            "coverage impossible: {n_clients} clients x {k} labels < {n_classes} classes"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n_classes).collect();
    perm.shuffle(&mut rng);
    // Client j takes k consecutive labels from the cycled permutation;
    // consecutive windows of length k <= K are always distinct.
    let mut owned: Vec<Vec<usize>> = vec![Vec::new(); n_clients];
    let mut cursor = 0usize;
    for client_labels in owned.iter_mut() {
        for _ in 0..k {
            client_labels.push(perm[cursor % n_classes]);
            cursor += 1;
        }
    }
    let mut per_client: Vec<Vec<usize>> = vec![Vec::new(); n_clients];
    for class in 0..n_classes {
        let owners: Vec<usize> =
            (0..n_clients).filter(|&j| owned[j].contains(&class)).collect();
        let class_indices: Vec<usize> =
            labels.iter().enumerate().filter(|(_, &y)| y == class).map(|(i, _)| i).collect();
        let shares = vec![1.0 / owners.len() as f64; owners.len()];
        for (slot, (lo, hi)) in contiguous_split(&shares, class_indices.len()).into_iter().enumerate()
        {
            per_client[owners[slot]].extend(&class_indices[lo..hi]);
        }
    }
    let clients = per_client
        .into_iter()
        .enumerate()
        .map(|(id, mut indices)| {
            indices.sort_unstable();
            ClientShard { id, indices: Some(indices), sigma: None }
        })
        .collect();
    Ok(Partition { params: SchemeParams::FixedK { k }, seed, clients })
}

/// Amplitude-noise skew: client j (0-based) gets noise scale
/// j / (n - 1) * sigma_bar; client 0 stays noiseless.
pub fn n_skew(n_clients: usize, sigma_bar: f64, seed: u64) -> Result<Partition> {
    if n_clients < 2 {
        return Err(Error::InvalidArgument("noise skew needs at least 2 clients".into()));
    }
    if sigma_bar < 0.0 {
        return Err(Error::InvalidArgument("sigma_bar must be non-negative".into()));
    }
    let clients = (0..n_clients)
        .map(|id| ClientShard {
            id,
            indices: None,
            sigma: Some(id as f64 / (n_clients - 1) as f64 * sigma_bar),
        })
        .collect();
    Ok(Partition { params: SchemeParams::NSkew { sigma_bar }, seed, clients })
}
