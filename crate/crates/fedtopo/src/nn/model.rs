//! Network definitions with named blocks exposed for screening and
//! topological embeddings.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::graph::{Graph, NodeId};
use crate::nn::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// conv 5x5 -> 6, pool, conv 5x5 -> 16, pool, fc 256 -> 120 -> 84 -> K.
    SimpleCnn,
    /// 3x3 stem (16) plus one basic residual block per stage (16/32/64),
    /// stages 2-3 downsample with a 1x1 projection.
    MiniResNet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Input channels, height, width.
    pub input: (usize, usize, usize),
    pub classes: usize,
}

impl ModelSpec {
    pub fn simple_cnn(classes: usize) -> Self {
        Self { kind: ModelKind::SimpleCnn, input: (1, 28, 28), classes }
    }

    pub fn mini_resnet(classes: usize) -> Self {
        Self { kind: ModelKind::MiniResNet, input: (3, 32, 32), classes }
    }

    /// Named blocks whose activations can be tapped.
    pub fn block_names(&self) -> Vec<&'static str> {
        match self.kind {
            ModelKind::SimpleCnn => vec!["conv1", "conv2"],
            ModelKind::MiniResNet => vec!["conv1", "stage1", "stage2", "stage3"],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedParam {
    pub name: String,
    pub value: Tensor,
}

/// One forward pass: logits, tapped block activations, and the record node
/// of every parameter (in `Model::params` order).
pub struct ForwardPass {
    pub logits: NodeId,
    pub taps: BTreeMap<String, NodeId>,
    pub param_nodes: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    pub params: Vec<NamedParam>,
}

fn kaiming_uniform(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize) -> Tensor {
    let bound = (6.0 / fan_in as f64).sqrt();
    let data = (0..shape.iter().product::<usize>())
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    Tensor::from_vec(shape, data).unwrap()
}

impl Model {
    /// Seeded initialization: Kaiming-uniform weights, zero biases.
    pub fn init(spec: ModelSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        let conv = |rng: &mut ChaCha8Rng, params: &mut Vec<NamedParam>, name: &str, cout: usize, cin: usize, k: usize| {
            let fan_in = cin * k * k;
            params.push(NamedParam {
                name: format!("{name}.weight"),
                value: kaiming_uniform(rng, &[cout, cin, k, k], fan_in),
            });
            params.push(NamedParam { name: format!("{name}.bias"), value: Tensor::zeros(&[cout]) });
        };
        let fc = |rng: &mut ChaCha8Rng, params: &mut Vec<NamedParam>, name: &str, fout: usize, fin: usize| {
            params.push(NamedParam {
                name: format!("{name}.weight"),
                value: kaiming_uniform(rng, &[fout, fin], fin),
            });
            params.push(NamedParam { name: format!("{name}.bias"), value: Tensor::zeros(&[fout]) });
        };
        match spec.kind {
            ModelKind::SimpleCnn => {
                let classes = spec.classes;
                conv(&mut rng, &mut params, "conv1", 6, spec.input.0, 5);
                conv(&mut rng, &mut params, "conv2", 16, 6, 5);
                fc(&mut rng, &mut params, "fc1", 120, 256);
                fc(&mut rng, &mut params, "fc2", 84, 120);
                fc(&mut rng, &mut params, "fc3", classes, 84);
            }
            ModelKind::MiniResNet => {
                let classes = spec.classes;
                conv(&mut rng, &mut params, "stem", 16, spec.input.0, 3);
                conv(&mut rng, &mut params, "stage1.conv1", 16, 16, 3);
                conv(&mut rng, &mut params, "stage1.conv2", 16, 16, 3);
                conv(&mut rng, &mut params, "stage2.conv1", 32, 16, 3);
                conv(&mut rng, &mut params, "stage2.conv2", 32, 32, 3);
                conv(&mut rng, &mut params, "stage2.proj", 32, 16, 1);
                conv(&mut rng, &mut params, "stage3.conv1", 64, 32, 3);
                conv(&mut rng, &mut params, "stage3.conv2", 64, 64, 3);
                conv(&mut rng, &mut params, "stage3.proj", 64, 32, 1);
                fc(&mut rng, &mut params, "fc", classes, 64);
            }
        }
        Self { spec, params }
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    fn param_index(&self, name: &str) -> usize {
        self.params
            .iter()
            .position(|p| p.name == name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    /// Full forward; tapped block activations are recorded pre-activation
    /// for conv blocks and post-activation for residual stage outputs.
    pub fn forward(&self, graph: &mut Graph, images: &Tensor) -> Result<ForwardPass> {
        self.forward_until(graph, images, None)
    }

    /// Forward that can stop once the named block has been tapped; used for
    /// frozen reference embeddings where the head is never needed. `logits`
    /// is unusable (set to the tap) when `stop_after` fires.
    pub fn forward_until(
        &self,
        graph: &mut Graph,
        images: &Tensor,
        stop_after: Option<&str>,
    ) -> Result<ForwardPass> {
        let param_nodes: Vec<NodeId> =
            self.params.iter().map(|p| graph.leaf(p.value.clone())).collect();
        self.forward_on(graph, &param_nodes, images, stop_after)
    }

    /// Forward reusing existing parameter leaves, so several passes in one
    /// record share gradients.
    pub fn forward_on(
        &self,
        graph: &mut Graph,
        existing_params: &[NodeId],
        images: &Tensor,
        stop_after: Option<&str>,
    ) -> Result<ForwardPass> {
        let (c, h, w) = self.spec.input;
        let shape = &images.shape;
        if shape.len() != 4 || shape[1] != c || shape[2] != h || shape[3] != w {
            return Err(Error::Shape(format!(
                "expected batch of {c}x{h}x{w} images, got {shape:?}"
            )));
        }
        if existing_params.len() != self.params.len() {
            return Err(Error::Shape("parameter node count mismatch".into()));
        }
        let batch = shape[0];
        let param_nodes = existing_params.to_vec();
        let node_of = |name: &str| param_nodes[self.param_index(name)];
        let mut taps = BTreeMap::new();
        let x = graph.leaf(images.clone());

        macro_rules! tap_and_maybe_stop {
            ($name:expr, $node:expr) => {
                taps.insert($name.to_string(), $node);
                if stop_after == Some($name) {
                    return Ok(ForwardPass { logits: $node, taps, param_nodes });
                }
            };
        }

        let logits = match self.spec.kind {
            ModelKind::SimpleCnn => {
                let c1 = graph.conv2d(x, node_of("conv1.weight"), node_of("conv1.bias"), 1, 0)?;
                tap_and_maybe_stop!("conv1", c1);
                let r1 = graph.relu(c1);
                let p1 = graph.maxpool2(r1)?;
                let c2 = graph.conv2d(p1, node_of("conv2.weight"), node_of("conv2.bias"), 1, 0)?;
                tap_and_maybe_stop!("conv2", c2);
                let r2 = graph.relu(c2);
                let p2 = graph.maxpool2(r2)?;
                let flat = graph.reshape(p2, &[batch, 256])?;
                let f1 = graph.linear(flat, node_of("fc1.weight"), node_of("fc1.bias"))?;
                let f1 = graph.relu(f1);
                let f2 = graph.linear(f1, node_of("fc2.weight"), node_of("fc2.bias"))?;
                let f2 = graph.relu(f2);
                graph.linear(f2, node_of("fc3.weight"), node_of("fc3.bias"))?
            }
            ModelKind::MiniResNet => {
                let stem = graph.conv2d(x, node_of("stem.weight"), node_of("stem.bias"), 1, 1)?;
                tap_and_maybe_stop!("conv1", stem);
                let mut cur = graph.relu(stem);
                for (stage, stride) in [("stage1", 1usize), ("stage2", 2), ("stage3", 2)] {
                    let w1 = node_of(&format!("{stage}.conv1.weight"));
                    let b1 = node_of(&format!("{stage}.conv1.bias"));
                    let w2 = node_of(&format!("{stage}.conv2.weight"));
                    let b2 = node_of(&format!("{stage}.conv2.bias"));
                    let c1 = graph.conv2d(cur, w1, b1, stride, 1)?;
                    let r1 = graph.relu(c1);
                    let c2 = graph.conv2d(r1, w2, b2, 1, 1)?;
                    let shortcut = if stride == 1 {
                        cur
                    } else {
                        let wp = node_of(&format!("{stage}.proj.weight"));
                        let bp = node_of(&format!("{stage}.proj.bias"));
                        graph.conv2d(cur, wp, bp, stride, 0)?
                    };
                    let sum = graph.add(c2, shortcut)?;
                    cur = graph.relu(sum);
                    tap_and_maybe_stop!(stage, cur);
                }
                let pooled = graph.global_avg_pool(cur)?;
                graph.linear(pooled, node_of("fc.weight"), node_of("fc.bias"))?
            }
        };
        Ok(ForwardPass { logits, taps, param_nodes })
    }

    /// Gradients for every parameter reachable from the loss (zeros for the
    /// rest), in `params` order.
    pub fn param_grads(&self, grads: &[Option<Tensor>], pass: &ForwardPass) -> Vec<Tensor> {
        pass.param_nodes
            .iter()
            .zip(&self.params)
            .map(|(node, p)| match &grads[node.0] {
                Some(g) => g.clone(),
                None => Tensor::zeros(&p.value.shape),
            })
            .collect()
    }

    /// Plain activation extraction at one named block (no labels, no head).
    pub fn block_activation(&self, images: &Tensor, block: &str) -> Result<Tensor> {
        if !self.spec.block_names().contains(&block) {
            return Err(Error::InvalidArgument(format!("unknown block {block}")));
        }
        let mut graph = Graph::new();
        let pass = self.forward_until(&mut graph, images, Some(block))?;
        let node = pass.taps[block];
        Ok(graph.value(node).clone())
    }

    /// Argmax predictions for a batch.
    pub fn predict(&self, images: &Tensor) -> Result<Vec<usize>> {
        let mut graph = Graph::new();
        let pass = self.forward(&mut graph, images)?;
        let logits = graph.value(pass.logits);
        let k = self.spec.classes;
        Ok(logits
            .data
            .chunks(k)
            .map(|row| {
                row.iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .map(|(i, _)| i)
                    .unwrap()
            })
            .collect())
    }
}
