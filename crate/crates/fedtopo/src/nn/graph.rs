//! Reverse-mode automatic differentiation over an append-only record.
//!
//! Nodes are appended in execution order, so the record is topologically
//! sorted by construction and backward is a single reverse sweep. Each model
//! forward builds a fresh record; parameters enter as leaves.

use crate::cubical::FilteredComplex;
use crate::error::{Error, Result};
use crate::field::{MinMaxInfo, ScalarField};
use crate::nn::tensor::Tensor;
use crate::persistence::{compute_diagram_fast, pd_backward, PersistenceDiagram};
use crate::pimage::{rasterize_backward, rasterize_pi, BirthPersistence, PiConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub usize);

/// Saved state for one sample-channel slice of a topology node.
#[derive(Debug)]
struct TopoChannelCtx {
    normalized: ScalarField,
    minmax: MinMaxInfo,
    complex: FilteredComplex,
    diagram: PersistenceDiagram,
    points: Vec<BirthPersistence>,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv2d { stride: usize, padding: usize },
    MaxPool2 { argmax: Vec<usize> },
    Relu,
    Sum,
    Linear,
    Reshape,
    Add,
    GlobalAvgPool,
    SoftmaxCrossEntropy { labels: Vec<usize>, probs: Tensor },
    TopoEmbed { config: PiConfig, ctx: Vec<TopoChannelCtx> },
    SquaredDistToConst { reference: Tensor },
    ScaleAdd { alpha: f64 },
}

struct Node {
    op: Op,
    inputs: Vec<NodeId>,
    value: Tensor,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Per-sample birth-persistence points in diagram pair order (the gradient
/// mapping back to pairs relies on this alignment).
fn pair_points(diagram: &PersistenceDiagram) -> Vec<BirthPersistence> {
    diagram
        .pairs
        .iter()
        .map(|p| BirthPersistence {
            birth: p.birth,
            persistence: if p.is_essential() { f64::INFINITY } else { p.death - p.birth },
            essential: p.is_essential(),
        })
        .collect()
}

/// Per-sample topological embeddings of a B x C x H x W activation stack,
/// outside any record (used for frozen reference models and screening).
pub fn topo_embedding_batch(activation: &Tensor, config: &PiConfig) -> Result<Vec<Vec<f64>>> {
    let [b, c, h, w]: [usize; 4] = activation
        .shape
        .as_slice()
        .try_into()
        .map_err(|_| Error::Shape(format!("expected B x C x H x W, got {:?}", activation.shape)))?;
    if h < 2 || w < 2 {
        return Err(Error::Shape(format!("spatial extent {h}x{w} too small for topology")));
    }
    config.validate()?;
    let m = config.len();
    let plane = h * w;
    let mut out = Vec::with_capacity(b);
    for n in 0..b {
        let mut te = vec![0.0; m];
        for ch in 0..c {
            let offset = (n * c + ch) * plane;
            let field =
                ScalarField::new(h, w, activation.data[offset..offset + plane].to_vec())?;
            let (normalized, _) = field.minmax_normalized();
            let (_, diagram) = compute_diagram_fast(&normalized)?;
            let pi = rasterize_pi(&pair_points(&diagram), config);
            for (acc, v) in te.iter_mut().zip(&pi.values) {
                *acc += v / c as f64;
            }
        }
        out.push(te);
    }
    Ok(out)
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, op: Op, inputs: Vec<NodeId>, value: Tensor) -> NodeId {
        self.nodes.push(Node { op, inputs, value });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, vec![], value)
    }

    pub fn conv2d(
        &mut self,
        x: NodeId,
        weight: NodeId,
        bias: NodeId,
        stride: usize,
        padding: usize,
    ) -> Result<NodeId> {
        let xv = self.value(x);
        let wv = self.value(weight);
        let bv = self.value(bias);
        let [b, cin, h, w]: [usize; 4] = xv
            .shape
            .as_slice()
            .try_into()
            .map_err(|_| Error::Shape(format!("conv input must be 4-D, got {:?}", xv.shape)))?;
        let [cout, wcin, kh, kw]: [usize; 4] = wv
            .shape
            .as_slice()
            .try_into()
            .map_err(|_| Error::Shape(format!("conv weight must be 4-D, got {:?}", wv.shape)))?;
        if wcin != cin || bv.shape != vec![cout] {
            return Err(Error::Shape(format!(
                "conv shapes mismatch: x {:?}, w {:?}, b {:?}",
                xv.shape, wv.shape, bv.shape
            )));
        }
        if h + 2 * padding < kh || w + 2 * padding < kw {
            return Err(Error::Shape("kernel larger than padded input".into()));
        }
        let oh = (h + 2 * padding - kh) / stride + 1;
        let ow = (w + 2 * padding - kw) / stride + 1;
        let mut out = vec![0.0; b * cout * oh * ow];
        for n in 0..b {
            for co in 0..cout {
                let bias_v = bv.data[co];
                for yo in 0..oh {
                    for xo in 0..ow {
                        let mut acc = bias_v;
                        for ci in 0..cin {
                            let x_base = ((n * cin) + ci) * h * w;
                            let w_base = ((co * cin) + ci) * kh * kw;
                            for dy in 0..kh {
                                let iy = (yo * stride + dy) as isize - padding as isize;
                                if iy < 0 || iy >= h as isize {
                                    continue;
                                }
                                for dx in 0..kw {
                                    let ix = (xo * stride + dx) as isize - padding as isize;
                                    if ix < 0 || ix >= w as isize {
                                        continue;
                                    }
                                    acc += xv.data[x_base + iy as usize * w + ix as usize]
                                        * wv.data[w_base + dy * kw + dx];
                                }
                            }
                        }
                        out[((n * cout + co) * oh + yo) * ow + xo] = acc;
                    }
                }
            }
        }
        let value = Tensor { shape: vec![b, cout, oh, ow], data: out };
        Ok(self.push(Op::Conv2d { stride, padding }, vec![x, weight, bias], value))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let xv = self.value(x);
        let value = Tensor {
            shape: xv.shape.clone(),
            data: xv.data.iter().map(|&v| v.max(0.0)).collect(),
        };
        self.push(Op::Relu, vec![x], value)
    }

    /// Scalar sum of all elements.
    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let total: f64 = self.value(x).data.iter().sum();
        self.push(Op::Sum, vec![x], Tensor::scalar_value(total))
    }

    pub fn maxpool2(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.value(x);
        let [b, c, h, w]: [usize; 4] = xv
            .shape
            .as_slice()
            .try_into()
            .map_err(|_| Error::Shape(format!("pool input must be 4-D, got {:?}", xv.shape)))?;
        let (oh, ow) = (h / 2, w / 2);
        if oh == 0 || ow == 0 {
            return Err(Error::Shape(format!("cannot 2x2-pool a {h}x{w} map")));
        }
        let mut out = vec![0.0; b * c * oh * ow];
        let mut argmax = vec![0usize; out.len()];
        for n in 0..b {
            for ch in 0..c {
                let base = (n * c + ch) * h * w;
                for yo in 0..oh {
                    for xo in 0..ow {
                        let mut best_idx = base + (yo * 2) * w + xo * 2;
                        let mut best = xv.data[best_idx];
                        for dy in 0..2 {
                            for dx in 0..2 {
                                let idx = base + (yo * 2 + dy) * w + (xo * 2 + dx);
                                if xv.data[idx] > best {
                                    best = xv.data[idx];
                                    best_idx = idx;
                                }
                            }
                        }
                        let o = ((n * c + ch) * oh + yo) * ow + xo;
                        out[o] = best;
                        argmax[o] = best_idx;
                    }
                }
            }
        }
        let value = Tensor { shape: vec![b, c, oh, ow], data: out };
        Ok(self.push(Op::MaxPool2 { argmax }, vec![x], value))
    }

    pub fn linear(&mut self, x: NodeId, weight: NodeId, bias: NodeId) -> Result<NodeId> {
        let xv = self.value(x);
        let wv = self.value(weight);
        let bv = self.value(bias);
        let [b, fin]: [usize; 2] = xv
            .shape
            .as_slice()
            .try_into()
            .map_err(|_| Error::Shape(format!("linear input must be 2-D, got {:?}", xv.shape)))?;
        let [fout, wfin]: [usize; 2] = wv
            .shape
            .as_slice()
            .try_into()
            .map_err(|_| Error::Shape(format!("linear weight must be 2-D, got {:?}", wv.shape)))?;
        if wfin != fin || bv.shape != vec![fout] {
            return Err(Error::Shape(format!(
                "linear shapes mismatch: x {:?}, w {:?}, b {:?}",
                xv.shape, wv.shape, bv.shape
            )));
        }
        let mut out = vec![0.0; b * fout];
        for n in 0..b {
            let x_row = &xv.data[n * fin..(n + 1) * fin];
            for o in 0..fout {
                let w_row = &wv.data[o * fin..(o + 1) * fin];
                let mut acc = bv.data[o];
                for i in 0..fin {
                    acc += x_row[i] * w_row[i];
                }
                out[n * fout + o] = acc;
            }
        }
        let value = Tensor { shape: vec![b, fout], data: out };
        Ok(self.push(Op::Linear, vec![x, weight, bias], value))
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        let xv = self.value(x);
        if shape.iter().product::<usize>() != xv.numel() {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} to {shape:?}",
                xv.shape
            )));
        }
        let value = Tensor { shape: shape.to_vec(), data: xv.data.clone() };
        Ok(self.push(Op::Reshape, vec![x], value))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if !av.same_shape(bv) {
            return Err(Error::Shape(format!("add shapes {:?} vs {:?}", av.shape, bv.shape)));
        }
        let value = Tensor {
            shape: av.shape.clone(),
            data: av.data.iter().zip(&bv.data).map(|(x, y)| x + y).collect(),
        };
        Ok(self.push(Op::Add, vec![a, b], value))
    }

    pub fn global_avg_pool(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.value(x);
        let [b, c, h, w]: [usize; 4] = xv
            .shape
            .as_slice()
            .try_into()
            .map_err(|_| Error::Shape(format!("gap input must be 4-D, got {:?}", xv.shape)))?;
        let plane = h * w;
        let mut out = vec![0.0; b * c];
        for n in 0..b {
            for ch in 0..c {
                let base = (n * c + ch) * plane;
                out[n * c + ch] =
                    xv.data[base..base + plane].iter().sum::<f64>() / plane as f64;
            }
        }
        let value = Tensor { shape: vec![b, c], data: out };
        Ok(self.push(Op::GlobalAvgPool, vec![x], value))
    }

    /// Mean cross-entropy of softmax(logits) against integer labels.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, labels: &[usize]) -> Result<NodeId> {
        let lv = self.value(logits);
        let [b, k]: [usize; 2] = lv
            .shape
            .as_slice()
            .try_into()
            .map_err(|_| Error::Shape(format!("logits must be 2-D, got {:?}", lv.shape)))?;
        if labels.len() != b {
            return Err(Error::Shape(format!("{} labels for batch of {b}", labels.len())));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
            return Err(Error::InvalidArgument(format!("label {bad} out of range 0..{k}")));
        }
        let mut probs = vec![0.0; b * k];
        let mut loss = 0.0;
        for n in 0..b {
            let row = &lv.data[n * k..(n + 1) * k];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for (j, &v) in row.iter().enumerate() {
                let e = (v - max).exp();
                probs[n * k + j] = e;
                z += e;
            }
            for j in 0..k {
                probs[n * k + j] /= z;
            }
            loss -= probs[n * k + labels[n]].ln();
        }
        loss /= b as f64;
        let probs = Tensor { shape: vec![b, k], data: probs };
        let value = Tensor::scalar_value(loss);
        Ok(self.push(
            Op::SoftmaxCrossEntropy { labels: labels.to_vec(), probs },
            vec![logits],
            value,
        ))
    }

    /// Differentiable topology node: per sample, min-max normalize each
    /// channel, compute its persistence diagram, rasterize, and average the
    /// per-channel images. Output is B x M.
    pub fn topo_embed(&mut self, x: NodeId, config: &PiConfig) -> Result<NodeId> {
        let xv = self.value(x);
        let [b, c, h, w]: [usize; 4] = xv.shape.as_slice().try_into().map_err(|_| {
            Error::Shape(format!("topology input must be B x C x H x W, got {:?}", xv.shape))
        })?;
        if h < 2 || w < 2 {
            return Err(Error::Shape(format!("spatial extent {h}x{w} too small for topology")));
        }
        config.validate()?;
        let m = config.len();
        let plane = h * w;
        let mut out = vec![0.0; b * m];
        let mut ctx = Vec::with_capacity(b * c);
        for n in 0..b {
            for ch in 0..c {
                let offset = (n * c + ch) * plane;
                let field =
                    ScalarField::new(h, w, xv.data[offset..offset + plane].to_vec())?;
                let (normalized, minmax) = field.minmax_normalized();
                let (complex, diagram) = compute_diagram_fast(&normalized)?;
                let points = pair_points(&diagram);
                let pi = rasterize_pi(&points, config);
                for (j, v) in pi.values.iter().enumerate() {
                    out[n * m + j] += v / c as f64;
                }
                ctx.push(TopoChannelCtx { normalized, minmax, complex, diagram, points });
            }
        }
        let value = Tensor { shape: vec![b, m], data: out };
        Ok(self.push(Op::TopoEmbed { config: config.clone(), ctx }, vec![x], value))
    }

    /// Scalar (1/B) * sum of squared differences against a constant
    /// reference tensor (no gradient flows into the reference).
    pub fn squared_dist_to_const(&mut self, x: NodeId, reference: Tensor) -> Result<NodeId> {
        let xv = self.value(x);
        if !xv.same_shape(&reference) {
            return Err(Error::Shape(format!(
                "reference shape {:?} vs input {:?}",
                reference.shape, xv.shape
            )));
        }
        let batch = xv.shape[0] as f64;
        let sum: f64 = xv.data.iter().zip(&reference.data).map(|(a, r)| (a - r) * (a - r)).sum();
        let value = Tensor::scalar_value(sum / batch);
        Ok(self.push(Op::SquaredDistToConst { reference }, vec![x], value))
    }

    /// Scalar combination a + alpha * b.
    pub fn scale_add(&mut self, a: NodeId, b: NodeId, alpha: f64) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.numel() != 1 || bv.numel() != 1 {
            return Err(Error::Shape("scale_add expects scalars".into()));
        }
        let value = Tensor::scalar_value(av.scalar() + alpha * bv.scalar());
        Ok(self.push(Op::ScaleAdd { alpha }, vec![a, b], value))
    }

    /// Reverse sweep from a scalar loss node. Returns one optional gradient
    /// per node; nodes not reaching the loss have `None`.
    pub fn backward(&self, loss: NodeId) -> Result<Vec<Option<Tensor>>> {
        if self.nodes[loss.0].value.numel() != 1 {
            return Err(Error::InvalidArgument(format!(
                "loss must be scalar, got shape {:?}",
                self.nodes[loss.0].value.shape
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar_value(1.0));
        for id in (0..=loss.0).rev() {
            let Some(gout) = grads[id].take() else { continue };
            self.accumulate_input_grads(id, &gout, &mut grads);
            grads[id] = Some(gout);
        }
        Ok(grads)
    }

    fn accumulate_input_grads(&self, id: usize, gout: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[id];
        let add_to = |target: NodeId, delta: Tensor, grads: &mut [Option<Tensor>]| {
            match &mut grads[target.0] {
                Some(g) => g.add_scaled(&delta, 1.0),
                slot => *slot = Some(delta),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d { stride, padding } => {
                let x = self.value(node.inputs[0]);
                let w = self.value(node.inputs[1]);
                let (batch, cin, h, wd) = (x.shape[0], x.shape[1], x.shape[2], x.shape[3]);
                let (cout, kh, kw) = (w.shape[0], w.shape[2], w.shape[3]);
                let (oh, ow) = (node.value.shape[2], node.value.shape[3]);
                let mut dx = Tensor::zeros(&x.shape);
                let mut dw = Tensor::zeros(&w.shape);
                let mut db = Tensor::zeros(&[cout]);
                for n in 0..batch {
                    for co in 0..cout {
                        for yo in 0..oh {
                            for xo in 0..ow {
                                let g = gout.data[((n * cout + co) * oh + yo) * ow + xo];
                                if g == 0.0 {
                                    continue;
                                }
                                db.data[co] += g;
                                for ci in 0..cin {
                                    let x_base = (n * cin + ci) * h * wd;
                                    let w_base = (co * cin + ci) * kh * kw;
                                    for dy in 0..kh {
                                        let iy = (yo * stride + dy) as isize - *padding as isize;
                                        if iy < 0 || iy >= h as isize {
                                            continue;
                                        }
                                        for dxk in 0..kw {
                                            let ix =
                                                (xo * stride + dxk) as isize - *padding as isize;
                                            if ix < 0 || ix >= wd as isize {
                                                continue;
                                            }
                                            let xi = x_base + iy as usize * wd + ix as usize;
                                            dx.data[xi] += g * w.data[w_base + dy * kw + dxk];
                                            dw.data[w_base + dy * kw + dxk] += g * x.data[xi];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                add_to(node.inputs[0], dx, grads);
                add_to(node.inputs[1], dw, grads);
                add_to(node.inputs[2], db, grads);
            }
            Op::MaxPool2 { argmax } => {
                let x = self.value(node.inputs[0]);
                let mut dx = Tensor::zeros(&x.shape);
                for (o, &src) in argmax.iter().enumerate() {
                    dx.data[src] += gout.data[o];
                }
                add_to(node.inputs[0], dx, grads);
            }
            Op::Relu => {
                let x = self.value(node.inputs[0]);
                let mut dx = Tensor::zeros(&x.shape);
                for i in 0..x.numel() {
                    if x.data[i] > 0.0 {
                        dx.data[i] = gout.data[i];
                    }
                }
                add_to(node.inputs[0], dx, grads);
            }
            Op::Sum => {
                let x = self.value(node.inputs[0]);
                let g = gout.scalar();
                let dx = Tensor { shape: x.shape.clone(), data: vec![g; x.numel()] };
                add_to(node.inputs[0], dx, grads);
            }
            Op::Linear => {
                let x = self.value(node.inputs[0]);
                let w = self.value(node.inputs[1]);
                let (batch, fin) = (x.shape[0], x.shape[1]);
                let fout = w.shape[0];
                let mut dx = Tensor::zeros(&x.shape);
                let mut dw = Tensor::zeros(&w.shape);
                let mut db = Tensor::zeros(&[fout]);
                for n in 0..batch {
                    for o in 0..fout {
                        let g = gout.data[n * fout + o];
                        if g == 0.0 {
                            continue;
                        }
                        db.data[o] += g;
                        for i in 0..fin {
                            dx.data[n * fin + i] += g * w.data[o * fin + i];
                            dw.data[o * fin + i] += g * x.data[n * fin + i];
                        }
                    }
                }
                add_to(node.inputs[0], dx, grads);
                add_to(node.inputs[1], dw, grads);
                add_to(node.inputs[2], db, grads);
            }
            Op::Reshape => {
                let x = self.value(node.inputs[0]);
                let dx = Tensor { shape: x.shape.clone(), data: gout.data.clone() };
                add_to(node.inputs[0], dx, grads);
            }
            Op::Add => {
                add_to(node.inputs[0], gout.clone(), grads);
                add_to(node.inputs[1], gout.clone(), grads);
            }
            Op::GlobalAvgPool => {
                let x = self.value(node.inputs[0]);
                let (batch, c, h, w) = (x.shape[0], x.shape[1], x.shape[2], x.shape[3]);
                let plane = h * w;
                let mut dx = Tensor::zeros(&x.shape);
                for n in 0..batch {
                    for ch in 0..c {
                        let g = gout.data[n * c + ch] / plane as f64;
                        let base = (n * c + ch) * plane;
                        for i in 0..plane {
                            dx.data[base + i] += g;
                        }
                    }
                }
                add_to(node.inputs[0], dx, grads);
            }
            Op::SoftmaxCrossEntropy { labels, probs } => {
                let g = gout.scalar();
                let (batch, k) = (probs.shape[0], probs.shape[1]);
                let mut dx = Tensor::zeros(&probs.shape);
                for (n, &label) in labels.iter().enumerate().take(batch) {
                    for j in 0..k {
                        let indicator = if label == j { 1.0 } else { 0.0 };
                        dx.data[n * k + j] =
                            g * (probs.data[n * k + j] - indicator) / batch as f64;
                    }
                }
                add_to(node.inputs[0], dx, grads);
            }
            Op::TopoEmbed { config, ctx } => {
                let x = self.value(node.inputs[0]);
                let (batch, c, h, w) = (x.shape[0], x.shape[1], x.shape[2], x.shape[3]);
                let m = config.len();
                let plane = h * w;
                let mut dx = Tensor::zeros(&x.shape);
                for n in 0..batch {
                    // Each channel image receives 1/C of the output gradient.
                    let scaled: Vec<f64> =
                        gout.data[n * m..(n + 1) * m].iter().map(|g| g / c as f64).collect();
                    for ch in 0..c {
                        let slot = &ctx[n * c + ch];
                        if slot.points.is_empty() {
                            continue;
                        }
                        let point_grads = rasterize_backward(&slot.points, config, &scaled);
                        let pair_grads: Vec<(f64, f64)> = point_grads
                            .iter()
                            .map(|&(gb, gp)| (gb - gp, gp))
                            .collect();
                        let grad_norm = pd_backward(
                            &slot.complex,
                            &slot.normalized,
                            &slot.diagram,
                            &pair_grads,
                        )
                        .expect("saved provenance is consistent");
                        let grad_raw =
                            slot.minmax.backward(grad_norm.values(), slot.normalized.values());
                        let base = (n * c + ch) * plane;
                        for (i, g) in grad_raw.iter().enumerate() {
                            dx.data[base + i] += g;
                        }
                    }
                }
                add_to(node.inputs[0], dx, grads);
            }
            Op::SquaredDistToConst { reference } => {
                let x = self.value(node.inputs[0]);
                let g = gout.scalar();
                let batch = x.shape[0] as f64;
                let mut dx = Tensor::zeros(&x.shape);
                for i in 0..x.numel() {
                    dx.data[i] = g * 2.0 * (x.data[i] - reference.data[i]) / batch;
                }
                add_to(node.inputs[0], dx, grads);
            }
            Op::ScaleAdd { alpha } => {
                add_to(node.inputs[0], gout.clone(), grads);
                let mut gb = gout.clone();
                for v in &mut gb.data {
                    *v *= alpha;
                }
                add_to(node.inputs[1], gb, grads);
            }
        }
    }
}
