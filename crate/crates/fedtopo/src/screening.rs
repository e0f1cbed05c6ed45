//! Topology-guided block screening: scores each candidate block's
//! topological class separability via ROC-AUC over within- versus
//! between-class diagram distances and selects the argmax block.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::{
    bottleneck_distance_by_dim, vector_distance, wasserstein_distance_by_dim, VectorDistance,
};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::nn::model::Model;
use crate::nn::tensor::Tensor;
use crate::persistence::{compute_diagram_fast, PersistenceDiagram};
use crate::pimage::{rasterize_pi, PiConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagramMetric {
    Bottleneck,
    Wasserstein2,
    PiEuclidean,
    PiCosine,
}

impl DiagramMetric {
    pub fn name(&self) -> &'static str {
        match self {
            DiagramMetric::Bottleneck => "bottleneck",
            DiagramMetric::Wasserstein2 => "wasserstein2",
            DiagramMetric::PiEuclidean => "pi_euclidean",
            DiagramMetric::PiCosine => "pi_cosine",
        }
    }
}

/// Per-block screening outcome. The mean is the plain arithmetic mean of
/// the per-metric AUCs.
#[derive(Debug, Clone)]
pub struct BlockScore {
    pub block: String,
    pub per_metric: Vec<(DiagramMetric, f64)>,
    pub mean_auc: f64,
}

#[derive(Debug, Clone)]
pub struct ScreenParams {
    pub metrics: Vec<DiagramMetric>,
    pub n_pairs: usize,
    pub pca_k: usize,
    pub pi: PiConfig,
    pub seed: u64,
}

impl Default for ScreenParams {
    fn default() -> Self {
        Self {
            metrics: vec![
                DiagramMetric::Bottleneck,
                DiagramMetric::Wasserstein2,
                DiagramMetric::PiEuclidean,
                DiagramMetric::PiCosine,
            ],
            n_pairs: 200,
            pca_k: 8,
            pi: PiConfig::default(),
            seed: 0,
        }
    }
}

/// Result of projecting channel stacks onto principal channel directions.
#[derive(Debug, Clone)]
pub struct ChannelReduction {
    /// Projected stacks, N x k' x H x W with k' = min(k, rank).
    pub stacks: Tensor,
    /// Fraction of total channel variance along each kept direction.
    pub explained_variance_ratio: Vec<f64>,
}

/// PCA over channels: channels are the variables, every (sample, pixel) is
/// an observation. Components carry a deterministic sign (largest-magnitude
/// loading positive); directions with (numerically) zero variance are
/// dropped rather than padded.
pub fn reduce_channels(stacks: &Tensor, k: usize) -> Result<ChannelReduction> {
    let [n, c, h, w]: [usize; 4] = stacks
        .shape
        .as_slice()
        .try_into()
        .map_err(|_| Error::Shape(format!("expected N x C x H x W, got {:?}", stacks.shape)))?;
    if n < 2 {
        return Err(Error::InvalidArgument("channel PCA needs at least 2 samples".into()));
    }
    if k == 0 || k > c {
        return Err(Error::InvalidArgument(format!("k={k} outside 1..={c}")));
    }
    let plane = h * w;
    let obs = n * plane;
    let mut means = vec![0.0; c];
    for s in 0..n {
        for (ch, mean) in means.iter_mut().enumerate() {
            let base = (s * c + ch) * plane;
            *mean += stacks.data[base..base + plane].iter().sum::<f64>();
        }
    }
    for m in &mut means {
        *m /= obs as f64;
    }
    // Channel covariance, observations = sample-pixels.
    let mut cov = nalgebra::DMatrix::<f64>::zeros(c, c);
    for s in 0..n {
        for i in 0..plane {
            for a in 0..c {
                let va = stacks.data[(s * c + a) * plane + i] - means[a];
                for b in a..c {
                    let vb = stacks.data[(s * c + b) * plane + i] - means[b];
                    cov[(a, b)] += va * vb;
                }
            }
        }
    }
    let denom = (obs - 1) as f64;
    for a in 0..c {
        for b in a..c {
            cov[(a, b)] /= denom;
            cov[(b, a)] = cov[(a, b)];
        }
    }
    let trace: f64 = (0..c).map(|i| cov[(i, i)]).sum();
    let eig = nalgebra::SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let tol = 1e-12 * trace.max(1e-300);
    let kept: Vec<usize> =
        order.into_iter().filter(|&i| eig.eigenvalues[i] > tol).take(k).collect();
    if kept.is_empty() {
        return Err(Error::InvalidArgument("channel covariance has rank zero".into()));
    }
    let total_var: f64 = (0..c).map(|i| eig.eigenvalues[i].max(0.0)).sum();
    let mut components: Vec<Vec<f64>> = Vec::with_capacity(kept.len());
    let mut ratios = Vec::with_capacity(kept.len());
    for &i in &kept {
        let col = eig.eigenvectors.column(i);
        let mut v: Vec<f64> = col.iter().copied().collect();
        let lead = (0..c)
            .max_by(|&a, &b| v[a].abs().partial_cmp(&v[b].abs()).unwrap().then(b.cmp(&a)))
            .unwrap();
        if v[lead] < 0.0 {
            for x in &mut v {
                *x = -*x;
            }
        }
        components.push(v);
        ratios.push(if total_var > 0.0 { eig.eigenvalues[i].max(0.0) / total_var } else { 0.0 });
    }
    let k_eff = components.len();
    let mut out = vec![0.0; n * k_eff * plane];
    for s in 0..n {
        for (e, comp) in components.iter().enumerate() {
            let out_base = (s * k_eff + e) * plane;
            for (ch, &load) in comp.iter().enumerate() {
                if load == 0.0 {
                    continue;
                }
                let in_base = (s * c + ch) * plane;
                for i in 0..plane {
                    out[out_base + i] += load * (stacks.data[in_base + i] - means[ch]);
                }
            }
        }
    }
    Ok(ChannelReduction {
        stacks: Tensor { shape: vec![n, k_eff, h, w], data: out },
        explained_variance_ratio: ratios,
    })
}

/// Rank-based (Mann-Whitney) AUC: the probability that a within-class
/// similarity exceeds a between-class similarity, ties counted one half.
pub fn roc_auc(similarities: &[(f64, bool)]) -> Result<f64> {
    let positives: Vec<f64> =
        similarities.iter().filter(|(_, within)| *within).map(|(s, _)| *s).collect();
    let negatives: Vec<f64> =
        similarities.iter().filter(|(_, within)| !*within).map(|(s, _)| *s).collect();
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::InvalidArgument(
            "AUC needs at least one within-class and one between-class sample".into(),
        ));
    }
    let mut favorable = 0.0;
    for &p in &positives {
        for &n in &negatives {
            if p > n {
                favorable += 1.0;
            } else if p == n {
                favorable += 0.5;
            }
        }
    }
    Ok(favorable / (positives.len() * negatives.len()) as f64)
}

/// Per-sample topological summary used by the pairwise metrics.
struct SampleSummary {
    /// Disjoint union of the per-channel diagrams.
    diagram: PersistenceDiagram,
    /// Channel-averaged persistence image.
    embedding: Vec<f64>,
}

fn summarize_samples(stacks: &Tensor, pi: &PiConfig) -> Result<Vec<SampleSummary>> {
    let [n, c, h, w]: [usize; 4] = stacks.shape.as_slice().try_into().unwrap();
    let plane = h * w;
    (0..n)
        .into_par_iter()
        .map(|s| {
            let mut pooled = PersistenceDiagram::default();
            let mut embedding = vec![0.0; pi.len()];
            for ch in 0..c {
                let base = (s * c + ch) * plane;
                let field = ScalarField::new(h, w, stacks.data[base..base + plane].to_vec())?;
                let (normalized, _) = field.minmax_normalized();
                let (_, diagram) = compute_diagram_fast(&normalized)?;
                let points = crate::pimage::diagram_points(&diagram);
                let image = rasterize_pi(&points, pi);
                for (acc, v) in embedding.iter_mut().zip(&image.values) {
                    *acc += v / c as f64;
                }
                pooled.pairs.extend(diagram.pairs);
            }
            Ok(SampleSummary { diagram: pooled, embedding })
        })
        .collect()
}

fn pair_distance(a: &SampleSummary, b: &SampleSummary, metric: DiagramMetric) -> f64 {
    match metric {
        // Diagram metrics are matched per homology dimension and summed.
        DiagramMetric::Bottleneck => {
            let [h0, h1] = bottleneck_distance_by_dim(&a.diagram, &b.diagram);
            h0 + h1
        }
        DiagramMetric::Wasserstein2 => {
            let [h0, h1] = wasserstein_distance_by_dim(&a.diagram, &b.diagram, 2.0);
            h0 + h1
        }
        DiagramMetric::PiEuclidean => {
            vector_distance(&a.embedding, &b.embedding, VectorDistance::Euclidean)
        }
        DiagramMetric::PiCosine => {
            vector_distance(&a.embedding, &b.embedding, VectorDistance::Cosine)
        }
    }
}

/// Uniform sample without replacement of `count` items from `pool`.
fn sample_pairs(
    pool: &mut [(usize, usize)],
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(usize, usize)> {
    let take = count.min(pool.len());
    for t in 0..take {
        let j = rng.random_range(t..pool.len());
        pool.swap(t, j);
    }
    pool[..take].to_vec()
}

/// One block's activations for the screening sample.
pub struct BlockSample {
    pub name: String,
    /// N x C x H x W.
    pub activations: Tensor,
}

/// Core of the screening procedure over pre-extracted activations.
///
/// Within- and between-class pairs are drawn once from the labels (seeded,
/// uniform, without replacement) and shared by every block and metric, so
/// block scores are directly comparable. Blocks whose spatial extent is
/// below 2x2 are skipped with a warning. Ties at the top break toward the
/// earlier block.
pub fn screen_blocks(
    blocks: &[BlockSample],
    labels: &[usize],
    params: &ScreenParams,
) -> Result<(String, Vec<BlockScore>)> {
    if blocks.is_empty() {
        return Err(Error::InvalidArgument("no candidate blocks".into()));
    }
    if params.metrics.is_empty() {
        return Err(Error::InvalidArgument("no metrics configured".into()));
    }
    let n = labels.len();
    let classes: std::collections::BTreeSet<usize> = labels.iter().copied().collect();
    if classes.len() < 2 {
        return Err(Error::InvalidArgument("screening needs at least two classes".into()));
    }
    let mut within: Vec<(usize, usize)> = Vec::new();
    let mut between: Vec<(usize, usize)> = Vec::new();
    for j in 0..n {
        for k in j + 1..n {
            if labels[j] == labels[k] {
                within.push((j, k));
            } else {
                between.push((j, k));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let within_pairs = sample_pairs(&mut within, params.n_pairs, &mut rng);
    let between_pairs = sample_pairs(&mut between, params.n_pairs, &mut rng);

    let mut scores: Vec<BlockScore> = Vec::new();
    for block in blocks {
        let shape = &block.activations.shape;
        if shape.len() != 4 || shape[0] != n {
            return Err(Error::Shape(format!(
                "block {}: expected {n} stacks of C x H x W, got {shape:?}",
                block.name
            )));
        }
        if shape[2] < 2 || shape[3] < 2 {
            eprintln!(
                "warning: skipping block {} with no usable spatial extent ({}x{})",
                block.name, shape[2], shape[3]
            );
            continue;
        }
        let k = params.pca_k.min(shape[1]);
        let reduced = reduce_channels(&block.activations, k)?;
        let summaries = summarize_samples(&reduced.stacks, &params.pi)?;
        let mut per_metric = Vec::with_capacity(params.metrics.len());
        for &metric in &params.metrics {
            let mut sims: Vec<(f64, bool)> = Vec::with_capacity(2 * params.n_pairs);
            let all_pairs = within_pairs.iter().map(|p| (p, true)).chain(between_pairs.iter().map(|p| (p, false)));
            let computed: Vec<(f64, bool)> = all_pairs
                .collect::<Vec<_>>()
                .par_iter()
                .map(|(&(j, k), is_within)| {
                    (-pair_distance(&summaries[j], &summaries[k], metric), *is_within)
                })
                .collect();
            sims.extend(computed);
            per_metric.push((metric, roc_auc(&sims)?));
        }
        let mean_auc =
            per_metric.iter().map(|(_, a)| a).sum::<f64>() / per_metric.len() as f64;
        scores.push(BlockScore { block: block.name.clone(), per_metric, mean_auc });
    }
    if scores.is_empty() {
        return Err(Error::InvalidArgument("every candidate block was skipped".into()));
    }
    // Argmax with ties broken toward the earlier block.
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if s.mean_auc > scores[best].mean_auc {
            best = i;
        }
    }
    Ok((scores[best].block.clone(), scores))
}

/// Extracts block activations from a model over a labeled sample and screens
/// them. Activations are gathered in chunks to bound record memory.
pub fn screen_model(
    model: &Model,
    images: &Tensor,
    labels: &[usize],
    block_names: &[String],
    params: &ScreenParams,
) -> Result<(String, Vec<BlockScore>)> {
    let n = images.shape[0];
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} images", labels.len())));
    }
    let mut blocks = Vec::with_capacity(block_names.len());
    for name in block_names {
        let mut chunks: Vec<Tensor> = Vec::new();
        let (c, h, w) = (images.shape[1], images.shape[2], images.shape[3]);
        let plane = c * h * w;
        for start in (0..n).step_by(64) {
            let end = (start + 64).min(n);
            let batch = Tensor {
                shape: vec![end - start, c, h, w],
                data: images.data[start * plane..end * plane].to_vec(),
            };
            chunks.push(model.block_activation(&batch, name)?);
        }
        let shape = chunks[0].shape.clone();
        let data: Vec<f64> = chunks.into_iter().flat_map(|t| t.data).collect();
        let activations =
            Tensor { shape: vec![n, shape[1], shape[2], shape[3]], data };
        blocks.push(BlockSample { name: name.clone(), activations });
    }
    screen_blocks(&blocks, labels, params)
}

/// CSV export: `block,metric,auc` rows plus a `winner,<block>,<mean_auc>`
/// trailer.
pub fn scores_to_csv(winner: &str, scores: &[BlockScore]) -> String {
    let mut out = String::from("block,metric,auc\n");
    for s in scores {
        for (m, auc) in &s.per_metric {
            out.push_str(&format!("{},{},{}\n", s.block, m.name(), auc));
        }
        out.push_str(&format!("{},mean,{}\n", s.block, s.mean_auc));
    }
    let mean = scores.iter().find(|s| s.block == winner).map(|s| s.mean_auc).unwrap_or(f64::NAN);
    out.push_str(&format!("winner,{winner},{mean}\n"));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_perfect_separation() {
        let sims = vec![(0.9, true), (0.8, true), (0.2, false), (0.1, false)];
        assert_eq!(roc_auc(&sims).unwrap(), 1.0);
    }

    #[test]
    fn auc_all_ties_is_half() {
        let sims = vec![(0.5, true), (0.5, true), (0.5, false), (0.5, false)];
        assert_eq!(roc_auc(&sims).unwrap(), 0.5);
    }

    #[test]
    fn auc_pair_counting() {
        // Mann-Whitney over the four ordered pairs; one pair is inverted.
        let sims = vec![(0.9, true), (0.4, true), (0.5, false), (0.1, false)];
        assert_eq!(roc_auc(&sims).unwrap(), 0.75);
        // A tie counts one half: 3.5 of 4 pairs.
        let sims = vec![(0.9, true), (0.4, true), (0.4, false), (0.1, false)];
        assert_eq!(roc_auc(&sims).unwrap(), 0.875);
    }

    #[test]
    fn auc_rejects_single_class() {
        assert!(roc_auc(&[(0.5, true), (0.4, true)]).is_err());
    }

    #[test]
    fn auc_invariant_under_monotone_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sims: Vec<(f64, bool)> =
            (0..40).map(|_| (rng.random_range(-2.0..2.0), rng.random_bool(0.5))).collect();
        if sims.iter().filter(|s| s.1).count() == 0 || sims.iter().filter(|s| !s.1).count() == 0 {
            return;
        }
        let base = roc_auc(&sims).unwrap();
        let transformed: Vec<(f64, bool)> =
            sims.iter().map(|&(s, w)| (s.exp() + 3.0 * s, w)).collect();
        assert!((roc_auc(&transformed).unwrap() - base).abs() < 1e-12);
    }

    fn random_stacks(rng: &mut ChaCha8Rng, n: usize, c: usize, h: usize, w: usize) -> Tensor {
        let data = (0..n * c * h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor::from_vec(&[n, c, h, w], data).unwrap()
    }

    #[test]
    fn pca_full_rank_explains_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let stacks = random_stacks(&mut rng, 4, 3, 5, 5);
        let r = reduce_channels(&stacks, 3).unwrap();
        let total: f64 = r.explained_variance_ratio.iter().sum();
        assert!((total - 1.0).abs() < 1e-9, "full basis must explain all variance, got {total}");
    }

    #[test]
    fn pca_perfectly_correlated_channels_collapse_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 3;
        let plane = 16;
        let mut data = Vec::new();
        for _ in 0..n {
            let base: Vec<f64> = (0..plane).map(|_| rng.random_range(-1.0..1.0)).collect();
            data.extend(base.iter().copied());
            data.extend(base.iter().map(|v| 2.0 * v + 1.0));
        }
        let stacks = Tensor::from_vec(&[n, 2, 4, 4], data).unwrap();
        let r = reduce_channels(&stacks, 1).unwrap();
        assert!((r.explained_variance_ratio[0] - 1.0).abs() < 1e-9);
        // Rank-deficient: asking for both channels keeps only the one real
        // direction, with no padding.
        let r2 = reduce_channels(&stacks, 2).unwrap();
        assert_eq!(r2.stacks.shape[1], 1);
        assert_eq!(r2.explained_variance_ratio.len(), 1);
    }

    /// Jacobi eigenvalue sweep, the independent oracle for the PCA ratios.
    fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
        let n = a.len();
        for _ in 0..100 {
            let mut off = 0.0;
            for i in 0..n {
                for j in i + 1..n {
                    off += a[i][j] * a[i][j];
                }
            }
            if off < 1e-24 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() < 1e-18 {
                        continue;
                    }
                    let theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        (0..n).map(|i| a[i][i]).collect()
    }

    #[test]
    fn pca_ratios_match_jacobi_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let stacks = random_stacks(&mut rng, 5, 4, 6, 6);
        let r = reduce_channels(&stacks, 2).unwrap();

        // Rebuild the covariance directly and diagonalize with Jacobi.
        let (n, c, plane) = (5, 4, 36);
        let mut means = vec![0.0; c];
        for s in 0..n {
            for ch in 0..c {
                for i in 0..plane {
                    means[ch] += stacks.data[(s * c + ch) * plane + i];
                }
            }
        }
        for m in &mut means {
            *m /= (n * plane) as f64;
        }
        let mut cov = vec![vec![0.0; c]; c];
        for s in 0..n {
            for i in 0..plane {
                for a in 0..c {
                    for b in 0..c {
                        cov[a][b] += (stacks.data[(s * c + a) * plane + i] - means[a])
                            * (stacks.data[(s * c + b) * plane + i] - means[b]);
                    }
                }
            }
        }
        for row in &mut cov {
            for v in row.iter_mut() {
                *v /= (n * plane - 1) as f64;
            }
        }
        let mut eigs = jacobi_eigenvalues(cov);
        eigs.sort_by(|a, b| b.total_cmp(a));
        let total: f64 = eigs.iter().sum();
        for (got, expect) in r.explained_variance_ratio.iter().zip(eigs.iter().map(|e| e / total))
        {
            assert!((got - expect).abs() < 1e-8, "{got} vs {expect}");
        }
    }

    #[test]
    fn pca_rejects_bad_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let stacks = random_stacks(&mut rng, 3, 2, 4, 4);
        assert!(reduce_channels(&stacks, 3).is_err());
        assert!(reduce_channels(&stacks, 0).is_err());
    }

    #[test]
    fn identical_blocks_tie_breaks_to_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let stacks = random_stacks(&mut rng, 12, 2, 4, 4);
        let labels: Vec<usize> = (0..12).map(|i| i % 2).collect();
        let blocks = vec![
            BlockSample { name: "first".into(), activations: stacks.clone() },
            BlockSample { name: "second".into(), activations: stacks },
        ];
        let params = ScreenParams { n_pairs: 10, pca_k: 2, seed: 3, ..Default::default() };
        let (winner, scores) = screen_blocks(&blocks, &labels, &params).unwrap();
        assert_eq!(winner, "first");
        assert_eq!(scores[0].mean_auc, scores[1].mean_auc);
    }

    #[test]
    fn screening_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_stacks(&mut rng, 10, 2, 5, 5);
        let labels: Vec<usize> = (0..10).map(|i| i % 2).collect();
        let params = ScreenParams { n_pairs: 8, pca_k: 2, seed: 9, ..Default::default() };
        let run = || {
            let blocks =
                vec![BlockSample { name: "b".into(), activations: a.clone() }];
            let (w, s) = screen_blocks(&blocks, &labels, &params).unwrap();
            (w, s.iter().map(|x| x.mean_auc).collect::<Vec<_>>())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn flat_block_skipped_with_error_when_alone() {
        let stacks = Tensor::zeros(&[4, 3, 1, 1]);
        let labels = vec![0, 1, 0, 1];
        let blocks = vec![BlockSample { name: "fc".into(), activations: stacks }];
        assert!(screen_blocks(&blocks, &labels, &ScreenParams::default()).is_err());
    }

    #[test]
    fn rejects_single_class_dataset() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let stacks = random_stacks(&mut rng, 6, 1, 4, 4);
        let blocks = vec![BlockSample { name: "b".into(), activations: stacks }];
        assert!(screen_blocks(&blocks, &[1; 6], &ScreenParams::default()).is_err());
    }

    #[test]
    fn disk_annulus_spatial_block_beats_permuted_control() {
        use crate::data::{gen_synthetic, SyntheticSpec};
        let spec = SyntheticSpec { count_per_class: 30, seed: 77, ..SyntheticSpec::default() };
        let ds = gen_synthetic(&spec).unwrap();
        let n = ds.len();
        let spatial = ds.batch(&(0..n).collect::<Vec<_>>());

        // Control: one fixed spatial permutation applied to every sample.
        let plane = 28 * 28;
        let mut perm: Vec<usize> = (0..plane).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(1234));
        let mut permuted = spatial.clone();
        for s in 0..n {
            for (dst, &src) in perm.iter().enumerate() {
                permuted.data[s * plane + dst] = spatial.data[s * plane + src];
            }
        }
        let blocks = vec![
            BlockSample { name: "spatial".into(), activations: spatial },
            BlockSample { name: "permuted".into(), activations: permuted },
        ];
        let params = ScreenParams { n_pairs: 60, pca_k: 1, seed: 5, ..Default::default() };
        let (winner, scores) = screen_blocks(&blocks, &ds.labels, &params).unwrap();
        assert_eq!(winner, "spatial");
        let spatial_auc = scores.iter().find(|s| s.block == "spatial").unwrap().mean_auc;
        let permuted_auc = scores.iter().find(|s| s.block == "permuted").unwrap().mean_auc;
        assert!(spatial_auc >= 0.9, "spatial AUC {spatial_auc} below 0.9");
        assert!(spatial_auc > permuted_auc, "{spatial_auc} vs {permuted_auc}");
    }
}
