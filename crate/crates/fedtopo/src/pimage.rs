//! Persistence images and topological embeddings.
//!
//! Diagram points move to birth-persistence coordinates, a Gaussian is
//! placed at each point, and the density is sampled at pixel centers of a
//! fixed grid and flattened row-major. Channel-averaging the per-channel
//! images yields the topological embedding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::persistence::PersistenceDiagram;

/// Rasterization grid for persistence images.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PiConfig {
    /// Image is resolution x resolution, so the vector length is resolution^2.
    pub resolution: usize,
    /// Gaussian bandwidth.
    pub sigma: f64,
    /// Birth axis range [lo, hi).
    pub birth_range: (f64, f64),
    /// Persistence axis range [lo, hi).
    pub persistence_range: (f64, f64),
    /// Whether essential classes enter the image (persistence clamped to the
    /// top of the range). Off by default: their persistence is unbounded.
    pub include_essential: bool,
}

impl Default for PiConfig {
    fn default() -> Self {
        Self {
            resolution: 8,
            sigma: 0.05,
            birth_range: (0.0, 1.0),
            persistence_range: (0.0, 1.0),
            include_essential: false,
        }
    }
}

impl PiConfig {
    pub fn len(&self) -> usize {
        self.resolution * self.resolution
    }

    pub fn is_empty(&self) -> bool {
        self.resolution == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution == 0 {
            return Err(Error::Config("persistence image resolution must be positive".into()));
        }
        if self.sigma.is_nan() || self.sigma <= 0.0 {
            return Err(Error::Config("sigma must be positive".into()));
        }
        if self.birth_range.1 <= self.birth_range.0
            || self.persistence_range.1 <= self.persistence_range.0
        {
            return Err(Error::Config("ranges must satisfy hi > lo".into()));
        }
        Ok(())
    }

    fn birth_center(&self, u: usize) -> f64 {
        let (lo, hi) = self.birth_range;
        lo + (u as f64 + 0.5) * (hi - lo) / self.resolution as f64
    }

    fn persistence_center(&self, v: usize) -> f64 {
        let (lo, hi) = self.persistence_range;
        lo + (v as f64 + 0.5) * (hi - lo) / self.resolution as f64
    }
}

/// A diagram point in birth-persistence coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BirthPersistence {
    pub birth: f64,
    pub persistence: f64,
    pub essential: bool,
}

/// Maps finite pairs (b, d) to (b, d - b); essential pairs keep an infinite
/// persistence flag. Returned per homology dimension (index = dimension).
pub fn to_birth_persistence(diagram: &PersistenceDiagram) -> [Vec<BirthPersistence>; 2] {
    let mut out: [Vec<BirthPersistence>; 2] = [Vec::new(), Vec::new()];
    for p in &diagram.pairs {
        out[p.dim as usize].push(BirthPersistence {
            birth: p.birth,
            persistence: if p.is_essential() { f64::INFINITY } else { p.death - p.birth },
            essential: p.is_essential(),
        });
    }
    out
}

/// Flattened birth-persistence points of a diagram, both dimensions pooled,
/// ready for rasterization.
pub fn diagram_points(diagram: &PersistenceDiagram) -> Vec<BirthPersistence> {
    let [h0, h1] = to_birth_persistence(diagram);
    h0.into_iter().chain(h1).collect()
}

/// A rasterized persistence image (flattened row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceImage {
    pub values: Vec<f64>,
    pub config: PiConfig,
}

/// Channel-averaged persistence image.
#[derive(Debug, Clone, PartialEq)]
pub struct TopoEmbedding {
    pub values: Vec<f64>,
    pub channel_count: usize,
}

fn effective_point(p: &BirthPersistence, config: &PiConfig) -> Option<(f64, f64)> {
    if p.essential {
        config.include_essential.then_some((p.birth, config.persistence_range.1))
    } else {
        Some((p.birth, p.persistence))
    }
}

/// Sum of unit Gaussians centered at the points, sampled at pixel centers.
/// Points outside the ranges still contribute through their tails.
pub fn rasterize_pi(points: &[BirthPersistence], config: &PiConfig) -> PersistenceImage {
    let r = config.resolution;
    let two_sigma_sq = 2.0 * config.sigma * config.sigma;
    let mut values = vec![0.0; r * r];
    for p in points {
        let Some((b, pers)) = effective_point(p, config) else { continue };
        for u in 0..r {
            let db = config.birth_center(u) - b;
            for v in 0..r {
                let dp = config.persistence_center(v) - pers;
                values[u * r + v] += (-(db * db + dp * dp) / two_sigma_sq).exp();
            }
        }
    }
    PersistenceImage { values, config: config.clone() }
}

/// Analytic gradient of the rasterization w.r.t. each point's (b, p).
/// Clamped essential points get a zero persistence gradient.
pub fn rasterize_backward(
    points: &[BirthPersistence],
    config: &PiConfig,
    grad_image: &[f64],
) -> Vec<(f64, f64)> {
    let r = config.resolution;
    assert_eq!(grad_image.len(), r * r, "gradient length must match image length");
    let two_sigma_sq = 2.0 * config.sigma * config.sigma;
    let inv_sigma_sq = 1.0 / (config.sigma * config.sigma);
    points
        .iter()
        .map(|p| {
            let Some((b, pers)) = effective_point(p, config) else { return (0.0, 0.0) };
            let mut gb = 0.0;
            let mut gp = 0.0;
            for u in 0..r {
                let db = config.birth_center(u) - b;
                for v in 0..r {
                    let dp = config.persistence_center(v) - pers;
                    let g = grad_image[u * r + v];
                    if g == 0.0 {
                        continue;
                    }
                    let k = g * (-(db * db + dp * dp) / two_sigma_sq).exp();
                    gb += k * db * inv_sigma_sq;
                    gp += k * dp * inv_sigma_sq;
                }
            }
            if p.essential {
                gp = 0.0;
            }
            (gb, gp)
        })
        .collect()
}

/// Mean of the per-channel persistence images under one shared config.
pub fn topo_embedding(
    per_channel_diagrams: &[PersistenceDiagram],
    config: &PiConfig,
) -> Result<TopoEmbedding> {
    if per_channel_diagrams.is_empty() {
        return Err(Error::InvalidArgument("channel count must be at least 1".into()));
    }
    config.validate()?;
    let k = per_channel_diagrams.len();
    let mut values = vec![0.0; config.len()];
    for diagram in per_channel_diagrams {
        let pi = rasterize_pi(&diagram_points(diagram), config);
        for (acc, v) in values.iter_mut().zip(&pi.values) {
            *acc += v;
        }
    }
    for v in &mut values {
        *v /= k as f64;
    }
    Ok(TopoEmbedding { values, channel_count: k })
}

/// CSV row per vector: `id,v0,...,v{M-1}`.
pub fn vectors_to_csv(rows: &[(String, &[f64])]) -> String {
    let mut out = String::new();
    if let Some((_, first)) = rows.first() {
        out.push_str("id");
        for i in 0..first.len() {
            out.push_str(&format!(",v{i}"));
        }
        out.push('\n');
    }
    for (id, values) in rows {
        out.push_str(id);
        for v in *values {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cubical::build_lower_star;
    use crate::field::ScalarField;
    use crate::persistence::compute_persistence;

    fn point(b: f64, p: f64) -> BirthPersistence {
        BirthPersistence { birth: b, persistence: p, essential: false }
    }

    #[test]
    fn birth_persistence_mapping() {
        let f = ScalarField::from_rows(&[
            vec![0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap();
        let d = compute_persistence(&build_lower_star(&f).unwrap()).unwrap();
        let [h0, h1] = to_birth_persistence(&d);
        assert_eq!(h1, vec![point(0.0, 1.0)]);
        assert_eq!(h0.len(), 1);
        assert!(h0[0].essential && h0[0].persistence.is_infinite());
    }

    #[test]
    fn empty_diagram_rasterizes_to_zero() {
        let pi = rasterize_pi(&[], &PiConfig::default());
        assert_eq!(pi.values, vec![0.0; 64]);
    }

    #[test]
    fn point_at_pixel_center_hits_one() {
        let cfg = PiConfig::default();
        // Center of pixel (2, 5).
        let b = 0.0 + (2.0 + 0.5) / 8.0;
        let p = 0.0 + (5.0 + 0.5) / 8.0;
        let pi = rasterize_pi(&[point(b, p)], &cfg);
        assert!((pi.values[2 * 8 + 5] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn duplicated_point_doubles_image() {
        let cfg = PiConfig::default();
        let single = rasterize_pi(&[point(0.3, 0.4)], &cfg);
        let double = rasterize_pi(&[point(0.3, 0.4), point(0.3, 0.4)], &cfg);
        for (s, d) in single.values.iter().zip(&double.values) {
            assert!((d - 2.0 * s).abs() < 1e-15);
        }
    }

    #[test]
    fn rasterization_is_additive_over_disjoint_point_sets() {
        let cfg = PiConfig::default();
        let a = vec![point(0.1, 0.2), point(0.7, 0.1)];
        let b = vec![point(0.4, 0.6)];
        let union: Vec<_> = a.iter().chain(&b).copied().collect();
        let pi_union = rasterize_pi(&union, &cfg);
        let pi_a = rasterize_pi(&a, &cfg);
        let pi_b = rasterize_pi(&b, &cfg);
        for i in 0..cfg.len() {
            assert!((pi_union.values[i] - pi_a.values[i] - pi_b.values[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn embedding_of_identical_channels_equals_single_image() {
        let f = ScalarField::from_rows(&[
            vec![0.0, 0.2, 0.1],
            vec![0.4, 0.9, 0.3],
            vec![0.2, 0.5, 0.0],
        ])
        .unwrap();
        let d = compute_persistence(&build_lower_star(&f).unwrap()).unwrap();
        let cfg = PiConfig::default();
        let single = rasterize_pi(&diagram_points(&d), &cfg);
        let te = topo_embedding(&vec![d.clone(); 4], &cfg).unwrap();
        assert_eq!(te.channel_count, 4);
        for (a, b) in te.values.iter().zip(&single.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn embedding_with_empty_channel_halves() {
        let f = ScalarField::from_rows(&[vec![0.0, 0.3], vec![0.6, 1.0]]).unwrap();
        let d = compute_persistence(&build_lower_star(&f).unwrap()).unwrap();
        let cfg = PiConfig { include_essential: false, ..PiConfig::default() };
        let te = topo_embedding(&[d.clone(), PersistenceDiagram::default()], &cfg).unwrap();
        let single = rasterize_pi(&diagram_points(&d), &cfg);
        for (a, b) in te.values.iter().zip(&single.values) {
            assert!((a - 0.5 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn embedding_is_exact_channel_mean_on_random_fields() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(40);
        for _ in 0..10 {
            let field = |rng: &mut rand_chacha::ChaCha8Rng| {
                let vals: Vec<f64> = (0..36).map(|_| rng.random()).collect();
                let f = ScalarField::new(6, 6, vals).unwrap();
                compute_persistence(&build_lower_star(&f).unwrap()).unwrap()
            };
            let (a, b) = (field(&mut rng), field(&mut rng));
            let cfg = PiConfig::default();
            let te = topo_embedding(&[a.clone(), b.clone()], &cfg).unwrap();
            let pa = rasterize_pi(&diagram_points(&a), &cfg);
            let pb = rasterize_pi(&diagram_points(&b), &cfg);
            for i in 0..cfg.len() {
                let expect = (pa.values[i] + pb.values[i]) / 2.0;
                assert!((te.values[i] - expect).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn embedding_requires_channels() {
        assert!(topo_embedding(&[], &PiConfig::default()).is_err());
    }

    #[test]
    fn backward_zero_gradient() {
        let cfg = PiConfig::default();
        let grads = rasterize_backward(&[point(0.3, 0.3)], &cfg, &vec![0.0; cfg.len()]);
        assert_eq!(grads, vec![(0.0, 0.0)]);
    }

    #[test]
    fn backward_at_gaussian_peak_is_zero() {
        let cfg = PiConfig::default();
        let b = (2.0 + 0.5) / 8.0;
        let p = (5.0 + 0.5) / 8.0;
        let mut g = vec![0.0; cfg.len()];
        g[2 * 8 + 5] = 1.0;
        let grads = rasterize_backward(&[point(b, p)], &cfg, &g);
        assert!(grads[0].0.abs() < 1e-14 && grads[0].1.abs() < 1e-14);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let cfg = PiConfig::default();
        let points = vec![point(0.21, 0.37), point(0.55, 0.12), point(0.83, 0.64)];
        let grad_image: Vec<f64> =
            (0..cfg.len()).map(|i| ((i as f64 * 0.37).sin() + 0.2) * 0.5).collect();
        let analytic = rasterize_backward(&points, &cfg, &grad_image);
        let loss = |pts: &[BirthPersistence]| -> f64 {
            rasterize_pi(pts, &cfg).values.iter().zip(&grad_image).map(|(v, g)| v * g).sum()
        };
        let h = 1e-7;
        for (i, _) in points.iter().enumerate() {
            for coord in 0..2 {
                let mut plus = points.clone();
                let mut minus = points.clone();
                if coord == 0 {
                    plus[i].birth += h;
                    minus[i].birth -= h;
                } else {
                    plus[i].persistence += h;
                    minus[i].persistence -= h;
                }
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
                let a = if coord == 0 { analytic[i].0 } else { analytic[i].1 };
                let denom = a.abs().max(fd.abs()).max(1e-8);
                assert!(
                    (fd - a).abs() / denom <= 1e-6,
                    "point {i} coord {coord}: fd {fd} vs analytic {a}"
                );
            }
        }
    }

    #[test]
    fn essential_point_clamped_and_included_when_configured() {
        let cfg = PiConfig { include_essential: true, ..PiConfig::default() };
        let essential = BirthPersistence { birth: 0.3, persistence: f64::INFINITY, essential: true };
        let clamped = point(0.3, cfg.persistence_range.1);
        let pi_e = rasterize_pi(&[essential], &cfg);
        let pi_c = rasterize_pi(&[clamped], &cfg);
        assert_eq!(pi_e.values, pi_c.values);
        // Excluded (and zero-gradient) by default.
        let default_cfg = PiConfig::default();
        assert_eq!(rasterize_pi(&[essential], &default_cfg).values, vec![0.0; 64]);
        let mut g = vec![0.0; cfg.len()];
        g[10] = 1.0;
        assert_eq!(rasterize_backward(&[essential], &cfg, &g)[0].1, 0.0);
    }

    #[test]
    fn vector_csv_shape() {
        let rows = vec![("a".to_string(), &[1.0, 2.5][..]), ("b".to_string(), &[0.0, 3.0][..])];
        let csv = vectors_to_csv(&rows);
        assert_eq!(csv, "id,v0,v1\na,1,2.5\nb,0,3\n");
    }
}
