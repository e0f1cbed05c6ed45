//! Dataset ingestion (IDX and CIFAR-10 binary), normalization, client shard
//! materialization, and a synthetic disk/annulus generator whose two classes
//! differ topologically (annuli carry a persistent loop, disks do not).

use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;
use crate::partitions::{ClientShard, Partition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// Per-channel normalization constants, recorded so raw pixels can be
/// recovered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// N x C x H x W, mean-std normalized.
    pub images: Tensor,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub split: Split,
    pub normalization: Normalization,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.images.shape[1]
    }

    pub fn image_dims(&self) -> (usize, usize, usize) {
        (self.images.shape[1], self.images.shape[2], self.images.shape[3])
    }

    /// Normalized image tensor for a batch of indices (1 x C x H x W each).
    pub fn batch(&self, indices: &[usize]) -> Tensor {
        let (c, h, w) = self.image_dims();
        let plane = c * h * w;
        let mut data = Vec::with_capacity(indices.len() * plane);
        for &i in indices {
            data.extend_from_slice(&self.images.data[i * plane..(i + 1) * plane]);
        }
        Tensor { shape: vec![indices.len(), c, h, w], data }
    }

    pub fn batch_labels(&self, indices: &[usize]) -> Vec<usize> {
        indices.iter().map(|&i| self.labels[i]).collect()
    }

    /// Raw (denormalized) pixels of one image.
    pub fn raw_image(&self, index: usize) -> Tensor {
        let (c, h, w) = self.image_dims();
        let plane = h * w;
        let mut data = Vec::with_capacity(c * plane);
        for ch in 0..c {
            let base = (index * c + ch) * plane;
            for i in 0..plane {
                data.push(
                    self.images.data[base + i] * self.normalization.std[ch]
                        + self.normalization.mean[ch],
                );
            }
        }
        Tensor { shape: vec![c, h, w], data }
    }

    /// Class-stratified prefix subsample: the first `floor(count/K)` samples
    /// of every class (remainder spread over the lowest class ids).
    pub fn stratified_subsample(&self, count: usize) -> Dataset {
        let count = count.min(self.len());
        let quota_base = count / self.classes;
        let remainder = count % self.classes;
        let mut taken: Vec<usize> = Vec::with_capacity(count);
        let mut budget: Vec<usize> =
            (0..self.classes).map(|c| quota_base + usize::from(c < remainder)).collect();
        for (i, &y) in self.labels.iter().enumerate() {
            if budget[y] > 0 {
                budget[y] -= 1;
                taken.push(i);
            }
        }
        self.subset(&taken)
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            images: self.batch(indices),
            labels: self.batch_labels(indices),
            classes: self.classes,
            split: self.split,
            normalization: self.normalization.clone(),
        }
    }

    /// Client shard view: index subset for Q/L/K partitions, full noisy copy
    /// for N-skew (noise drawn from the partition seed and client id; a zero
    /// scale leaves the data bit-identical).
    pub fn client_shard(&self, partition: &Partition, client: &ClientShard) -> Result<Dataset> {
        match (&client.indices, client.sigma) {
            (Some(indices), _) => {
                if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
                    return Err(Error::InvalidArgument(format!(
                        "partition index {bad} out of range for dataset of {}",
                        self.len()
                    )));
                }
                Ok(self.subset(indices))
            }
            (None, Some(sigma)) => {
                let mut shard = self.clone();
                if sigma > 0.0 {
                    let mut rng = ChaCha8Rng::seed_from_u64(
                        crate::config::seed_stream(partition.seed, &format!("nskew:{}", client.id)),
                    );
                    let normal = Normal::new(0.0, sigma).expect("sigma > 0");
                    for v in &mut shard.images.data {
                        *v += normal.sample(&mut rng);
                    }
                }
                Ok(shard)
            }
            (None, None) => {
                Err(Error::InvalidArgument("client shard has neither indices nor sigma".into()))
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn normalize_images(
    raw: Vec<f64>,
    count: usize,
    channels: usize,
    plane: usize,
    split: Split,
    labels: Vec<usize>,
    classes: usize,
    reuse: Option<&Normalization>,
) -> Dataset {
    let normalization = match reuse {
        Some(n) => n.clone(),
        None => {
            let mut mean = vec![0.0; channels];
            let mut std = vec![1.0; channels];
            if count > 0 {
                for ch in 0..channels {
                    let mut sum = 0.0;
                    let mut sum_sq = 0.0;
                    for n in 0..count {
                        let base = (n * channels + ch) * plane;
                        for i in 0..plane {
                            let v = raw[base + i];
                            sum += v;
                            sum_sq += v * v;
                        }
                    }
                    let n_px = (count * plane) as f64;
                    mean[ch] = sum / n_px;
                    let var = (sum_sq / n_px - mean[ch] * mean[ch]).max(0.0);
                    std[ch] = if var > 0.0 { var.sqrt() } else { 1.0 };
                }
            }
            Normalization { mean, std }
        }
    };
    let mut data = raw;
    for n in 0..count {
        for ch in 0..channels {
            let base = (n * channels + ch) * plane;
            for i in 0..plane {
                data[base + i] = (data[base + i] - normalization.mean[ch]) / normalization.std[ch];
            }
        }
    }
    let (h, w) = (plane_isqrt(plane), plane_isqrt(plane));
    Dataset {
        images: Tensor { shape: vec![count, channels, h, w], data },
        labels,
        classes,
        split,
        normalization,
    }
}

fn plane_isqrt(plane: usize) -> usize {
    let r = (plane as f64).sqrt().round() as usize;
    debug_assert_eq!(r * r, plane, "images must be square");
    r
}

fn read_maybe_gzip(path: &Path) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut raw)?;
    if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..]).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|s| u32::from_be_bytes(s.try_into().unwrap()))
        .ok_or_else(|| Error::Parse {
            location: format!("{}, byte {offset}", path.display()),
            message: "truncated header".into(),
        })
}

/// Parses an IDX image/label file pair (raw or gzip), scales pixels to
/// [0, 1], and applies mean-std normalization.
pub fn load_idx(
    images_path: &Path,
    labels_path: &Path,
    split: Split,
    reuse: Option<&Normalization>,
) -> Result<Dataset> {
    let img = read_maybe_gzip(images_path)?;
    let magic = be_u32(&img, 0, images_path)?;
    if magic != 0x0000_0803 {
        return Err(Error::Parse {
            location: format!("{}, byte 0", images_path.display()),
            message: format!("bad image magic {magic:#010x}, expected 0x00000803"),
        });
    }
    let count = be_u32(&img, 4, images_path)? as usize;
    let rows = be_u32(&img, 8, images_path)? as usize;
    let cols = be_u32(&img, 12, images_path)? as usize;
    let expected = 16 + count * rows * cols;
    if img.len() != expected {
        return Err(Error::Parse {
            location: format!("{}, byte {}", images_path.display(), img.len().min(expected)),
            message: format!(
                "payload of {} bytes does not match {count} images of {rows}x{cols}",
                img.len() - 16.min(img.len())
            ),
        });
    }

    let lab = read_maybe_gzip(labels_path)?;
    let lmagic = be_u32(&lab, 0, labels_path)?;
    if lmagic != 0x0000_0801 {
        return Err(Error::Parse {
            location: format!("{}, byte 0", labels_path.display()),
            message: format!("bad label magic {lmagic:#010x}, expected 0x00000801"),
        });
    }
    let lcount = be_u32(&lab, 4, labels_path)? as usize;
    if lab.len() != 8 + lcount {
        return Err(Error::Parse {
            location: format!("{}, byte {}", labels_path.display(), lab.len().min(8 + lcount)),
            message: format!("payload does not match {lcount} labels"),
        });
    }
    if lcount != count {
        return Err(Error::Parse {
            location: format!("{}, byte 4", labels_path.display()),
            message: format!("{lcount} labels for {count} images"),
        });
    }
    let raw: Vec<f64> = img[16..].iter().map(|&b| b as f64 / 255.0).collect();
    let labels: Vec<usize> = lab[8..].iter().map(|&b| b as usize).collect();
    let classes = labels.iter().max().map_or(1, |&m| m + 1);
    Ok(normalize_images(raw, count, 1, rows * cols, split, labels, classes, reuse))
}

/// Parses CIFAR-10 binary batch files (3073-byte records, channel-planar).
pub fn load_cifar10(paths: &[&Path], split: Split, reuse: Option<&Normalization>) -> Result<Dataset> {
    let mut raw: Vec<f64> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    for path in paths {
        let bytes = std::fs::read(path)?;
        if bytes.len() % 3073 != 0 {
            return Err(Error::Parse {
                location: format!("{}, byte {}", path.display(), bytes.len() - bytes.len() % 3073),
                message: format!("file length {} is not a multiple of 3073", bytes.len()),
            });
        }
        for record in bytes.chunks_exact(3073) {
            let label = record[0] as usize;
            if label > 9 {
                return Err(Error::Parse {
                    location: format!("{}, record {}", path.display(), labels.len()),
                    message: format!("label {label} out of range 0..10"),
                });
            }
            labels.push(label);
            raw.extend(record[1..].iter().map(|&b| b as f64 / 255.0));
        }
    }
    let count = labels.len();
    Ok(normalize_images(raw, count, 3, 32 * 32, split, labels, 10, reuse))
}

/// Synthetic two-class dataset: filled disks (label 0) and annuli (label 1),
/// drawn with a soft edge on a dark background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub image_size: usize,
    /// Disk radius range [lo, hi].
    pub disk_radius: (f64, f64),
    /// Annulus outer radius range [lo, hi].
    pub annulus_outer_radius: (f64, f64),
    /// Annulus ring thickness range [lo, hi].
    pub annulus_thickness: (f64, f64),
    /// Depth range of the azimuthal brightness dip on the ring. The dip sets
    /// the level at which the enclosed hole merges with the background, so
    /// the annulus class carries a mid-range zero-dimensional feature on top
    /// of its loop.
    pub annulus_dip_depth: (f64, f64),
    /// Scale of additive low-frequency noise (Gaussian pixels smoothed by a
    /// 3x3 box filter, then rescaled back to this standard deviation). The
    /// smoothing keeps activation maps from sprouting spurious critical
    /// points while still perturbing the shapes.
    pub noise: f64,
    pub count_per_class: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            image_size: 28,
            disk_radius: (5.5, 9.0),
            annulus_outer_radius: (7.0, 10.0),
            annulus_thickness: (3.0, 4.5),
            annulus_dip_depth: (0.3, 0.34),
            noise: 0.0,
            count_per_class: 100,
            seed: 0,
        }
    }
}

const EDGE_WIDTH: f64 = 2.0;
const CENTER_JITTER: f64 = 1.5;

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let margin = CENTER_JITTER + EDGE_WIDTH / 2.0 + 1.0;
        let half = self.image_size as f64 / 2.0;
        let ranges = [self.disk_radius, self.annulus_outer_radius, self.annulus_thickness];
        if ranges.iter().any(|&(lo, hi)| lo.is_nan() || lo <= 0.0 || hi < lo) {
            return Err(Error::Config("radius ranges must be positive with hi >= lo".into()));
        }
        if self.disk_radius.1 + margin > half || self.annulus_outer_radius.1 + margin > half {
            return Err(Error::Config(format!(
                "shapes do not fit: max radius + margin {margin} exceeds half size {half}"
            )));
        }
        if self.annulus_thickness.1 >= self.annulus_outer_radius.0 {
            return Err(Error::Config(
                "annulus thickness must stay below the outer radius (inner radius > 0)".into(),
            ));
        }
        let (dlo, dhi) = self.annulus_dip_depth;
        if !(dlo >= 0.0 && dhi >= dlo && dhi < 0.5) {
            return Err(Error::Config("annulus_dip_depth must satisfy 0 <= lo <= hi < 0.5".into()));
        }
        if self.count_per_class == 0 {
            return Err(Error::Config("count_per_class must be positive".into()));
        }
        if self.noise < 0.0 {
            return Err(Error::Config("noise must be non-negative".into()));
        }
        Ok(())
    }
}

fn clamp01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Deterministic generator; samples alternate disk, annulus, disk, ...
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let size = spec.image_size;
    let plane = size * size;
    let count = 2 * spec.count_per_class;
    let mut raw = Vec::with_capacity(count * plane);
    let mut labels = Vec::with_capacity(count);
    // 3x3 box smoothing shrinks the variance of iid noise by roughly the
    // kernel mass; compensate so the delivered scale matches `noise`.
    let noise_dist =
        if spec.noise > 0.0 { Some(Normal::new(0.0, spec.noise * 2.2).expect("noise > 0")) } else { None };
    for i in 0..count {
        let label = i % 2;
        labels.push(label);
        let cx = size as f64 / 2.0 + rng.random_range(-CENTER_JITTER..CENTER_JITTER);
        let cy = size as f64 / 2.0 + rng.random_range(-CENTER_JITTER..CENTER_JITTER);
        let shape_value: Box<dyn Fn(f64, f64) -> f64> = if label == 0 {
            let (lo, hi) = spec.disk_radius;
            let radius = rng.random_range(lo..=hi);
            Box::new(move |dist, _| clamp01((radius - dist) / EDGE_WIDTH + 0.5))
        } else {
            let (olo, ohi) = spec.annulus_outer_radius;
            let (tlo, thi) = spec.annulus_thickness;
            let (dlo, dhi) = spec.annulus_dip_depth;
            let outer = rng.random_range(olo..=ohi);
            let thickness = rng.random_range(tlo..=thi);
            let depth = rng.random_range(dlo..=dhi);
            let dip_angle = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let mid = outer - thickness / 2.0;
            let half = thickness / 2.0;
            Box::new(move |dist, angle| {
                let ring = clamp01((half - (dist - mid).abs()) / EDGE_WIDTH + 0.5);
                let mut delta = (angle - dip_angle).abs();
                if delta > std::f64::consts::PI {
                    delta = 2.0 * std::f64::consts::PI - delta;
                }
                ring * (1.0 - depth * (-(delta / 0.5).powi(2)).exp())
            })
        };
        let base = raw.len();
        for r in 0..size {
            for c in 0..size {
                let dy = r as f64 + 0.5 - cy;
                let dx = c as f64 + 0.5 - cx;
                raw.push(shape_value((dx * dx + dy * dy).sqrt(), dy.atan2(dx)));
            }
        }
        if let Some(d) = &noise_dist {
            let rough: Vec<f64> = (0..plane).map(|_| d.sample(&mut rng)).collect();
            for r in 0..size {
                for c in 0..size {
                    let mut sum = 0.0;
                    let mut n = 0.0;
                    for rr in r.saturating_sub(1)..=(r + 1).min(size - 1) {
                        for cc in c.saturating_sub(1)..=(c + 1).min(size - 1) {
                            sum += rough[rr * size + cc];
                            n += 1.0;
                        }
                    }
                    raw[base + r * size + c] += sum / n;
                }
            }
        }
    }
    Ok(normalize_images(raw, count, 1, plane, Split::Train, labels, 2, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ScalarField;
    use crate::persistence::compute_diagram_fast;

    fn write_idx_fixture(dir: &Path, pixels: &[u8], count: u32, rows: u32, cols: u32) -> (std::path::PathBuf, std::path::PathBuf) {
        let mut img = Vec::new();
        img.extend_from_slice(&0x0000_0803u32.to_be_bytes());
        img.extend_from_slice(&count.to_be_bytes());
        img.extend_from_slice(&rows.to_be_bytes());
        img.extend_from_slice(&cols.to_be_bytes());
        img.extend_from_slice(pixels);
        let mut lab = Vec::new();
        lab.extend_from_slice(&0x0000_0801u32.to_be_bytes());
        lab.extend_from_slice(&count.to_be_bytes());
        lab.extend((0..count).map(|i| (i % 2) as u8));
        let ip = dir.join("images.idx");
        let lp = dir.join("labels.idx");
        std::fs::write(&ip, &img).unwrap();
        std::fs::write(&lp, &lab).unwrap();
        (ip, lp)
    }

    #[test]
    fn idx_fixture_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let pixels: Vec<u8> = (0..32).map(|i| (i * 8) as u8).collect();
        let (ip, lp) = write_idx_fixture(dir.path(), &pixels, 2, 4, 4);
        let ds = load_idx(&ip, &lp, Split::Train, None).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.image_dims(), (1, 4, 4));
        assert_eq!(ds.labels, vec![0, 1]);
        // Denormalization recovers the raw pixel scale exactly.
        let raw = ds.raw_image(1);
        for (i, v) in raw.data.iter().enumerate() {
            let expect = pixels[16 + i] as f64 / 255.0;
            assert!((v - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn idx_label_magic_on_images_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = write_idx_fixture(dir.path(), &[0u8; 32], 2, 4, 4);
        // Swap the files: label file has the wrong magic for images.
        let err = load_idx(&lp, &ip, Split::Train, None);
        assert!(err.is_err());
    }

    #[test]
    fn idx_header_mutations_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let pixels: Vec<u8> = (0..32).map(|i| i as u8) .collect();
        let (ip, lp) = write_idx_fixture(dir.path(), &pixels, 2, 4, 4);
        let original = std::fs::read(&ip).unwrap();
        let mutated_path = dir.path().join("mutated.idx");
        for offset in 0..16 {
            for delta in [1u8, 0x40, 0xff] {
                let mut bytes = original.clone();
                bytes[offset] = bytes[offset].wrapping_add(delta);
                std::fs::write(&mutated_path, &bytes).unwrap();
                assert!(
                    load_idx(&mutated_path, &lp, Split::Train, None).is_err(),
                    "header byte {offset} + {delta} accepted"
                );
            }
        }
    }

    #[test]
    fn idx_gzip_transparent() {
        let dir = tempfile::tempdir().unwrap();
        let pixels: Vec<u8> = (0..32).map(|i| (255 - i) as u8).collect();
        let (ip, lp) = write_idx_fixture(dir.path(), &pixels, 2, 4, 4);
        for p in [&ip, &lp] {
            let raw = std::fs::read(p).unwrap();
            let mut enc =
                flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
            std::io::Write::write_all(&mut enc, &raw).unwrap();
            std::fs::write(p, enc.finish().unwrap()).unwrap();
        }
        let ds = load_idx(&ip, &lp, Split::Train, None).unwrap();
        assert_eq!(ds.len(), 2);
        let raw = ds.raw_image(0);
        assert!((raw.data[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cifar_record_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut record = vec![7u8];
        record.extend((0..3072).map(|i| (i % 251) as u8));
        let path = dir.path().join("batch.bin");
        std::fs::write(&path, &record).unwrap();
        let ds = load_cifar10(&[&path], Split::Train, None).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.labels, vec![7]);
        assert_eq!(ds.image_dims(), (3, 32, 32));
        let raw = ds.raw_image(0);
        for (i, v) in raw.data.iter().enumerate() {
            assert!((v - (i % 251) as f64 / 255.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cifar_empty_file_is_valid_and_bad_length_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let empty = dir.path().join("empty.bin");
        std::fs::write(&empty, b"").unwrap();
        let ds = load_cifar10(&[&empty], Split::Test, None).unwrap();
        assert!(ds.is_empty());
        let bad = dir.path().join("bad.bin");
        std::fs::write(&bad, vec![0u8; 3072]).unwrap();
        assert!(load_cifar10(&[&bad], Split::Test, None).is_err());
    }

    #[test]
    fn normalize_denormalize_round_trip() {
        let spec = SyntheticSpec { count_per_class: 3, ..SyntheticSpec::default() };
        let ds = gen_synthetic(&spec).unwrap();
        // raw_image inverts the normalization; synthetic raw values live in
        // [0, 1] before noise.
        for i in 0..ds.len() {
            let raw = ds.raw_image(i);
            assert!(raw.data.iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)));
        }
    }

    #[test]
    fn synthetic_deterministic_and_balanced() {
        let spec = SyntheticSpec { count_per_class: 5, ..SyntheticSpec::default() };
        let a = gen_synthetic(&spec).unwrap();
        let b = gen_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.labels.iter().filter(|&&y| y == 0).count(), 5);
        assert_eq!(a.labels.iter().filter(|&&y| y == 1).count(), 5);
    }

    #[test]
    fn synthetic_infeasible_radii_rejected() {
        let spec = SyntheticSpec {
            annulus_outer_radius: (12.0, 20.0),
            ..SyntheticSpec::default()
        };
        assert!(gen_synthetic(&spec).is_err());
        let spec = SyntheticSpec {
            annulus_thickness: (8.0, 9.0),
            ..SyntheticSpec::default()
        };
        assert!(gen_synthetic(&spec).is_err());
    }

    fn inverted_field(ds: &Dataset, index: usize) -> ScalarField {
        let raw = ds.raw_image(index);
        let size = raw.shape[1];
        ScalarField::new(size, size, raw.data.iter().map(|&v| 1.0 - v).collect()).unwrap()
    }

    #[test]
    fn annulus_has_one_persistent_loop_disk_has_none() {
        let spec = SyntheticSpec { count_per_class: 4, ..SyntheticSpec::default() };
        let ds = gen_synthetic(&spec).unwrap();
        for i in 0..ds.len() {
            let (_, diagram) = compute_diagram_fast(&inverted_field(&ds, i)).unwrap();
            let strong: Vec<f64> = diagram
                .pairs_of_dim(1)
                .filter(|p| p.persistence() > 0.5)
                .map(|p| p.persistence())
                .collect();
            if ds.labels[i] == 1 {
                assert_eq!(strong.len(), 1, "annulus {i} should carry exactly one loop");
            } else {
                assert!(
                    diagram.pairs_of_dim(1).all(|p| p.persistence() <= 0.1),
                    "disk {i} should have no persistent loop"
                );
            }
        }
    }

    #[test]
    fn stratified_subsample_balances_classes() {
        let spec = SyntheticSpec { count_per_class: 20, ..SyntheticSpec::default() };
        let ds = gen_synthetic(&spec).unwrap();
        let sub = ds.stratified_subsample(10);
        assert_eq!(sub.len(), 10);
        assert_eq!(sub.labels.iter().filter(|&&y| y == 0).count(), 5);
        assert_eq!(sub.labels.iter().filter(|&&y| y == 1).count(), 5);
    }

    #[test]
    fn n_skew_shard_statistics() {
        let spec = SyntheticSpec { count_per_class: 10, ..SyntheticSpec::default() };
        let ds = gen_synthetic(&spec).unwrap();
        let partition = crate::partitions::n_skew(5, 0.5, 99).unwrap();
        let expected = [0.0, 0.125, 0.25, 0.375, 0.5];
        for (j, client) in partition.clients.iter().enumerate() {
            let shard = ds.client_shard(&partition, client).unwrap();
            let n = shard.images.data.len();
            assert!(n >= 10_000, "need enough pixels for the statistic");
            if j == 0 {
                assert_eq!(shard.images.data, ds.images.data, "control client must be clean");
                continue;
            }
            let diffs: Vec<f64> = shard
                .images
                .data
                .iter()
                .zip(&ds.images.data)
                .map(|(a, b)| a - b)
                .collect();
            let mean: f64 = diffs.iter().sum::<f64>() / n as f64;
            let var: f64 = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n as f64;
            let sd = var.sqrt();
            assert!(
                (sd - expected[j]).abs() <= 0.05 * expected[j],
                "client {j}: sd {sd} vs expected {}",
                expected[j]
            );
        }
    }
}
