//! Dataset ingestion: synthetic generation and the IDX container format.
//!
//! Builds a tiny IDX pair in a temp directory, reads it back, and shows the
//! topological split between the two synthetic classes.
//!
//! ```bash
//! cargo run -p fedtopo --example datasets
//! ```

use fedtopo::data::{gen_synthetic, load_idx, Split, SyntheticSpec};
use fedtopo::field::ScalarField;
use fedtopo::persistence::compute_diagram_fast;

fn main() -> fedtopo::Result<()> {
    let ds = gen_synthetic(&SyntheticSpec { count_per_class: 3, seed: 2, ..Default::default() })?;
    println!("synthetic: {} samples of {:?}", ds.len(), ds.image_dims());
    for i in 0..ds.len() {
        let raw = ds.raw_image(i);
        // Invert so the bright shape is low and drives the sublevel sets.
        let inverted: Vec<f64> = raw.data.iter().map(|v| 1.0 - v).collect();
        let field = ScalarField::new(raw.shape[1], raw.shape[2], inverted)?;
        let (_, diagram) = compute_diagram_fast(&field)?;
        let strong_loops =
            diagram.pairs_of_dim(1).filter(|p| p.persistence() > 0.5).count();
        println!(
            "  sample {i} ({}) -> persistent loops: {strong_loops}",
            if ds.labels[i] == 0 { "disk" } else { "annulus" },
        );
    }

    // Round-trip through the IDX container format.
    let dir = std::env::temp_dir().join("fedtopo-datasets-example");
    std::fs::create_dir_all(&dir)?;
    let images_path = dir.join("images.idx");
    let labels_path = dir.join("labels.idx");
    let mut images = Vec::new();
    images.extend_from_slice(&0x0000_0803u32.to_be_bytes());
    images.extend_from_slice(&2u32.to_be_bytes());
    images.extend_from_slice(&4u32.to_be_bytes());
    images.extend_from_slice(&4u32.to_be_bytes());
    images.extend((0..32).map(|i| (i * 7) as u8));
    std::fs::write(&images_path, images)?;
    let mut labels = Vec::new();
    labels.extend_from_slice(&0x0000_0801u32.to_be_bytes());
    labels.extend_from_slice(&2u32.to_be_bytes());
    labels.extend_from_slice(&[3u8, 8u8]);
    std::fs::write(&labels_path, labels)?;

    let parsed = load_idx(&images_path, &labels_path, Split::Train, None)?;
    println!(
        "idx fixture: {} images of {:?}, labels {:?}, channel mean {:.4}",
        parsed.len(),
        parsed.image_dims(),
        parsed.labels,
        parsed.normalization.mean[0]
    );
    Ok(())
}
