//! Persistence images, topological embeddings, and diagram distances.
//!
//! ```bash
//! cargo run -p fedtopo --example embeddings
//! ```

use fedtopo::cubical::build_lower_star;
use fedtopo::distance::{
    bottleneck_distance, vector_distance, wasserstein_distance, VectorDistance,
};
use fedtopo::field::ScalarField;
use fedtopo::persistence::compute_persistence;
use fedtopo::pimage::{diagram_points, rasterize_pi, topo_embedding, PiConfig};

fn diagram_of(rows: &[Vec<f64>]) -> fedtopo::Result<fedtopo::persistence::PersistenceDiagram> {
    let field = ScalarField::from_rows(rows)?;
    let (normalized, _) = field.minmax_normalized();
    compute_persistence(&build_lower_star(&normalized)?)
}

fn main() -> fedtopo::Result<()> {
    let ring = diagram_of(&[
        vec![0.0, 0.0, 0.0, 0.0],
        vec![0.0, 0.9, 0.8, 0.0],
        vec![0.0, 0.7, 1.0, 0.0],
        vec![0.0, 0.0, 0.0, 0.0],
    ])?;
    let bump = diagram_of(&[
        vec![0.0, 0.1, 0.1, 0.0],
        vec![0.1, 0.8, 0.9, 0.1],
        vec![0.1, 0.9, 1.0, 0.1],
        vec![0.0, 0.1, 0.1, 0.0],
    ])?;

    let config = PiConfig::default();
    let pi = rasterize_pi(&diagram_points(&ring), &config);
    println!("ring image mass: {:.4}", pi.values.iter().sum::<f64>());

    // Channel-averaged embedding over the two diagrams.
    let te = topo_embedding(&[ring.clone(), bump.clone()], &config)?;
    println!("two-channel embedding mass: {:.4}", te.values.iter().sum::<f64>());

    println!("bottleneck(ring, bump)    = {:.4}", bottleneck_distance(&ring, &bump));
    println!("wasserstein-2(ring, bump) = {:.4}", wasserstein_distance(&ring, &bump, 2.0));
    let pi_bump = rasterize_pi(&diagram_points(&bump), &config);
    println!(
        "pi euclidean              = {:.4}",
        vector_distance(&pi.values, &pi_bump.values, VectorDistance::Euclidean)
    );
    println!(
        "pi cosine                 = {:.4}",
        vector_distance(&pi.values, &pi_bump.values, VectorDistance::Cosine)
    );
    Ok(())
}
