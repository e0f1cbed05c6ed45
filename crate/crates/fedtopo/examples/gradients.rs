//! Gradients through the topology node, verified by finite differences.
//!
//! The record computes an embedding from a raw activation stack and pulls a
//! squared-distance loss back through rasterization, the pairing, and the
//! per-channel normalization onto individual activation pixels.
//!
//! ```bash
//! cargo run -p fedtopo --example gradients
//! ```

use fedtopo::nn::{Graph, Tensor};
use fedtopo::pimage::PiConfig;

fn loss_of(activation: &Tensor, config: &PiConfig, reference: &Tensor) -> f64 {
    let mut graph = Graph::new();
    let x = graph.leaf(activation.clone());
    let te = graph.topo_embed(x, config).expect("valid activation");
    let loss = graph.squared_dist_to_const(te, reference.clone()).expect("shape");
    graph.value(loss).scalar()
}

fn main() -> fedtopo::Result<()> {
    // One sample, two 5x5 channels with all-distinct values so the critical
    // cells are stable under small perturbations.
    let values: Vec<f64> = (0..50).map(|i| ((i * 29) % 50) as f64 / 50.0).collect();
    let activation = Tensor::from_vec(&[1, 2, 5, 5], values)?;
    let config = PiConfig::default();
    let reference = Tensor::from_vec(&[1, 64], vec![0.05; 64])?;

    let mut graph = Graph::new();
    let x = graph.leaf(activation.clone());
    let te = graph.topo_embed(x, &config)?;
    let loss = graph.squared_dist_to_const(te, reference.clone())?;
    println!("loss = {:.6}", graph.value(loss).scalar());

    let grads = graph.backward(loss)?;
    let analytic = grads[x.0].as_ref().expect("activation reaches the loss");

    let h = 1e-6;
    let mut worst = 0.0f64;
    for i in 0..activation.numel() {
        let mut plus = activation.clone();
        plus.data[i] += h;
        let mut minus = activation.clone();
        minus.data[i] -= h;
        let fd = (loss_of(&plus, &config, &reference) - loss_of(&minus, &config, &reference))
            / (2.0 * h);
        let denom = analytic.data[i].abs().max(fd.abs()).max(1e-8);
        worst = worst.max((fd - analytic.data[i]).abs() / denom);
    }
    println!("max relative error vs central differences: {worst:.2e}");
    println!(
        "nonzero gradient pixels: {} of {}",
        analytic.data.iter().filter(|g| **g != 0.0).count(),
        analytic.numel()
    );
    Ok(())
}
