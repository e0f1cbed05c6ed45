//! The four non-I.I.D. client partition schemes.
//!
//! ```bash
//! cargo run -p fedtopo --example partitioning
//! ```

use fedtopo::partitions::{fixed_k_skew, l_skew, n_skew, q_skew, Partition};

fn histogram(labels: &[usize], indices: &[usize], classes: usize) -> Vec<usize> {
    let mut hist = vec![0; classes];
    for &i in indices {
        hist[labels[i]] += 1;
    }
    hist
}

fn describe(name: &str, partition: &Partition, labels: &[usize], classes: usize) {
    println!("{name}:");
    for client in &partition.clients {
        match (&client.indices, client.sigma) {
            (Some(idx), _) => println!(
                "  client {}: {:>4} samples, labels {:?}",
                client.id,
                idx.len(),
                histogram(labels, idx, classes)
            ),
            (None, Some(sigma)) => {
                println!("  client {}: all samples + noise sigma {:.3}", client.id, sigma)
            }
            _ => unreachable!(),
        }
    }
}

fn main() -> fedtopo::Result<()> {
    // 600 samples over 6 classes, cycled.
    let labels: Vec<usize> = (0..600).map(|i| i % 6).collect();

    describe("quantity skew (alpha 0.5)", &q_skew(labels.len(), 4, 0.5, 7)?, &labels, 6);
    describe("label skew (alpha 0.1)", &l_skew(&labels, 4, 0.1, 7)?, &labels, 6);
    describe("fixed-k labels (k = 2)", &fixed_k_skew(&labels, 4, 2, 7)?, &labels, 6);
    describe("amplitude noise (sigma 0.5)", &n_skew(4, 0.5, 7)?, &labels, 6);

    let json = q_skew(labels.len(), 4, 0.5, 7)?.to_json()?;
    println!("\nexported JSON head:\n{}", &json[..json.find("\"indices\"").unwrap() + 30]);
    Ok(())
}
