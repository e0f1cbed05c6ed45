//! Block screening on the synthetic disk/annulus data.
//!
//! Scores the two convolutional blocks of a freshly initialized network by
//! topological class separability and prints the per-metric table.
//!
//! ```bash
//! cargo run --release -p fedtopo --example screening
//! ```

use fedtopo::data::{gen_synthetic, SyntheticSpec};
use fedtopo::nn::{Model, ModelSpec};
use fedtopo::screening::{screen_model, scores_to_csv, ScreenParams};

fn main() -> fedtopo::Result<()> {
    let data = gen_synthetic(&SyntheticSpec { count_per_class: 40, seed: 9, ..Default::default() })?;
    let model = Model::init(ModelSpec::simple_cnn(data.classes), 1);
    let images = data.batch(&(0..data.len()).collect::<Vec<_>>());
    let blocks = vec!["conv1".to_string(), "conv2".to_string()];
    let params = ScreenParams { n_pairs: 60, seed: 4, ..Default::default() };
    let (winner, scores) = screen_model(&model, &images, &data.labels, &blocks, &params)?;
    print!("{}", scores_to_csv(&winner, &scores));
    Ok(())
}
