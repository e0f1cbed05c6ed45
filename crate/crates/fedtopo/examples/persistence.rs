//! Cubical persistence of small scalar fields.
//!
//! ```bash
//! cargo run -p fedtopo --example persistence
//! ```

use fedtopo::cubical::{build_lower_star, cell_count};
use fedtopo::field::ScalarField;
use fedtopo::persistence::{compute_h0_fast, compute_persistence};

fn main() -> fedtopo::Result<()> {
    // A 3x3 plateau with a raised center: the background ring forms a loop
    // that fills in once the center enters the sublevel set.
    let ring = ScalarField::from_rows(&[
        vec![0.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0],
        vec![0.0, 0.0, 0.0],
    ])?;
    let complex = build_lower_star(&ring)?;
    println!(
        "ring field: {} cells (formula gives {})",
        complex.cells.len(),
        cell_count(3, 3)
    );
    let diagram = compute_persistence(&complex)?;
    println!("{}", diagram.to_csv());

    // A 1-D profile with two basins merging by the elder rule: the younger
    // basin (born at 1) dies when the saddle at 2 joins the components.
    let profile = ScalarField::from_rows(&[vec![0.0, 2.0, 1.0, 3.0]])?;
    let h0 = compute_h0_fast(&profile)?;
    println!("1x4 profile components:");
    print!("{}", h0.to_csv());
    Ok(())
}
