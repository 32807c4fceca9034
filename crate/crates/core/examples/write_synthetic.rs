//! Regenerates the bundled survey-like dataset used by the end-to-end tests.
//!
//! ```text
//! cargo run -p recallcor --example write_synthetic -- crates/core/tests/data/survey_synthetic.csv
//! ```

use std::fs::File;

use recallcor::simulation::simulate_survey_like;
use recallcor::write_csv;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "crates/core/tests/data/survey_synthetic.csv".into());
    let data = simulate_survey_like(5000, 0.15, 0.10, 2024)?;
    write_csv(&data, File::create(&path)?)?;
    eprintln!("wrote {} records to {path}", data.n());
    Ok(())
}
