//! Writes the bundled demo dataset.
//!
//! ```text
//! cargo run -p hybrid-forecast --example generate_pets -- [OUT_DIR] [SEED]
//! ```
//!
//! Produces `synthetic_pets.csv` (2005-2023, nine indicators, `cats` and
//! `dogs` targets) and `synthetic_pets.schema.json` in `OUT_DIR` (default
//! `data`). The default seed is 42.

use std::fs::{self, File};
use std::path::PathBuf;

use hybrid_forecast::preprocess::write_table;
use hybrid_forecast::synthetic::{pet_dataset, pet_schema};

fn main() -> hybrid_forecast::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data".into()));
    let seed: u64 = match args.next() {
        Some(s) => s
            .parse()
            .map_err(|_| hybrid_forecast::Error::InvalidArgument(format!("bad seed `{s}`")))?,
        None => 42,
    };
    let io = |path: PathBuf| move |source| hybrid_forecast::Error::Io { path, source };

    fs::create_dir_all(&dir).map_err(io(dir.clone()))?;
    let table = pet_dataset(seed, 2005, 19);
    let csv_path = dir.join("synthetic_pets.csv");
    write_table(&table, File::create(&csv_path).map_err(io(csv_path.clone()))?)?;
    let schema_path = dir.join("synthetic_pets.schema.json");
    let mut schema = serde_json::to_string_pretty(&pet_schema())?;
    schema.push('\n');
    fs::write(&schema_path, schema).map_err(io(schema_path.clone()))?;
    println!("wrote {} and {}", csv_path.display(), schema_path.display());
    Ok(())
}
