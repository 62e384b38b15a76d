//! Drives an experiment from a JSON configuration the way the command-line
//! tool does, writing the artifacts into a directory.

use std::path::PathBuf;

use rfl_lab::cli::{run_experiment, ExperimentConfig};

const CONFIG: &str = r#"{
  "experiment": "concentration",
  "scope": {"kind": "radial-well", "rho0": 1.0, "rho_inf": 2.0, "sigma": 1.0, "center": [0.5]},
  "grid": {"dim": 1, "extent": 8.0, "points": 128},
  "seed": 1
}"#;

fn main() -> rfl_lab::Result<()> {
    let config = ExperimentConfig::from_json(CONFIG, "inline".as_ref())?;
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("rfl-lab-example"));
    let outcome = run_experiment(&config, &dir)?;
    println!("config hash {}", config.hash());
    println!("{}", outcome.summary);
    for file in &outcome.manifest.artifacts {
        println!("  {}", dir.join(file).display());
    }
    Ok(())
}
