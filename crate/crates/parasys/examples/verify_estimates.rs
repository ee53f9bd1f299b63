//! Runs the estimate checks on a shipped configuration and prints one JSON
//! line per verdict, as `parasys verify all` does.
//!
//! ```text
//! cargo run --release --example verify_estimates -- crates/parasys/configs/power_law.toml
//! ```

use std::path::PathBuf;

use parasys::cli::{Command, Runner};

fn main() {
    let cfg = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/power_law.toml"));
    let out = std::env::temp_dir().join("parasys-verify-example");
    let pass = Runner::from_path(&cfg, &out, 0)
        .and_then(|mut r| r.run(&Command::Verify { checks: vec!["all".into()] }))
        .unwrap_or_else(|e| {
            eprintln!("{e}");
            std::process::exit(e.exit_code())
        });
    println!("all verdicts pass: {pass} (outputs in {})", out.display());
}
