//! Write a small synthetic workspace for trying the command-line tool.
//!
//! ```text
//! cargo run --example write_fixtures -- demo
//! ```

use genfair::fixtures::{stereotyped, PlantedAxisConfig};

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "demo".to_string());
    let fixture = stereotyped(&PlantedAxisConfig::default(), 0.4).expect("fixture builds");
    match fixture.write_files(&dir, 7) {
        Ok(files) => {
            for p in [
                &files.embeddings,
                &files.pairs,
                &files.specific,
                &files.equalize,
                &files.spec,
                &files.audit,
            ] {
                println!("{}", p.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
}
