//! Generate the bundled demo city into a directory (default: sample_city).
//!
//! Usage: cargo run --example gen_demo -- [DIR]

use std::path::Path;

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "sample_city".to_string());
    match city_its::demo::write_demo_city(Path::new(&dir)) {
        Ok(config) => println!("wrote {}", config.display()),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
