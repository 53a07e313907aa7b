//! Regenerate the shipped mesh fixtures.
//!
//! ```text
//! cargo run --example generate_fixtures -- [DIR]
//! ```
//!
//! Writes `<stem>_{reduced,full}.{mesh,part}` for every fixture into DIR
//! (default: the crate's `fixtures/`).

use mts::mesh::{write_native, write_partition};
use mts::problems::FixtureKind;
use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures"));
    std::fs::create_dir_all(&dir)?;
    for kind in FixtureKind::ALL {
        for full in [false, true] {
            let (mesh, part) = kind.generate(full)?;
            let (m, p) = kind.file_names(full);
            std::fs::write(dir.join(&m), write_native(&mesh))?;
            std::fs::write(dir.join(&p), write_partition(&part))?;
            println!(
                "{m}: {} nodes, {} elements, {} subdomains",
                mesh.node_count(),
                mesh.element_count(),
                part.subdomain_count()
            );
        }
    }
    Ok(())
}
