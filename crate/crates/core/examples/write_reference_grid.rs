//! Writes the bundled reference grid to `data/balearic_like.toml`, or to the
//! path given as the first argument.

use std::path::PathBuf;

fn main() -> Result<(), gridopa::Error> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/balearic_like.toml"));
    let net = gridopa::reference::balearic_like()?;
    gridopa::io::save_network(&net, &path)?;
    println!(
        "wrote {} ({} buses, {} lines)",
        path.display(),
        net.num_buses(),
        net.num_lines()
    );
    Ok(())
}
