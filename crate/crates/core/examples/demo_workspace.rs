//! Writes a synthetic audit workspace.
//!
//! ```text
//! cargo run -p rai-audit --example demo_workspace -- /tmp/demo [seed]
//! cargo run -p rai-audit-cli -- run --config /tmp/demo/config.toml
//! ```

use std::path::PathBuf;

use rai_audit::pipeline::demo::{write_demo_workspace, DemoOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().ok_or("usage: demo_workspace DIR [SEED]")?);
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);
    let config = write_demo_workspace(&dir, &DemoOptions { seed, ..Default::default() })?;
    println!("{}", config.display());
    Ok(())
}
