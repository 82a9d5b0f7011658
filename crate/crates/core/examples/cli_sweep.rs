//! Run the `spectrum` and `flux` commands on the bundled configuration and
//! list the files they write.

use fluxnoise::commands::{self, CommandOptions};
use std::path::PathBuf;

fn main() -> fluxnoise::Result<()> {
    let out = std::env::temp_dir().join("fluxnoise-example");
    let opts = CommandOptions {
        config: PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/configs/sweep.json"),
        out: Some(out),
        seed: Some(42),
        ..CommandOptions::default()
    };
    for path in commands::spectrum(&opts)?.into_iter().chain(commands::flux(&opts)?) {
        println!("{}", path.display());
    }
    Ok(())
}
