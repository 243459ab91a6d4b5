//! Regenerates the bundled network fixtures: `cargo run --example gen_fixtures -- <dir>`.

use std::path::PathBuf;

use redispatch::data::{synth_network, write_network, SynthNetworkSpec};

fn main() {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "crates/core/fixtures".into()));
    for (name, spec) in [
        ("small", SynthNetworkSpec::new(4, 2, 3, 8, 1)),
        ("desk", SynthNetworkSpec::new(12, 8, 20, 48, 2)),
    ] {
        let (ds, _) = synth_network(&spec);
        write_network(&ds, &root.join(name)).expect("fixture written");
        println!("{name}: {} controllables, {} lines", ds.controllables.len(), ds.lines.len());
    }
}
