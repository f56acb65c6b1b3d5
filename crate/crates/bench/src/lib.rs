//! Shared inputs for the benchmarks.

use std::path::Path;

use treeflow_core::network::{load_network_from_path, Network};

/// Load a network from the repository's `fixtures/` directory.
pub fn fixture(name: &str) -> Network {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    load_network_from_path(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}
