//! Shared inputs for the criterion benches.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use pantry_core::dataset::load_dataset;
use pantry_core::vector::StubEmbedder;
use pantry_core::PantryCorpus;

pub const QUERIES: &[&str] = &[
    "Where can I find food pantries in Sedgwick County?",
    "Are there food pantries in Derby open on Wednesdays?",
    "Find food pantries in Maize that do not require any ID.",
    "Where can I get free food near me?",
    "Where is the pantry I went to in 67214 on 21st Street?",
    "food bank open saturday morning in Topeka",
];

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// The bundled dataset with a freshly built stub index.
pub fn bundled_corpus() -> PantryCorpus {
    let records = load_dataset(&data_dir().join("dataset.json")).expect("bundled dataset");
    PantryCorpus::build(records, Arc::new(StubEmbedder::default())).expect("stub index")
}
