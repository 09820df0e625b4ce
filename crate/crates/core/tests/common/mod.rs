#![allow(dead_code)]

use std::path::PathBuf;

use absa_kit::io::{load_acos_tsv, read_taxonomy, AcosLoadOptions, TaxonomyMode};
use absa_kit::{DatasetManifest, Split};

pub const DATASETS: [&str; 2] = ["restaurant", "laptop"];

pub fn fixture_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data/fixtures")
        .join(name)
}

pub fn load(name: &str, split: Split) -> DatasetManifest {
    let dir = fixture_dir(name);
    let taxonomy = read_taxonomy(dir.join("categories.txt")).unwrap();
    let opts = AcosLoadOptions {
        taxonomy: TaxonomyMode::Fixed(taxonomy),
        ..AcosLoadOptions::default()
    };
    load_acos_tsv(dir.join(format!("{split}.tsv")), name, split, &opts).unwrap()
}

pub fn all_splits() -> Vec<DatasetManifest> {
    DATASETS
        .iter()
        .flat_map(|name| Split::ALL.map(|s| load(name, s)))
        .collect()
}
