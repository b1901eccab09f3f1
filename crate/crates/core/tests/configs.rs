//! The example configs under `configs/` stay loadable.

use std::path::PathBuf;

use star_kge::config::RunConfig;
use star_kge::synth::{family_spec, generate, SynthSpec};

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn run_config_parses() {
    let config = RunConfig::from_file(&configs().join("wn18rr_n32.toml")).unwrap();
    assert_eq!(config.train.dim, 32);
    assert!(config.data.train.ends_with("data/WN18RR/train.txt"));
}

#[test]
fn family_spec_file_matches_builder() {
    let from_file = generate(&SynthSpec::from_file(&configs().join("family.toml")).unwrap()).unwrap();
    let built = generate(&family_spec(10, 4, 0)).unwrap();
    assert_eq!(from_file.store.train(), built.store.train());
    assert_eq!(from_file.order_discriminating, built.order_discriminating);
}
