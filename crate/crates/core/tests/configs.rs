use std::path::Path;

use respira::dataset::{StatusMap, TaskFilter};
use respira::eval::ExperimentConfig;

fn config_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/config"))
}

fn toml_files(sub: &str) -> Vec<std::path::PathBuf> {
    let mut out: Vec<_> = std::fs::read_dir(config_dir().join(sub))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    out.sort();
    out
}

#[test]
fn bundled_experiments_parse() {
    let files = toml_files("experiments");
    assert!(!files.is_empty());
    for f in files {
        ExperimentConfig::load(&f).unwrap_or_else(|e| panic!("{}: {e}", f.display()));
    }
}

#[test]
fn full_grid_file_matches_defaults() {
    let full = ExperimentConfig::load(&config_dir().join("experiments/full_grid.toml")).unwrap();
    let defaults = ExperimentConfig {
        task: full.task.clone(),
        ..ExperimentConfig::default()
    };
    assert_eq!(full, defaults);
    assert_eq!(full.grid_size(), 344);
}

#[test]
fn bundled_tasks_and_status_map_parse() {
    for f in toml_files("tasks") {
        TaskFilter::load(&f).unwrap_or_else(|e| panic!("{}: {e}", f.display()));
    }
    StatusMap::load(&config_dir().join("coswara_status_map.toml")).unwrap();
}
