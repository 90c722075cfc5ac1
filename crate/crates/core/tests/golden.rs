//! Golden reports for canned scenarios, plus the exported configs and schema
//! under the workspace root. Regenerate with `SATDTN_BLESS=1 cargo test`.

use std::fs;
use std::path::{Path, PathBuf};

use satdtn::report::Report;
use satdtn::scenarios::ScenarioRegistry;
use satdtn::sim::{run, ScenarioConfig};

fn bless() -> bool {
    std::env::var_os("SATDTN_BLESS").is_some_and(|v| v == "1")
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Compares `actual` with the file, or rewrites the file when blessing.
/// Returns a description of the mismatch.
fn compare(path: &Path, actual: &str) -> Option<String> {
    if bless() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(path, actual).unwrap();
        return None;
    }
    match fs::read_to_string(path) {
        Ok(expected) if expected == actual => None,
        Ok(_) => Some(format!("{} differs", path.display())),
        Err(e) => Some(format!("{}: {e}", path.display())),
    }
}

fn assert_all(mismatches: Vec<String>) {
    assert!(
        mismatches.is_empty(),
        "{}\nrerun with SATDTN_BLESS=1 if the change is intended",
        mismatches.join("\n")
    );
}

#[test]
fn canned_reports_match_goldens() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden");
    let mut bad = Vec::new();
    for s in ScenarioRegistry::with_builtins().iter() {
        let out = run(&s.build()).unwrap();
        let report = Report::from_records(&out.records);
        bad.extend(compare(&dir.join(format!("{}.json", s.name())), &report.to_json()));
    }
    assert_all(bad);
}

#[test]
fn exported_scenarios_are_current() {
    let dir = workspace().join("scenarios");
    let mut bad = Vec::new();
    for s in ScenarioRegistry::with_builtins().iter() {
        let cfg = s.build();
        let mut text = cfg.to_json_pretty();
        text.push('\n');
        assert_eq!(ScenarioConfig::from_json(&text).unwrap(), cfg, "{}", s.name());
        bad.extend(compare(&dir.join(format!("{}.json", s.name())), &text));
    }
    assert_all(bad);
}

#[test]
fn shipped_schema_is_current() {
    let schema = schemars::schema_for!(ScenarioConfig);
    let mut text = serde_json::to_string_pretty(&schema).unwrap();
    text.push('\n');
    assert_all(compare(&workspace().join("docs/scenario.schema.json"), &text).into_iter().collect());
}
