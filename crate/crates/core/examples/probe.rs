use geodlab::config::RunConfig;
use geodlab::pipeline::cmd_enumerate;
use std::path::Path;

fn main() {
    let cfg = RunConfig::from_value(serde_json::json!({
        "model": {"kind": "cylinder", "core_length": 2.0},
        "max_word_length": 5,
        "counting_convention": "with-iterates/unoriented",
        "seed": 42
    }))
    .unwrap();
    let out = Path::new("crates/core/tests/data");
    let summary = cmd_enumerate(&cfg, out, Some(1)).unwrap();
    println!("orbits={} horizon={}", summary.orbits, summary.horizon);
    std::fs::rename(out.join("spectrum.csv"), out.join("golden_cylinder.csv")).unwrap();
    std::fs::remove_file(out.join("orbits.json")).unwrap();
    println!("{}", std::fs::read_to_string(out.join("golden_cylinder.csv")).unwrap());
}
