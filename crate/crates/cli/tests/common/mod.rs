// shared by several test targets; each uses a subset
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_memmarket")).args(args).output().expect("binary runs")
}

/// Writes `config` to `dir/name`, pointing its output block at `dir/out_<name>`.
pub fn write_config(dir: &Path, name: &str, mut config: Value) -> (PathBuf, PathBuf) {
    let out = dir.join(format!("out_{name}"));
    config["output"] = serde_json::json!({ "dir": out });
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    (path, out)
}

/// Every file under `dir` except the timing sidecar, by relative path.
pub fn primary_outputs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if name != "run.log" {
            files.insert(name, std::fs::read(&path).unwrap());
        }
    }
    files
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}
