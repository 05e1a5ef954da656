#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

pub struct Run {
    pub code: i32,
    pub stderr: String,
}

impl Run {
    pub fn ok(&self) -> bool {
        self.code == 0
    }
}

pub fn histexpr<I, S>(args: I) -> Run
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = Command::new(env!("CARGO_BIN_EXE_histexpr")).args(args).output().expect("spawn histexpr");
    Run { code: out.status.code().unwrap_or(-1), stderr: String::from_utf8_lossy(&out.stderr).into_owned() }
}

/// Runs and panics with stderr unless the exit code is `code`.
pub fn expect<I, S>(code: i32, args: I) -> Run
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let r = histexpr(args);
    assert_eq!(r.code, code, "stderr:\n{}", r.stderr);
    r
}

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

pub fn json(path: impl AsRef<Path>) -> Value {
    let p = path.as_ref();
    serde_json::from_str(&fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))).unwrap()
}

pub fn csv_rows(path: impl AsRef<Path>) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TIMING_KEYS: [&str; 4] = ["epoch_seconds", "train_seconds", "kwh", "speedup"];

fn mask_json(v: &mut Value) {
    match v {
        Value::Object(m) => {
            for (k, x) in m.iter_mut() {
                if TIMING_KEYS.contains(&k.as_str()) && x.is_number() {
                    *x = Value::Null;
                } else {
                    mask_json(x);
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(mask_json),
        _ => {}
    }
}

/// File contents with wall-clock measurements blanked.
pub fn masked(path: &Path) -> Vec<u8> {
    let bytes = fs::read(path).unwrap();
    match path.file_name().and_then(|n| n.to_str()) {
        Some("history.csv") => {
            let text = String::from_utf8(bytes).unwrap();
            let mut out = String::new();
            for line in text.lines() {
                let (keep, _) = line.rsplit_once(',').unwrap();
                out.push_str(keep);
                out.push('\n');
            }
            out.into_bytes()
        }
        Some("benchmark.json") => {
            let mut v: Value = serde_json::from_slice(&bytes).unwrap();
            // Only the reference energy example is not a measurement.
            let reference = v["reference_example"].clone();
            mask_json(&mut v);
            v["reference_example"] = reference;
            serde_json::to_vec_pretty(&v).unwrap()
        }
        _ => bytes,
    }
}

/// Every file under `dir`, keyed by relative path, with timings masked.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, masked(&p));
            }
        }
    }
    out
}

/// Runs `args` twice into fresh output directories and compares every file.
pub fn rerun_identical(args: &[&str], scratch: &Path, name: &str) -> Result<usize, String> {
    let mut snaps = Vec::new();
    for i in 0..2 {
        let out = scratch.join(format!("{name}-{i}"));
        let mut full: Vec<&str> = args.to_vec();
        full.extend(["--output-dir", s(&out)]);
        let r = histexpr(&full);
        if !r.ok() {
            return Err(format!("exit {}: {}", r.code, r.stderr.trim()));
        }
        snaps.push(snapshot(&out));
    }
    if snaps[0].is_empty() {
        return Err("no output files".into());
    }
    if snaps[0].keys().ne(snaps[1].keys()) {
        return Err("different file sets".into());
    }
    for (k, v) in &snaps[0] {
        if &snaps[1][k] != v {
            return Err(format!("{k} differs"));
        }
    }
    Ok(snaps[0].len())
}

/// TOML config with a narrow head so training finishes in seconds.
pub fn small_head_config(dir: &Path) -> PathBuf {
    let path = dir.join("small.toml");
    fs::write(
        &path,
        "[train]\nmax_epochs = 60\npatience = 60\nlearning_rate = 0.003\n\n\
         [train.head]\nconv1_filters = 8\nkernel = 5\nconv2_channels = 16\nconv3_channels = 16\nactivation = \"relu\"\n",
    )
    .unwrap();
    path
}
