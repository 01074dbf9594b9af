#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use prosabx_core::fixtures::{
    contour_features, grid_dataset, noise_features, write_corpus, ContourParams, CorpusPaths, GridSpec,
};
use prosabx_core::manifest::Dataset;

pub fn prosabx<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    prosabx_env(args, &[])
}

pub fn prosabx_env<I, S>(args: I, env: &[(&str, &str)]) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_prosabx"));
    cmd.args(args).env_remove("PROSABX_WORKERS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

/// Parses the single stdout line as JSON.
pub fn summary(out: &Output) -> serde_json::Value {
    let text = stdout(out);
    assert_eq!(text.lines().count(), 1, "stdout: {text}\nstderr: {}", stderr(out));
    serde_json::from_str(text.trim()).unwrap()
}

pub fn s(path: &Path) -> String {
    path.to_str().unwrap().to_string()
}

/// Contrast corpus with separable contours on layer 0 and noise on layer 1.
pub fn two_layer_corpus(dir: &Path, spec: GridSpec) -> (Dataset, CorpusPaths) {
    let ds = grid_dataset(spec);
    let contours = contour_features(&ds, ContourParams::default(), 21);
    let noise = noise_features(&ds, 8, (15, 25), 22);
    let paths = write_corpus(dir, &ds, &[(0, &contours), (1, &noise)]).unwrap();
    (ds, paths)
}
