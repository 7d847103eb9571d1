//! CLI contract tests: artifact layout, exit codes, and the pmf/sample
//! cross-check. Process-level behavior goes through the compiled binary;
//! the high-volume draw loop uses the in-process dispatcher.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

use bandgroup::cli::dispatch;
use bandgroup::kdpp::SubsetRecord;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bandgroup"))
}

fn gen_cube(path: &Path, clusters: &str, width: u32, seed: u64) {
    let status = bin()
        .args([
            "gen",
            "--width",
            &width.to_string(),
            "--height",
            &width.to_string(),
            "--clusters",
            clusters,
            "--rho",
            "0.9",
            "--noise",
            "0.05",
            "--seed",
            &seed.to_string(),
            "--out",
        ])
        .arg(path)
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn group_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cube = dir.path().join("c.hsic");
    gen_cube(&cube, "3,3", 16, 7);
    let out = dir.path().join("d");
    let status = bin()
        .args(["group", "--input"])
        .arg(&cube)
        .args(["--k", "3", "--seed", "7", "--tau", "0.9", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for name in ["report.json", "groups.json", "corr.csv", "corr.pgm", "sam.csv"] {
        let path = out.join(name);
        assert!(path.is_file(), "{name} missing");
        assert!(std::fs::metadata(&path).unwrap().len() > 0, "{name} empty");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["format"], "bandgroup/1");
    let pgm = std::fs::read(out.join("corr.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n6 6\n255\n"));
}

#[test]
fn sample_k_zero_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cube = dir.path().join("c.hsic");
    gen_cube(&cube, "2,2", 8, 1);
    let output = bin()
        .args(["sample", "--input"])
        .arg(&cube)
        .args(["--k", "0"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("--k"));
    assert!(output.stdout.is_empty());
}

#[test]
fn unknown_flag_is_usage_error() {
    let output = bin().args(["sample", "--frobnicate"]).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("Usage") || stderr.contains("unexpected"), "{stderr}");
}

#[test]
fn data_errors_exit_2() {
    let output = bin()
        .args(["sample", "--input", "/no/such/cube.hsic", "--k", "2"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));

    // k above the band count is a data error, found after reading the cube.
    let dir = tempfile::tempdir().unwrap();
    let cube = dir.path().join("c.hsic");
    gen_cube(&cube, "2,2", 8, 2);
    let output = bin()
        .args(["sample", "--input"])
        .arg(&cube)
        .args(["--k", "9"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn sample_runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cube = dir.path().join("c.hsic");
    gen_cube(&cube, "3,2", 12, 5);
    let mut outputs = Vec::new();
    for run in 0..2 {
        let path = dir.path().join(format!("s{run}.json"));
        let status = bin()
            .args(["sample", "--input"])
            .arg(&cube)
            .args(["--k", "2", "--seed", "11", "--out"])
            .arg(&path)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn sam_accepts_subset_file_and_band_list() {
    let dir = tempfile::tempdir().unwrap();
    let cube = dir.path().join("c.hsic");
    gen_cube(&cube, "2,2", 8, 3);
    let subset = dir.path().join("subset.json");
    assert!(bin()
        .args(["sample", "--input"])
        .arg(&cube)
        .args(["--k", "2", "--seed", "3", "--out"])
        .arg(&subset)
        .status()
        .unwrap()
        .success());
    let record: SubsetRecord =
        serde_json::from_str(&std::fs::read_to_string(&subset).unwrap()).unwrap();

    let from_file = dir.path().join("sam_a.csv");
    assert!(bin()
        .args(["sam", "--input"])
        .arg(&cube)
        .args(["--subset"])
        .arg(&subset)
        .args(["--out"])
        .arg(&from_file)
        .status()
        .unwrap()
        .success());

    let list = record
        .indices
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let from_list = dir.path().join("sam_b.csv");
    assert!(bin()
        .args(["sam", "--input"])
        .arg(&cube)
        .args(["--bands", &list, "--out"])
        .arg(&from_list)
        .status()
        .unwrap()
        .success());
    assert_eq!(
        std::fs::read(&from_file).unwrap(),
        std::fs::read(&from_list).unwrap()
    );

    // Exactly one representative source must be given.
    let output = bin().args(["sam", "--input"]).arg(&cube).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn downsample_reduces_dims() {
    let dir = tempfile::tempdir().unwrap();
    let cube = dir.path().join("c.hsic");
    gen_cube(&cube, "2,2", 16, 6);
    let low = dir.path().join("low.hsic");
    assert!(bin()
        .args(["downsample", "--input"])
        .arg(&cube)
        .args(["--factor", "4", "--out"])
        .arg(&low)
        .status()
        .unwrap()
        .success());
    let loaded = bandgroup::HsiCube::load(&low).unwrap();
    assert_eq!((loaded.width(), loaded.height(), loaded.bands()), (4, 4, 4));

    // Non-divisible factor is a data error; factor 0 is a usage error.
    let output = bin()
        .args(["downsample", "--input"])
        .arg(&cube)
        .args(["--factor", "5", "--out"])
        .arg(&low)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let output = bin()
        .args(["downsample", "--input"])
        .arg(&cube)
        .args(["--factor", "0", "--out"])
        .arg(&low)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn pmf_enumeration_guard_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let cube = dir.path().join("c.hsic");
    gen_cube(&cube, "11,11", 8, 4); // 22 bands exceeds the guard
    let output = bin()
        .args(["pmf", "--input"])
        .arg(&cube)
        .args(["--k", "2"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("enumeration"));
}

/// Cross-check of the two subcommands: the exact `pmf` output and 200k
/// `sample` draws agree within total-variation distance 0.01.
#[test]
fn pmf_agrees_with_sample_draws() {
    let dir = tempfile::tempdir().unwrap();
    let cube = dir.path().join("six.hsic");
    // Six bands, two planted clusters.
    assert_eq!(
        dispatch([
            "bandgroup",
            "gen",
            "--width",
            "8",
            "--height",
            "8",
            "--clusters",
            "3,3",
            "--rho",
            "0.9",
            "--noise",
            "0.05",
            "--seed",
            "42",
            "--out",
            cube.to_str().unwrap(),
        ]),
        0
    );
    let pmf_path = dir.path().join("pmf.json");
    assert_eq!(
        dispatch([
            "bandgroup",
            "pmf",
            "--input",
            cube.to_str().unwrap(),
            "--k",
            "3",
            "--out",
            pmf_path.to_str().unwrap(),
        ]),
        0
    );
    let pmf: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&pmf_path).unwrap()).unwrap();
    let mut exact: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for entry in pmf["subsets"].as_array().unwrap() {
        let indices: Vec<usize> = entry["indices"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_u64().unwrap() as usize)
            .collect();
        exact.insert(indices, entry["probability"].as_f64().unwrap());
    }

    let draws = 200_000u64;
    let threads = std::thread::available_parallelism()
        .map(|n| n.get().min(8) as u64)
        .unwrap_or(1);
    let mut counts: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for t in 0..threads {
            let subset_path = dir.path().join(format!("draw{t}.json"));
            let cube = &cube;
            handles.push(scope.spawn(move || {
                let mut local: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
                let mut seed = t;
                while seed < draws {
                    assert_eq!(
                        dispatch([
                            "bandgroup",
                            "sample",
                            "--input",
                            cube.to_str().unwrap(),
                            "--k",
                            "3",
                            "--seed",
                            &seed.to_string(),
                            "--out",
                            subset_path.to_str().unwrap(),
                        ]),
                        0
                    );
                    let record: SubsetRecord =
                        serde_json::from_str(&std::fs::read_to_string(&subset_path).unwrap())
                            .unwrap();
                    *local.entry(record.indices).or_default() += 1;
                    seed += threads;
                }
                local
            }));
        }
        for handle in handles {
            for (subset, c) in handle.join().unwrap() {
                *counts.entry(subset).or_default() += c;
            }
        }
    });

    let mut tv = 0.0;
    for (subset, p) in &exact {
        let emp = counts.get(subset).copied().unwrap_or(0) as f64 / draws as f64;
        tv += (p - emp).abs();
    }
    for (subset, &c) in &counts {
        if !exact.contains_key(subset) {
            tv += c as f64 / draws as f64;
        }
    }
    tv /= 2.0;
    assert!(tv <= 0.01, "pmf vs sample TV distance {tv}");
}
