use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn mfamd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfamd")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = mfamd(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A short-chain config over the bundled schema and sample in `dir`.
fn short_config(dir: &Path, groups: usize, data_file: &Path) -> PathBuf {
    let path = dir.join("run.toml");
    let text = format!(
        "schema = {:?}\ndata = {:?}\ngroups = {groups}\ntraits = 1\nout = \"runs\"\n\n\
         [chain]\niterations = 80\nburn_in = 40\nthin = 2\nseed = 5\n",
        data("asset_survey.toml"),
        data_file
    );
    fs::write(&path, text).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

fn single_cluster_params(dir: &Path) -> PathBuf {
    let rows: Vec<String> = (0..38).map(|d| format!("[{:.2}, 0.5]", 0.1 * (d % 5) as f64 - 0.2)).collect();
    let path = dir.join("one.toml");
    fs::write(&path, format!("pi = [1.0]\nloadings = [[{}]]\n", rows.join(", "))).unwrap();
    path
}

mod fit {
    use super::*;

    #[test]
    fn bundled_config_writes_a_complete_run() {
        let tmp = TempDir::new().unwrap();
        let out = tmp.path().join("runs");
        let stdout = ok(&["fit", "--config", s(&data("run.toml")), "--out", s(&out)]);
        let dir = out.join("G3_q1");
        assert_eq!(stdout.trim(), dir.display().to_string());
        for f in [
            "manifest.json",
            "report.json",
            "trace.jsonl",
            "tallies.csv",
            "membership.csv",
            "references.json",
            "schema.toml",
            "responses.csv",
        ] {
            assert!(dir.join(f).exists(), "missing {f}");
        }
        let manifest = read_json(&dir.join("manifest.json"));
        assert_eq!(manifest["status"], "complete");
        assert_eq!(manifest["fingerprint"].as_str().unwrap().len(), 64);
        assert_eq!(manifest["chains"][0]["decode_violations"], 0);
        let report = read_json(&dir.join("report.json"));
        assert_eq!(report["clusters"]["n_snapshots"], 100);
        let trace_lines = fs::read_to_string(dir.join("trace.jsonl")).unwrap().lines().count();
        assert_eq!(trace_lines, 100);
        for row in csv_rows(&dir.join("membership.csv")) {
            let p: f64 = row[1..4].iter().map(|v| v.parse::<f64>().unwrap()).sum();
            assert!((p - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn same_seed_gives_identical_traces() {
        let tmp = TempDir::new().unwrap();
        let config = short_config(tmp.path(), 2, &data("asset_sample.csv"));
        ok(&["fit", "--config", s(&config), "--out", s(&tmp.path().join("a"))]);
        ok(&["fit", "--config", s(&config), "--out", s(&tmp.path().join("b"))]);
        ok(&["fit", "--config", s(&config), "--out", s(&tmp.path().join("c")), "--seed", "6"]);
        let read = |run: &str, f: &str| fs::read(tmp.path().join(run).join("G2_q1").join(f)).unwrap();
        assert_eq!(read("a", "trace.jsonl"), read("b", "trace.jsonl"));
        assert_eq!(read("a", "tallies.csv"), read("b", "tallies.csv"));
        assert_eq!(read("a", "report.json"), read("b", "report.json"));
        assert_ne!(read("a", "trace.jsonl"), read("c", "trace.jsonl"));
        let fa = read_json(&tmp.path().join("a/G2_q1/manifest.json"))["fingerprint"].clone();
        let fc = read_json(&tmp.path().join("c/G2_q1/manifest.json"))["fingerprint"].clone();
        assert_ne!(fa, fc);
    }

    #[test]
    fn grid_writes_one_directory_per_cell() {
        let tmp = TempDir::new().unwrap();
        let small = tmp.path().join("small.csv");
        let sample = fs::read_to_string(data("asset_sample.csv")).unwrap();
        fs::write(&small, sample.lines().take(121).collect::<Vec<_>>().join("\n")).unwrap();
        let config = short_config(tmp.path(), 2, &small);
        let out = tmp.path().join("grid");
        let stdout = ok(&["fit", "--config", s(&config), "--grid", "2..6,1..2", "--out", s(&out)]);
        assert_eq!(stdout.lines().count(), 10);
        for g in 2..=6 {
            for q in 1..=2 {
                let m = read_json(&out.join(format!("G{g}_q{q}/manifest.json")));
                assert_eq!(m["status"], "complete");
                assert_eq!((m["groups"].as_u64(), m["traits"].as_u64()), (Some(g), Some(q)));
            }
        }
    }

    #[test]
    fn several_chains_are_pooled_with_advisory_rhat() {
        let tmp = TempDir::new().unwrap();
        let config = short_config(tmp.path(), 2, &data("asset_sample.csv"));
        let out = tmp.path().join("multi");
        ok(&["fit", "--config", s(&config), "--chains", "3", "--out", s(&out)]);
        let dir = out.join("G2_q1");
        let manifest = read_json(&dir.join("manifest.json"));
        let seeds: Vec<u64> = manifest["chains"].as_array().unwrap().iter().map(|c| c["seed"].as_u64().unwrap()).collect();
        assert_eq!(seeds, vec![5, 6, 7]);
        let report = read_json(&dir.join("report.json"));
        assert_eq!(report["clusters"]["n_snapshots"], 60);
        let rhats = report["split_rhat"].as_array().unwrap();
        assert!(rhats.iter().any(|r| r["parameter"] == "pi[1]"));
        assert!(report["max_split_rhat"].as_f64().unwrap() >= 1.0 - 1e-9);
        let tallies = csv_rows(&dir.join("tallies.csv"));
        for row in tallies {
            assert_eq!(row.iter().map(|v| v.parse::<u32>().unwrap()).sum::<u32>(), 60);
        }
    }
}

mod simulate {
    use super::*;

    #[test]
    fn asset_shaped_data_and_reproducible_files() {
        let tmp = TempDir::new().unwrap();
        let (schema, params) = (data("asset_survey.toml"), data("asset_params.toml"));
        let run = |name: &str| {
            let out = tmp.path().join(name);
            let args = [
                "simulate",
                "--schema",
                s(&schema),
                "--params",
                s(&params),
                "-n",
                "1000",
                "--seed",
                "9",
                "--out",
                s(&out),
            ];
            ok(&args);
            out
        };
        let (a, b) = (run("a"), run("b"));
        let rows = csv_rows(&a.join("responses.csv"));
        assert_eq!(rows.len(), 1000);
        assert!(rows.iter().all(|r| r.len() == 28));
        assert_eq!(fs::read(a.join("responses.csv")).unwrap(), fs::read(b.join("responses.csv")).unwrap());
        assert_eq!(fs::read(a.join("truth.json")).unwrap(), fs::read(b.join("truth.json")).unwrap());
        let truth = read_json(&a.join("truth.json"));
        assert_eq!(truth["allocations"].as_array().unwrap().len(), 1000);
    }

    #[test]
    fn single_cluster_truth_is_all_ones() {
        let tmp = TempDir::new().unwrap();
        let params = single_cluster_params(tmp.path());
        let out = tmp.path().join("one");
        ok(&["simulate", "--schema", s(&data("asset_survey.toml")), "--params", s(&params), "-n", "200", "--out", s(&out)]);
        let truth = read_json(&out.join("truth.json"));
        assert!(truth["allocations"].as_array().unwrap().iter().all(|a| a == 1));
    }

    #[test]
    fn mismatched_parameters_are_rejected() {
        let tmp = TempDir::new().unwrap();
        let params = tmp.path().join("bad.toml");
        fs::write(&params, "pi = [1.0]\nloadings = [[[0.0, 1.0], [0.0, 1.0]]]\n").unwrap();
        let out = mfamd(&[
            "simulate",
            "--schema",
            s(&data("asset_survey.toml")),
            "--params",
            s(&params),
            "-n",
            "10",
            "--out",
            s(&tmp.path().join("x")),
        ]);
        assert_eq!(out.status.code(), Some(1));
    }
}

/// One short G = 3 fit shared by the diagnostics and summary tests.
fn fitted_run(tmp: &TempDir, groups: usize) -> PathBuf {
    let config = short_config(tmp.path(), groups, &data("asset_sample.csv"));
    let out = tmp.path().join("runs");
    ok(&["fit", "--config", s(&config), "--out", s(&out)]);
    out.join(format!("G{groups}_q1"))
}

mod diagnose {
    use super::*;

    #[test]
    fn tsspr_summary_has_median_and_iqr() {
        let tmp = TempDir::new().unwrap();
        let dir = fitted_run(&tmp, 3);
        ok(&["diagnose", s(&dir), "--tsspr", "-T", "20", "-R", "40"]);
        let v = read_json(&dir.join("diagnostics/tsspr.json"));
        assert_eq!(v["truncation"], 20);
        assert_eq!(v["replicates"], 40);
        assert_eq!(v["values"].as_array().unwrap().len(), 40);
        let (q1, med, q3) = (v["q1"].as_f64().unwrap(), v["median"].as_f64().unwrap(), v["q3"].as_f64().unwrap());
        assert!(0.0 <= q1 && q1 <= med && med <= q3);
        assert!((v["iqr"].as_f64().unwrap() - (q3 - q1)).abs() < 1e-12);
        assert!(!dir.join("diagnostics/residuals.csv").exists());
    }

    #[test]
    fn hellinger_writes_every_pair() {
        let tmp = TempDir::new().unwrap();
        let dir = fitted_run(&tmp, 3);
        ok(&["diagnose", s(&dir), "--hellinger"]);
        for (a, b) in [(1, 2), (1, 3), (2, 3)] {
            let rows = csv_rows(&dir.join(format!("diagnostics/hellinger_{a}_{b}.csv")));
            assert_eq!(rows.len(), 28);
            for r in rows {
                if !r[1].is_empty() {
                    let d: f64 = r[1].parse().unwrap();
                    assert!((0.0..=1.0).contains(&d));
                }
            }
        }
        assert_eq!(csv_rows(&dir.join("diagnostics/hellinger_totals.csv")).len(), 3);
    }

    #[test]
    fn uncertainty_rows_are_bounded() {
        let tmp = TempDir::new().unwrap();
        let dir = fitted_run(&tmp, 3);
        ok(&["diagnose", s(&dir), "--uncertainty"]);
        let rows = csv_rows(&dir.join("diagnostics/uncertainty.csv"));
        assert_eq!(rows.len(), 500);
        for r in rows {
            let u: f64 = r[2].parse().unwrap();
            assert!((0.0..=2.0 / 3.0 + 1e-12).contains(&u));
        }
    }

    #[test]
    fn residuals_and_modal_table() {
        let tmp = TempDir::new().unwrap();
        let dir = fitted_run(&tmp, 3);
        ok(&["diagnose", s(&dir), "--residuals", "--households", "1,250", "--residual-snapshots", "5", "--modal"]);
        let rows = csv_rows(&dir.join("diagnostics/residuals.csv"));
        // Two households, 38 latent dimensions, five snapshots.
        assert_eq!(rows.len(), 2 * 38 * 5);
        assert!(rows.iter().all(|r| r[4].parse::<f64>().unwrap().is_finite()));
        assert!(dir.join("diagnostics/modal.csv").exists());
        let bad = mfamd(&["diagnose", s(&dir), "--residuals", "--households", "501"]);
        assert_eq!(bad.status.code(), Some(1));
    }

    #[test]
    fn incomplete_runs_fail_at_runtime() {
        let tmp = TempDir::new().unwrap();
        let dir = fitted_run(&tmp, 2);
        let missing = mfamd(&["diagnose", s(&tmp.path().join("nowhere"))]);
        assert_eq!(missing.status.code(), Some(1));
        let manifest = dir.join("manifest.json");
        let text = fs::read_to_string(&manifest).unwrap().replace("\"complete\"", "\"running\"");
        fs::write(&manifest, text).unwrap();
        let out = mfamd(&["diagnose", s(&dir), "--uncertainty"]);
        assert_eq!(out.status.code(), Some(2));
    }
}

mod summarize {
    use super::*;

    #[test]
    fn three_clusters_three_size_lines_and_stable_output() {
        let tmp = TempDir::new().unwrap();
        let dir = fitted_run(&tmp, 3);
        let first = ok(&["summarize", s(&dir)]);
        assert_eq!(first.lines().filter(|l| l.starts_with("cluster ")).count(), 3);
        assert!(first.contains("Hellinger total, clusters 1 and 3"));
        assert_eq!(first, ok(&["summarize", s(&dir)]));
    }

    #[test]
    fn single_cluster_has_no_modal_differences() {
        let tmp = TempDir::new().unwrap();
        let dir = fitted_run(&tmp, 1);
        let text = ok(&["summarize", s(&dir)]);
        assert!(text.contains("no modal differences"));
        assert_eq!(text.lines().filter(|l| l.starts_with("cluster ")).count(), 1);
    }
}

#[test]
fn exit_codes_separate_bad_input_from_failures() {
    assert_eq!(mfamd(&[]).status.code(), Some(1));
    assert_eq!(mfamd(&["--help"]).status.code(), Some(0));
    assert_eq!(mfamd(&["fit", "--config", "/definitely/missing.toml"]).status.code(), Some(1));
    let tmp = TempDir::new().unwrap();
    let config = short_config(tmp.path(), 2, &data("asset_sample.csv"));
    let bad_grid = mfamd(&["fit", "--config", s(&config), "--grid", "0..2,1..1"]);
    assert_eq!(bad_grid.status.code(), Some(1));
    let out = Command::new(env!("CARGO_BIN_EXE_mfamd"))
        .args(["summarize", s(tmp.path())])
        .env("MFAMD_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn inputs_are_not_modified() {
    let tmp = TempDir::new().unwrap();
    let before = fs::read(data("asset_sample.csv")).unwrap();
    let dir = fitted_run(&tmp, 2);
    ok(&["diagnose", s(&dir), "--uncertainty"]);
    assert_eq!(before, fs::read(data("asset_sample.csv")).unwrap());
    assert!(!data("runs").exists());
}
