mod common;

use std::fs;

use common::*;
use histexpr::imageprep::REFERENCE_PROFILE;
use histexpr::synthetic::{
    two_stain_image, write_regression_fixture, write_subtype_fixture, write_survival_fixture, RegressionTask,
};
use tempfile::tempdir;

fn small_task(n: usize) -> RegressionTask {
    RegressionTask { n_patients: n, patches_per_patient: 6, n_features: 16, n_genes: 6, ..RegressionTask::default() }
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    expect(2, ["frobnicate"]);
    expect(2, ["train", "--no-such-flag"]);
}

#[test]
fn preprocess_writes_patches_and_manifests() {
    let tmp = tempdir().unwrap();
    let images = tmp.path().join("images");
    fs::create_dir(&images).unwrap();
    for (i, id) in ["S1", "S2"].iter().enumerate() {
        let img = two_stain_image(&REFERENCE_PROFILE, 448, 448, i as u64);
        fs::write(images.join(format!("{id}.ppm")), img.encode_ppm()).unwrap();
    }
    let out = tmp.path().join("out");
    expect(0, ["preprocess", "--images", s(&images), "--output-dir", s(&out)]);
    for id in ["S1", "S2"] {
        let m = json(out.join(format!("manifests/{id}.json")));
        assert_eq!(m["patient_id"], id);
        assert_eq!(m["total_candidates"], 4);
        let files = m["patch_files"].as_array().unwrap();
        assert_eq!(files.len() as u64, m["retained"].as_u64().unwrap());
        for f in files {
            assert!(out.join("patches").join(id).join(f.as_str().unwrap()).is_file());
        }
    }
    let summary = json(out.join("preprocess_summary.json"));
    assert_eq!((summary["processed"].as_u64(), summary["failed"].as_u64()), (Some(2), Some(0)));
}

#[test]
fn preprocess_records_unreadable_images() {
    let tmp = tempdir().unwrap();
    let images = tmp.path().join("images");
    fs::create_dir(&images).unwrap();
    fs::write(images.join("A.ppm"), two_stain_image(&REFERENCE_PROFILE, 224, 224, 3).encode_ppm()).unwrap();
    fs::write(images.join("B.png"), b"not a png").unwrap();
    let out = tmp.path().join("out");
    expect(0, ["preprocess", "--images", s(&images), "--output-dir", s(&out)]);
    let summary = json(out.join("preprocess_summary.json"));
    assert_eq!(summary["failed"], 1);
    assert_eq!(summary["images"][1]["file"], "B.png");
    assert!(summary["images"][1]["error"].is_string());
    expect(1, ["preprocess", "--images", s(&images), "--output-dir", s(&out), "--strict"]);
}

#[test]
fn preprocess_rejects_missing_directory_and_bad_parameters() {
    let tmp = tempdir().unwrap();
    let out = tmp.path().join("out");
    expect(2, ["preprocess", "--images", s(&tmp.path().join("nope")), "--output-dir", s(&out)]);
    expect(1, ["preprocess", "--images", s(tmp.path()), "--alpha", "75", "--output-dir", s(&out)]);
    expect(1, ["preprocess", "--images", s(tmp.path()), "--output-dir", s(&out)]);
}

#[test]
fn aggregate_averages_checked_in_fixtures() {
    let tmp = tempdir().unwrap();
    let dir = fixtures().join("h2rf");
    expect(0, ["aggregate", "--features", s(&dir), "--output-dir", s(tmp.path())]);
    let rows = csv_rows(tmp.path().join("slide_features.csv"));
    assert_eq!(rows[0], ["patient_id", "z0", "z1", "z2", "z3", "z4", "z5"]);
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[1], ["P001", "1.625", "0.05", "-1.525", "-1.5", "0.125", "1.75"]);
    assert_eq!(rows[3][0], "P003");
}

#[test]
fn aggregate_skips_corrupt_files_unless_strict() {
    let tmp = tempdir().unwrap();
    let dir = tmp.path().join("features");
    fs::create_dir(&dir).unwrap();
    for name in ["P001.h2rf", "P002.h2rf"] {
        fs::copy(fixtures().join("h2rf").join(name), dir.join(name)).unwrap();
    }
    fs::copy(fixtures().join("broken/truncated.h2rf"), dir.join("P000.h2rf")).unwrap();
    let out = tmp.path().join("out");
    let r = expect(0, ["aggregate", "--features", s(&dir), "--output-dir", s(&out)]);
    assert!(r.stderr.contains("P000.h2rf"), "{}", r.stderr);
    assert_eq!(csv_rows(out.join("slide_features.csv")).len(), 3);
    expect(1, ["aggregate", "--features", s(&dir), "--output-dir", s(&out), "--strict"]);

    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    expect(1, ["aggregate", "--features", s(&empty), "--output-dir", s(&out)]);
    expect(2, ["aggregate", "--features", s(&tmp.path().join("absent")), "--output-dir", s(&out)]);
}

#[test]
fn aggregate_rejects_duplicate_patients() {
    let tmp = tempdir().unwrap();
    let dir = tmp.path().join("features");
    fs::create_dir(&dir).unwrap();
    fs::copy(fixtures().join("h2rf/P001.h2rf"), dir.join("a.h2rf")).unwrap();
    fs::copy(fixtures().join("h2rf/P001.h2rf"), dir.join("b.h2rf")).unwrap();
    let r = expect(1, ["aggregate", "--features", s(&dir), "--output-dir", s(&tmp.path().join("o"))]);
    assert!(r.stderr.contains("duplicate"));
}

#[test]
fn train_predict_evaluate_round_trip() {
    let tmp = tempdir().unwrap();
    let fx = write_regression_fixture(&tmp.path().join("data"), &small_task(60), 0.2).unwrap();
    let config = small_head_config(tmp.path());
    let out = tmp.path().join("train");
    let train = |out: &std::path::Path| {
        expect(
            0,
            [
                "train",
                "--config",
                s(&config),
                "--features",
                s(&fx.train_features),
                "--expression",
                s(&fx.train_expression),
                "--expression-scale",
                "log2",
                "--panel",
                s(&fx.panel),
                "--output-dir",
                s(out),
            ],
        );
    };
    train(&out);
    let summary = json(out.join("train_summary.json"));
    assert_eq!(summary["patients"], 48);
    assert_eq!(summary["genes"], 6);
    assert_eq!(summary["config"]["head"]["conv1_filters"], 8);
    let history = csv_rows(out.join("history.csv"));
    assert_eq!(history[0], ["epoch", "train_mse", "val_mse", "wall_clock_seconds"]);
    let first: f64 = history[1][1].parse().unwrap();
    let last: f64 = history.last().unwrap()[1].parse().unwrap();
    assert!(last < first, "train MSE {first} -> {last}");

    let again = tmp.path().join("train-again");
    train(&again);
    assert_eq!(json(again.join("train_summary.json"))["model_digest"], summary["model_digest"]);
    assert_eq!(fs::read(out.join("model.h2rm")).unwrap(), fs::read(again.join("model.h2rm")).unwrap());

    let model = out.join("model.h2rm");
    let pred = tmp.path().join("pred");
    expect(
        0,
        [
            "predict",
            "--model",
            s(&model),
            "--features",
            s(&fx.test_features),
            "--panel",
            s(&fx.panel),
            "--output-dir",
            s(&pred),
        ],
    );
    let rows = csv_rows(pred.join("predicted_expression.csv"));
    assert_eq!(rows.len(), 13);
    assert_eq!(rows[0][1], "GENE000");

    let eval = tmp.path().join("eval");
    expect(
        0,
        [
            "evaluate",
            "--model",
            s(&model),
            "--features",
            s(&fx.test_features),
            "--expression",
            s(&fx.test_expression),
            "--expression-scale",
            "log2",
            "--panel",
            s(&fx.panel),
            "--output-dir",
            s(&eval),
        ],
    );
    let e = json(eval.join("evaluation.json"));
    assert_eq!(e["patients"], 12);
    assert_eq!(e["genes"], 6);
    for f in ["gene_metrics.csv", "patient_metrics.csv", "top_genes.csv", "scatter.svg"] {
        assert!(eval.join(f).is_file(), "{f}");
    }

    // A model trained on one panel must not be applied with another.
    let r = expect(1, ["predict", "--model", s(&model), "--features", s(&fx.test_features), "--output-dir", s(&pred)]);
    assert!(r.stderr.contains("panel"), "{}", r.stderr);
}

#[test]
fn train_refuses_too_few_patients() {
    let tmp = tempdir().unwrap();
    let fx = write_regression_fixture(&tmp.path().join("data"), &small_task(5), 0.0).unwrap();
    let r = expect(
        2,
        [
            "train",
            "--features",
            s(&fx.train_features),
            "--expression",
            s(&fx.train_expression),
            "--expression-scale",
            "log2",
            "--panel",
            s(&fx.panel),
            "--output-dir",
            s(&tmp.path().join("o")),
        ],
    );
    assert!(!r.stderr.is_empty());
}

#[test]
fn missing_inputs_exit_with_io_code() {
    let tmp = tempdir().unwrap();
    let out = tmp.path().join("o");
    let nope = tmp.path().join("missing.h2rm");
    expect(2, ["predict", "--model", s(&nope), "--features", s(&fixtures().join("h2rf")), "--output-dir", s(&out)]);
    expect(2, ["evaluate", "--predictions", s(&nope), "--expression", s(&nope), "--output-dir", s(&out)]);
    expect(2, ["train", "--output-dir", s(&out)]);
    expect(2, ["survival", "--clinical", s(&nope), "--subtypes", s(&nope), "--output-dir", s(&out)]);
}

#[test]
fn evaluate_perfect_predictions() {
    let tmp = tempdir().unwrap();
    let fx = write_regression_fixture(
        &tmp.path().join("data"),
        &RegressionTask { n_genes: 24, ..small_task(40) },
        0.5,
    )
    .unwrap();
    let out = tmp.path().join("eval");
    expect(
        0,
        [
            "evaluate",
            "--predictions",
            s(&fx.test_expression),
            "--expression",
            s(&fx.test_expression),
            "--expression-scale",
            "log2",
            "--panel",
            s(&fx.panel),
            "--output-dir",
            s(&out),
        ],
    );
    let e = json(out.join("evaluation.json"));
    assert_eq!(e["median_gene_rho"], 1.0);
    assert_eq!(e["median_patient_rho"], 1.0);
    assert_eq!(e["significant_genes"], 24);
    let top = e["top_genes"].as_array().unwrap();
    assert_eq!(top.len(), 20);
    for (i, g) in top.iter().enumerate() {
        assert_eq!(g["rank"], i + 1);
        let idx: usize = g["symbol"].as_str().unwrap()[4..].parse().unwrap();
        assert_eq!(g["pam50"], idx < 12, "{g}");
    }
    assert_eq!(e["top_pam50"], top.iter().filter(|g| g["pam50"] == true).count());
    let rows = csv_rows(out.join("top_genes.csv"));
    assert_eq!(rows[0], ["rank", "symbol", "rho", "fdr_p", "r2", "pam50"]);
    assert_eq!(rows.len(), 21);
    let svg = fs::read_to_string(out.join("scatter.svg")).unwrap();
    assert_eq!(svg.matches("(rho=1.00)").count(), 20);
    assert!(svg.contains("#d62728"));
}

#[test]
fn evaluate_without_overlap_fails() {
    let tmp = tempdir().unwrap();
    let fx = write_regression_fixture(&tmp.path().join("data"), &small_task(20), 0.5).unwrap();
    let r = expect(
        1,
        [
            "evaluate",
            "--predictions",
            s(&fx.train_expression),
            "--expression",
            s(&fx.test_expression),
            "--expression-scale",
            "log2",
            "--panel",
            s(&fx.panel),
            "--output-dir",
            s(&tmp.path().join("o")),
        ],
    );
    assert!(r.stderr.contains("no patient"), "{}", r.stderr);
}

#[test]
fn survival_report_and_curves() {
    let tmp = tempdir().unwrap();
    let fx = write_survival_fixture(&tmp.path().join("data"), 400, 0, true).unwrap();
    let out = tmp.path().join("out");
    expect(0, ["survival", "--clinical", s(&fx.clinical), "--subtypes", s(&fx.subtypes), "--output-dir", s(&out)]);
    let r = json(out.join("survival_report.json"));
    let cohort = &r["cohort"];
    assert_eq!(cohort["clinical_patients"], 400);
    assert_eq!(
        cohort["luminal_a"].as_u64().unwrap() + cohort["luminal_b"].as_u64().unwrap(),
        r["report"]["n"].as_u64().unwrap()
    );
    let rows = r["report"]["rows"].as_array().unwrap();
    assert!(rows.iter().any(|row| row["parameter"] == "Predicted subtype"));
    for row in rows {
        for fit in ["univariate", "multivariate"] {
            let h = &row[fit];
            let (lo, hr, hi) = (h["ci_low"].as_f64().unwrap(), h["hr"].as_f64().unwrap(), h["ci_high"].as_f64().unwrap());
            assert!(lo < hr && hr < hi, "{row}");
        }
    }
    let km = csv_rows(out.join("km_luma.csv"));
    assert_eq!(km[0], ["time", "survival", "at_risk", "events"]);
    let surv: Vec<f64> = km[1..].iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(surv.windows(2).all(|w| w[1] <= w[0]));

    let svg = fs::read_to_string(out.join("km.svg")).unwrap();
    let paths: Vec<&str> = svg.lines().filter(|l| l.contains("class=\"km\"")).collect();
    assert_eq!(paths.len(), 2);
    for p in paths {
        let d = p.split("d=\"").nth(1).unwrap().split('"').next().unwrap();
        // Screen y grows downward, so survival steps never move up.
        let ys: Vec<f64> = d
            .split(' ')
            .filter_map(|t| t.strip_prefix('V').or_else(|| t.strip_prefix('M').and_then(|m| m.split(',').nth(1))))
            .map(|v| v.parse().unwrap())
            .collect();
        assert!(ys.len() > 2);
        assert!(ys.windows(2).all(|w| w[1] >= w[0]), "{d}");
    }
}

#[test]
fn survival_without_events_fails_cleanly() {
    let tmp = tempdir().unwrap();
    let fx = write_survival_fixture(&tmp.path().join("data"), 100, 1, false).unwrap();
    let r = expect(
        1,
        ["survival", "--clinical", s(&fx.clinical), "--subtypes", s(&fx.subtypes), "--output-dir", s(&tmp.path().join("o"))],
    );
    assert!(r.stderr.contains("event"), "{}", r.stderr);
    assert!(!r.stderr.contains("panicked"));
}

#[test]
fn subtype_writes_calls_and_report() {
    let tmp = tempdir().unwrap();
    let fx = write_subtype_fixture(&tmp.path().join("data"), 1).unwrap();
    let out = tmp.path().join("out");
    expect(
        0,
        [
            "subtype",
            "--expression",
            s(&fx.train_expression),
            "--expression-scale",
            "log2",
            "--labels",
            s(&fx.train_labels),
            "--query",
            s(&fx.query_expression),
            "--query-labels",
            s(&fx.query_labels),
            "--panel",
            s(&fx.panel),
            "--output-dir",
            s(&out),
        ],
    );
    let r = json(out.join("subtype_report.json"));
    assert_eq!(r["genes"].as_array().unwrap().len(), 50);
    assert_eq!(r["query_patients"], 200);
    assert!(r["query"]["centroid"]["accuracy"].as_f64().unwrap() >= 0.95);
    assert!(r["training"]["voting"]["accuracy"].as_f64().unwrap() >= 0.98);
    let calls = csv_rows(out.join("centroid_calls.csv"));
    assert_eq!(calls[0], ["patient_id", "subtype", "rho_luma", "rho_lumb", "rho_basal", "rho_her2"]);
    assert_eq!(calls.len(), 201);
    assert_eq!(csv_rows(out.join("voting_predictions.csv")).len(), 201);
    assert!(out.join("centroids.json").is_file());
}

#[test]
fn benchmark_refuses_single_patient_and_honours_power_setting() {
    let tmp = tempdir().unwrap();
    let out = tmp.path().join("o");
    let r = expect(1, ["benchmark", "--patients", "1", "--output-dir", s(&out)]);
    assert!(r.stderr.contains("at least 2"));

    let config = small_head_config(tmp.path());
    expect(
        0,
        [
            "benchmark",
            "--config",
            s(&config),
            "--patients",
            "24",
            "--patches",
            "10",
            "--feature-dim",
            "16",
            "--genes",
            "3",
            "--watts",
            "450",
            "--devices",
            "2",
            "--output-dir",
            s(&out),
        ],
    );
    let b = json(out.join("benchmark.json"));
    assert_eq!(b["energy"]["watts"], 450.0);
    assert_eq!(b["energy"]["devices"], 2.0);
    assert_eq!(b["aggregated"]["samples_per_epoch"], 22);
    assert_eq!(b["patchwise"]["samples_per_epoch"], 22 * 10);
    let secs = b["aggregated"]["train_seconds"].as_f64().unwrap();
    let kwh = b["aggregated"]["kwh"].as_f64().unwrap();
    assert!((kwh - 2.0 * 450.0 * secs / 3600.0 / 1000.0).abs() <= 1e-15 + 1e-12 * kwh);
    assert_eq!(b["reference_example"]["kwh"], 10.176);
    assert_eq!(b["reference_example"]["matches"], true);
}

#[test]
fn config_supplies_paths_and_flags_override_it() {
    let tmp = tempdir().unwrap();
    let data = tmp.path().join("data");
    fs::create_dir(&data).unwrap();
    for name in ["P001.h2rf", "P002.h2rf"] {
        fs::copy(fixtures().join("h2rf").join(name), data.join(name)).unwrap();
    }
    let config = tmp.path().join("pipeline.toml");
    fs::write(&config, "seed = 7\n\n[paths]\nfeatures = \"data\"\noutput_dir = \"from-config\"\n").unwrap();
    expect(0, ["aggregate", "--config", s(&config)]);
    assert_eq!(csv_rows(tmp.path().join("from-config/slide_features.csv")).len(), 3);

    let flag_out = tmp.path().join("from-flag");
    expect(0, ["aggregate", "--config", s(&config), "--features", s(&fixtures().join("h2rf")), "--output-dir", s(&flag_out)]);
    assert_eq!(csv_rows(flag_out.join("slide_features.csv")).len(), 4);

    fs::write(&config, "[paths]\nfeatures = \"nowhere\"\n").unwrap();
    expect(2, ["aggregate", "--config", s(&config)]);
    fs::write(&config, "[train]\nlearning_rat = 0.1\n").unwrap();
    expect(2, ["aggregate", "--config", s(&config)]);
}
