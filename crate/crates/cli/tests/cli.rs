use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = r#"
[mcmc]
total_iterations = 300
burn_in = 100

[generate]
n_communities = 40
n_test_communities = 10
n_aux_communities = 5
elite = { prevalence = 0.3, effect = -0.5 }

[plan]
sizes = [5, 15]
replications = 5
"#;

fn hytarget(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hytarget")).args(args).output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Temp dir holding `config.toml` and a generated population in `data/`.
fn setup(config: &str) -> (TempDir, PathBuf, PathBuf) {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("config.toml");
    std::fs::write(&cfg, config).unwrap();
    let data = tmp.path().join("data");
    ok(&hytarget(&["generate", "--seed", "3", "--config", s(&cfg), "--out", s(&data)]));
    (tmp, cfg, data)
}

fn read_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn generated_files_load_back() {
    let (_tmp, _, data) = setup(SMALL);
    for f in ["census.csv", "rankings.csv", "survey.csv", "quotas.csv", "truth.csv", "splits.csv", "manifest.json"] {
        assert!(data.join(f).exists(), "{f} missing");
    }
    let ds: hytarget::Dataset = hytarget::data::io::load_dataset(
        data.join("census.csv"),
        data.join("rankings.csv"),
        Some(data.join("quotas.csv").as_path()),
        Some(data.join("survey.csv").as_path()),
    )
    .unwrap();
    assert_eq!(ds.communities().len(), 40);
}

#[test]
fn fit_writes_one_row_per_covariate() {
    let (tmp, cfg, data) = setup(SMALL);
    let out = tmp.path().join("fit");
    ok(&hytarget(&[
        "fit",
        "--config",
        s(&cfg),
        "--census",
        s(&data.join("census.csv")),
        "--rankings",
        s(&data.join("rankings.csv")),
        "--out",
        s(&out),
    ]));
    let rows = read_rows(&out.join("coefficients.csv"));
    // two binary, three continuous and the elite indicator
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r[0] == "hybrid"));
    assert!(out.join("manifest.json").exists());
}

#[test]
fn missing_rankings_is_a_usage_error() {
    let (tmp, cfg, data) = setup(SMALL);
    let out = hytarget(&[
        "fit",
        "--config",
        s(&cfg),
        "--census",
        s(&data.join("census.csv")),
        "--out",
        s(&tmp.path().join("fit")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--rankings"));
}

#[test]
fn auxiliary_model_needs_survey() {
    let (tmp, _, data) = setup(SMALL);
    let cfg = tmp.path().join("aux.toml");
    std::fs::write(&cfg, format!("{SMALL}\n[model]\nauxiliary = true\n")).unwrap();
    let out = hytarget(&[
        "fit",
        "--config",
        s(&cfg),
        "--census",
        s(&data.join("census.csv")),
        "--rankings",
        s(&data.join("rankings.csv")),
        "--out",
        s(&tmp.path().join("fit")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--survey"));
}

#[test]
fn evaluate_is_thread_count_independent() {
    let (tmp, cfg, data) = setup(SMALL);
    let run = |threads: &str| {
        let out = tmp.path().join(format!("eval{threads}"));
        ok(&hytarget(&[
            "evaluate",
            "--seed",
            "9",
            "--plan",
            s(&cfg),
            "--data",
            s(&data),
            "--threads",
            threads,
            "--out",
            s(&out),
        ]));
        out
    };
    let one = run("1");
    let three = run("3");
    assert_eq!(read_rows(&one.join("summary.csv")).len(), 8);
    for f in ["summary.csv", "errors.csv"] {
        assert_eq!(std::fs::read(one.join(f)).unwrap(), std::fs::read(three.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn zero_replications_is_a_usage_error() {
    let (tmp, _, data) = setup(SMALL);
    let cfg = tmp.path().join("zero.toml");
    std::fs::write(&cfg, SMALL.replace("replications = 5", "replications = 0")).unwrap();
    let out = hytarget(&["evaluate", "--plan", s(&cfg), "--data", s(&data), "--out", s(&tmp.path().join("e"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn drop_elite_changes_only_elite_households() {
    let (tmp, cfg, data) = setup(SMALL);
    let fit = tmp.path().join("fit");
    ok(&hytarget(&[
        "fit",
        "--config",
        s(&cfg),
        "--census",
        s(&data.join("census.csv")),
        "--rankings",
        s(&data.join("rankings.csv")),
        "--out",
        s(&fit),
    ]));
    let score = |drop: bool, name: &str| {
        let out = tmp.path().join(name);
        let census = data.join("census.csv");
        let coef = fit.join("coefficients.csv");
        let mut args = vec!["score", "--config", s(&cfg), "--census", s(&census), "--coefficients", s(&coef)];
        args.extend(["--out", s(&out)]);
        if drop {
            args.push("--drop-elite");
        }
        ok(&hytarget(&args));
        read_rows(&out.join("scores.csv"))
    };
    let full = score(false, "full");
    let dropped = score(true, "dropped");
    let census = read_rows(&data.join("census.csv"));
    let mut headers = csv::Reader::from_path(data.join("census.csv")).unwrap();
    let col = headers.headers().unwrap().iter().position(|h| h.starts_with("elite")).unwrap();
    let elite: std::collections::BTreeMap<String, bool> =
        census.iter().map(|r| (r[0].clone(), r[col].parse::<f64>().unwrap() != 0.0)).collect();
    let mut changed = 0;
    for (a, b) in full.iter().zip(&dropped) {
        assert_eq!(a[0], b[0]);
        let differs = a[2] != b[2];
        assert_eq!(differs, elite[&a[0]], "household {}", a[0]);
        changed += usize::from(differs);
    }
    assert!(changed > 0);
}

#[test]
fn updated_prior_feeds_next_fit() {
    let (tmp, cfg, data) = setup(SMALL);
    let fit_args = |config: &Path, out: &Path, extra: &[&str]| {
        let mut v: Vec<String> = [
            "fit",
            "--config",
            s(config),
            "--census",
            s(&data.join("census.csv")),
            "--rankings",
            s(&data.join("rankings.csv")),
            "--out",
            s(out),
        ]
        .iter()
        .map(|a| a.to_string())
        .collect();
        v.extend(extra.iter().map(|a| a.to_string()));
        v
    };
    let first = tmp.path().join("p1");
    let args = fit_args(&cfg, &first, &["--samples"]);
    ok(&hytarget(&args.iter().map(String::as_str).collect::<Vec<_>>()));
    let prior = tmp.path().join("prior.toml");
    ok(&hytarget(&["update", "--config", s(&cfg), "--from", s(&first.join("samples.csv")), "--out", s(&prior)]));
    let second = tmp.path().join("p2");
    let args = fit_args(&prior, &second, &[]);
    let out = hytarget(&args.iter().map(String::as_str).collect::<Vec<_>>());
    ok(&out);
    let log = String::from_utf8_lossy(&out.stderr);
    assert!(log.contains("prior source: updated"), "{log}");
    let manifest = std::fs::read_to_string(second.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"prior_source\": \"updated"));
}

#[test]
fn same_seed_same_outputs() {
    let (tmp, cfg, data) = setup(SMALL);
    let run = |name: &str| {
        let out = tmp.path().join(name);
        ok(&hytarget(&[
            "fit",
            "--seed",
            "4",
            "--config",
            s(&cfg),
            "--census",
            s(&data.join("census.csv")),
            "--rankings",
            s(&data.join("rankings.csv")),
            "--out",
            s(&out),
        ]));
        std::fs::read(out.join("coefficients.csv")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
    let again = tmp.path().join("data2");
    ok(&hytarget(&["generate", "--seed", "3", "--config", s(&cfg), "--out", s(&again)]));
    assert_eq!(std::fs::read(data.join("census.csv")).unwrap(), std::fs::read(again.join("census.csv")).unwrap());
}

#[test]
fn fit_standardizes_unless_raw() {
    let (tmp, cfg, data) = setup(SMALL);
    let fit = |out: &Path, raw: bool| {
        let mut args = vec![
            "fit".to_string(),
            "--config".into(),
            s(&cfg).into(),
            "--census".into(),
            s(&data.join("census.csv")).into(),
            "--rankings".into(),
            s(&data.join("rankings.csv")).into(),
            "--out".into(),
            s(out).into(),
        ];
        if raw {
            args.push("--raw".into());
        }
        ok(&hytarget(&args.iter().map(String::as_str).collect::<Vec<_>>()));
    };
    let scaled = tmp.path().join("scaled");
    let raw = tmp.path().join("raw");
    fit(&scaled, false);
    fit(&raw, true);
    assert!(scaled.join("scaling.csv").exists());
    assert!(!raw.join("scaling.csv").exists());
    let kinds: Vec<String> = read_rows(&scaled.join("scaling.csv")).into_iter().map(|r| r[1].clone()).collect();
    assert_eq!(kinds.iter().filter(|k| *k == "binary").count(), 3, "{kinds:?}");

    // score picks up the scaling file beside the coefficients by itself
    let census = data.join("census.csv");
    let coef = scaled.join("coefficients.csv");
    let scaling = scaled.join("scaling.csv");
    let (auto, explicit) = (tmp.path().join("auto"), tmp.path().join("explicit"));
    ok(&hytarget(&["score", "--census", s(&census), "--coefficients", s(&coef), "--out", s(&auto)]));
    ok(&hytarget(&[
        "score",
        "--census",
        s(&census),
        "--coefficients",
        s(&coef),
        "--scaling",
        s(&scaling),
        "--out",
        s(&explicit),
    ]));
    assert_eq!(std::fs::read(auto.join("scores.csv")).unwrap(), std::fs::read(explicit.join("scores.csv")).unwrap());
}
