use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use uorrl::artifacts::read_csv;
use uorrl::ExperimentConfig;

const CHAIN: &str = r#"{
    "schema_version": 1,
    "env": {"env": "param_chain", "n_states": 5, "gamma": 0.9},
    "distribution": {"kind": "uniform", "bounds": [[0.0, 0.5]]},
    "preference": {"kind": "power", "k": 1},
    "mode": "db",
    "metric": {"delta": 0.25, "n_rollouts_per_block": 4},
    "trainer": {"max_iterations": 6, "learning_rate": 1.0},
    "seeds": [1, 2],
    "eval": {"n_trajectories": 200, "rollouts_per_cell": 5, "k": [0, 1, 21]}
}"#;

const MASS: &str = r#"{
    "schema_version": 1,
    "env": {"env": "param_mass", "horizon": 20},
    "distribution": {"kind": "truncated_gaussian", "bounds": [[0.8, 1.2], [0.0, 0.3]], "mean": [1.0, 0.1], "std": [0.1, 0.1]},
    "preference": {"kind": "power", "k": 2},
    "mode": "db",
    "metric": {"delta": 0.2, "n_rollouts_per_block": 2},
    "trainer": {"max_iterations": 2},
    "seeds": [0],
    "eval": {"n_trajectories": 50, "rollouts_per_cell": 2}
}"#;

fn uorrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uorrl"))
        .args(args)
        .env("UORRL_THREADS", "2")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn column(rows: &[Vec<String>], head: &[String], name: &str) -> Vec<f64> {
    let i = head.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

#[test]
fn divide_unit_square() {
    let dir = tempfile::tempdir().unwrap();
    let out = uorrl(&[
        "divide",
        "--bounds",
        "0:1,0:1",
        "--delta",
        "0.5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (head, rows) = read_csv(&dir.path().join("blocks.csv")).unwrap();
    assert_eq!(rows.len(), 9);
    for d in column(&rows, &head, "diameter") {
        assert!(d <= 0.5 + 1e-12);
    }
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 10);
}

#[test]
fn divide_with_config_adds_masses() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "mass.json", MASS);
    let out = uorrl(&[
        "divide",
        "--config",
        &cfg,
        "--delta",
        "0.1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let (head, rows) = read_csv(&dir.path().join("blocks.csv")).unwrap();
    let total: f64 = column(&rows, &head, "mass").iter().sum();
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let bad_key = write_config(
        d,
        "bad.json",
        &CHAIN.replace("\"mode\": \"db\"", "\"mode\": \"db\", \"extra\": 1"),
    );
    assert_eq!(code(&uorrl(&["train", "--config", &bad_key])), 2);
    let bad_value = write_config(d, "neg.json", &CHAIN.replace("\"k\": 1", "\"k\": -1"));
    assert_eq!(code(&uorrl(&["train", "--config", &bad_value])), 2);
    assert_eq!(code(&uorrl(&["train"])), 2);
    assert_eq!(
        code(&uorrl(&["train", "--config", d.join("missing.json").to_str().unwrap()])),
        1
    );
    assert_eq!(code(&uorrl(&["suggest-sizes", "--epsilon", "1e-9", "--rho", "0.5"])), 4);

    let huge = MASS.replace(
        "\"env\": \"param_mass\", \"horizon\": 20",
        "\"env\": \"param_mass\", \"horizon\": 20, \"x_max\": 1e300, \"x0\": 1e200",
    );
    let huge = write_config(d, "huge.json", &huge);
    let out = uorrl(&["train", "--config", &huge, "--out", d.join("huge").to_str().unwrap()]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));

    let chain = write_config(d, "chain.json", CHAIN);
    let run = d.join("run");
    assert_eq!(
        code(&uorrl(&[
            "train",
            "--config",
            &chain,
            "--seed",
            "1",
            "--out",
            run.to_str().unwrap()
        ])),
        0
    );
    let few = write_config(
        d,
        "few.json",
        &CHAIN.replace("\"n_trajectories\": 200", "\"n_trajectories\": 5"),
    );
    let policy = run.join("policy_seed1.json");
    let out = uorrl(&[
        "art-diff",
        "--config",
        &few,
        "--policy",
        policy.to_str().unwrap(),
        "--policy",
        policy.to_str().unwrap(),
        "--k",
        "0,1",
        "--out",
        d.join("art").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 4);
}

#[test]
fn train_writes_one_set_of_files_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "chain.json", CHAIN);
    let out_dir = dir.path().join("out");
    let out = uorrl(&["train", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for seed in [1, 2] {
        for name in [
            "policy_seed{}.json",
            "history_seed{}.csv",
            "timing_seed{}.csv",
            "audit_seed{}.csv",
        ] {
            assert!(
                out_dir.join(name.replace("{}", &seed.to_string())).exists(),
                "{name} for seed {seed}"
            );
        }
        let (head, rows) = read_csv(&out_dir.join(format!("history_seed{seed}.csv"))).unwrap();
        assert_eq!(head, ["iteration", "metric_value"]);
        assert_eq!(rows.len(), 6);
        let (head, rows) = read_csv(&out_dir.join(format!("audit_seed{seed}.csv"))).unwrap();
        assert_eq!(rows.len(), 2);
        let weights: f64 = column(&rows, &head, "weight").iter().sum();
        assert!((weights - 1.0).abs() < 1e-12);
    }
    let written = ExperimentConfig::load(&out_dir.join("config.json")).unwrap();
    assert_eq!(
        written,
        ExperimentConfig::from_str(CHAIN, Path::new("chain.json")).unwrap()
    );
    let (_, sizing) = read_csv(&out_dir.join("sizing.csv")).unwrap();
    assert_eq!(sizing[0][..3], ["db", "0.25", "2"]);

    // a single seed override leaves other seeds alone and reproduces the run
    let single = dir.path().join("single");
    let out = uorrl(&[
        "train",
        "--config",
        &cfg,
        "--seed",
        "2",
        "--out",
        single.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(!single.join("policy_seed1.json").exists());
    assert_eq!(
        fs::read(single.join("history_seed2.csv")).unwrap(),
        fs::read(out_dir.join("history_seed2.csv")).unwrap()
    );
}

#[test]
fn df_sizing_is_logged() {
    let dir = tempfile::tempdir().unwrap();
    let text = CHAIN
        .replace("\"mode\": \"db\"", "\"mode\": \"df\"")
        .replace("\"delta\": 0.25, ", "\"epsilon\": 0.5, \"rho\": 0.36787944117144233, ");
    let cfg = write_config(dir.path(), "df.json", &text);
    let out_dir = dir.path().join("out");
    let out = uorrl(&[
        "train",
        "--config",
        &cfg,
        "--seed",
        "1",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("n1 = 4, n2 = 16"));
    let (head, rows) = read_csv(&out_dir.join("sizing.csv")).unwrap();
    assert_eq!(column(&rows, &head, "n1"), [4.0]);
    assert_eq!(column(&rows, &head, "n2"), [16.0]);
    let (_, audit) = read_csv(&out_dir.join("audit_seed1.csv")).unwrap();
    assert_eq!(audit.len(), 4);
}

#[test]
fn eval_outputs_match_their_contracts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "chain.json", CHAIN);
    let run = dir.path().join("run");
    assert_eq!(
        code(&uorrl(&["train", "--config", &cfg, "--out", run.to_str().unwrap()])),
        0
    );
    let p1 = run.join("policy_seed1.json");
    let p2 = run.join("policy_seed2.json");
    let eval_dir = dir.path().join("eval");
    let out = uorrl(&[
        "eval",
        "--config",
        &cfg,
        "--policy",
        p1.to_str().unwrap(),
        "--policy",
        p2.to_str().unwrap(),
        "--grid",
        "7",
        "--out",
        eval_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let (head, rows) = read_csv(&eval_dir.join("heatmap_policy_seed1.csv")).unwrap();
    assert_eq!(head, ["x_index", "x_center", "value", "metric"]);
    assert_eq!(rows.len(), 7);

    let (thead, trows) = read_csv(&eval_dir.join("trajectories.csv")).unwrap();
    assert_eq!(thead, ["policy", "trajectory", "param_0", "return"]);
    assert_eq!(trows.len(), 400);

    let (shead, srows) = read_csv(&eval_dir.join("summary.csv")).unwrap();
    assert_eq!(shead, ["statistic", "mean", "std", "policy_seed1", "policy_seed2"]);
    let stat = |name: &str| -> Vec<f64> {
        let row = srows.iter().find(|r| r[0] == name).unwrap();
        row[1..].iter().map(|v| v.parse().unwrap()).collect()
    };
    let k0 = stat("metric_k0");
    let avg = stat("average_return");
    for i in 2..4 {
        assert!((k0[i] - avg[i]).abs() <= 1e-12 * (1.0 + avg[i].abs()));
    }

    // worst-10% from re-sorting the per-trajectory file
    let worst = stat("worst10_return");
    for (col, name) in ["policy_seed1", "policy_seed2"].iter().enumerate() {
        let mut returns: Vec<f64> = trows
            .iter()
            .filter(|r| r[0] == *name)
            .map(|r| r[3].parse().unwrap())
            .collect();
        returns.sort_by(f64::total_cmp);
        let bottom = &returns[..returns.len() / 10];
        let expected = bottom.iter().sum::<f64>() / bottom.len() as f64;
        assert!((worst[2 + col] - expected).abs() <= 1e-12);
    }
}

#[test]
fn eval_two_dimensional_heat_map() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "mass.json", MASS);
    let run = dir.path().join("run");
    assert_eq!(
        code(&uorrl(&["train", "--config", &cfg, "--out", run.to_str().unwrap()])),
        0
    );
    let policy = run.join("policy_seed0.json");
    let eval_dir = dir.path().join("eval");
    let out = uorrl(&[
        "eval",
        "--config",
        &cfg,
        "--policy",
        policy.to_str().unwrap(),
        "--grid",
        "4x3",
        "--out",
        eval_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (head, rows) = read_csv(&eval_dir.join("heatmap_policy_seed0.csv")).unwrap();
    assert_eq!(head, ["x_index", "y_index", "x_center", "y_center", "value", "metric"]);
    assert_eq!(rows.len(), 12);

    let bad = uorrl(&[
        "eval",
        "--config",
        &cfg,
        "--policy",
        policy.to_str().unwrap(),
        "--grid",
        "4",
        "--out",
        eval_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn art_diff_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "chain.json", CHAIN);
    let run = dir.path().join("run");
    assert_eq!(
        code(&uorrl(&["train", "--config", &cfg, "--out", run.to_str().unwrap()])),
        0
    );
    let p1 = run.join("policy_seed1.json");
    let p2 = run.join("policy_seed2.json");
    let art = dir.path().join("art");
    let out = uorrl(&[
        "art-diff",
        "--config",
        &cfg,
        "--policy",
        p1.to_str().unwrap(),
        "--policy",
        p2.to_str().unwrap(),
        "--policy",
        p1.to_str().unwrap(),
        "--k",
        "5,0,21",
        "--out",
        art.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (head, rows) = read_csv(&art.join("art_diff.csv")).unwrap();
    assert_eq!(rows.len(), 20);
    assert_eq!(column(&rows, &head, "k_from")[0], 0.0);
    assert_eq!(column(&rows, &head, "k_to")[19], 21.0);
    // k = 5 and k = 21 share a policy file
    let diffs = column(&rows, &head, "normalized_diff");
    assert!(diffs[10..].iter().all(|d| *d == 0.0));
    assert!(diffs[..10].iter().any(|d| *d != 0.0));
}

#[test]
fn suggest_sizes_prints_a_table() {
    let out = uorrl(&["suggest-sizes", "--epsilon", "0.5", "--rho", "0.36787944117144233"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("n1\t4"));
    assert!(text.contains("n2\t16"));
}
