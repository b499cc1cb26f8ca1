use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn slaforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slaforge")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = slaforge(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const INSTANCE: &str = "category,borough,lambda,risk\nHazard,Queens,1,4\nHazard,Bronx,1,1\n";

#[test]
fn solve_two_borough_prices() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("instance.csv");
    fs::write(&inst, INSTANCE).unwrap();
    let text = ok(&["solve", "--instance", p(&inst), "--budget", "4", "--alpha", "1", "--gamma", "0"]);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let s = &v["stylized"];
    assert!((s["price_of_equity"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((s["price_of_efficiency"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    let sol = &s["solutions"][0];
    assert!((sol["g"].as_f64().unwrap() - 5.0).abs() < 1e-9);
    assert!((sol["sla_days"]["Hazard"]["Queens"].as_f64().unwrap() - 0.625).abs() < 1e-9);

    let sweep = ok(&["solve", "--instance", p(&inst), "--budget", "4", "--sweep", "0:1:0.5"]);
    let v: serde_json::Value = serde_json::from_str(&sweep).unwrap();
    assert_eq!(v["stylized"]["solutions"].as_array().unwrap().len(), 3);
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("instance.csv");
    fs::write(&inst, "borough,category,lambda,risk\nQ,H,1,1\n").unwrap();
    let out = slaforge(&["solve", "--instance", p(&inst), "--budget", "4"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));

    fs::write(&inst, INSTANCE).unwrap();
    let out = slaforge(&["solve", "--instance", p(&inst), "--budget", "1"]);
    assert_eq!(out.status.code(), Some(2));

    let out = slaforge(&["solve", "--instance", p(&inst)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn io_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("instance.csv");
    fs::write(&inst, INSTANCE).unwrap();
    let blocker = dir.path().join("occupied");
    fs::write(&blocker, "").unwrap();
    let out = slaforge(&[
        "synth", "--instance", p(&inst), "--budget", "4", "--days", "3", "--out", p(&blocker),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let inst = dir.path().join("instance.csv");
        fs::write(
            &inst,
            "category,borough,lambda,risk\nHazard,Queens,3,10\nHazard,Bronx,2,10\nPrune,Queens,2,4\nPrune,Bronx,3,4\n",
        )
        .unwrap();
        for (name, seed) in [("train", "1"), ("test", "2")] {
            ok(&[
                "synth", "--instance", p(&inst), "--budget", "12", "--days", "120", "--utilization", "0.6",
                "--seed", seed, "--out", p(&dir.path().join(name)),
            ]);
        }
        fs::write(
            dir.path().join("config.toml"),
            "# desk run\n[simulation]\nreview_period = 7\nfcfs_violation = 0.1\ntrace_repeats = 1\n\n[search]\nsampler = \"evolutionary\"\n",
        )
        .unwrap();
        fs::write(
            dir.path().join("baseline.csv"),
            "kind,category,borough,value\nbudget,,Queens,1\nbudget,,Bronx,1\ngps,Hazard,Queens,1\ngps,Prune,Queens,1\ngps,Hazard,Bronx,1\ngps,Prune,Bronx,1\n",
        )
        .unwrap();
        Self { dir }
    }

    fn path(&self, rel: &str) -> String {
        p(&self.dir.path().join(rel)).to_string()
    }

    fn search(&self, out: &str, seed: &str) -> String {
        ok(&[
            "search",
            "--arrivals", &self.path("train/arrivals.csv"),
            "--capacity", &self.path("train/capacity.csv"),
            "--config", &self.path("config.toml"),
            "--class", "borough",
            "--iterations", "3",
            "--batch", "6",
            "--seed", seed,
            "--out", &self.path(out),
        ])
    }
}

#[test]
fn search_pipeline() {
    let ws = Workspace::new();
    ws.search("run1", "5");
    ws.search("run2", "5");
    let report1 = fs::read(ws.path("run1/report.json")).unwrap();
    assert_eq!(report1, fs::read(ws.path("run2/report.json")).unwrap());
    for f in ["pareto.csv", "front_policies.csv", "hypervolume.csv"] {
        assert_eq!(fs::read(ws.path(&format!("run1/{f}"))).unwrap(), fs::read(ws.path(&format!("run2/{f}"))).unwrap());
    }

    let report: serde_json::Value = serde_json::from_slice(&report1).unwrap();
    assert_eq!(report["config"].as_str().unwrap(), fs::read_to_string(ws.path("config.toml")).unwrap());
    assert_eq!(report["settings"]["search"]["iterations"], 3);

    let pareto = fs::read_to_string(ws.path("run1/pareto.csv")).unwrap();
    let rows: Vec<(f64, f64)> = pareto
        .lines()
        .skip(1)
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            (c[1].parse().unwrap(), c[2].parse().unwrap())
        })
        .collect();
    assert!(!rows.is_empty());
    assert!(rows.windows(2).all(|w| w[0].0 <= w[1].0));
    // Front values in the report are exact.
    for (row, entry) in rows.iter().zip(report["front"].as_array().unwrap()) {
        assert_eq!(row.0, entry["g"].as_f64().unwrap());
    }
    let hv = fs::read_to_string(ws.path("run1/hypervolume.csv")).unwrap();
    let hv: Vec<f64> = hv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(hv.len(), 3);
    assert!(hv.windows(2).all(|w| w[0] <= w[1]));

    let table = ok(&[
        "evaluate",
        "--front", &ws.path("run1/front_policies.csv"),
        "--arrivals", &ws.path("test/arrivals.csv"),
        "--capacity", &ws.path("test/capacity.csv"),
        "--baseline", &ws.path("baseline.csv"),
        "--config", &ws.path("config.toml"),
        "--out", &ws.path("eval"),
    ]);
    assert!(table.starts_with("policy_id,g,f,g_relative,f_relative,role\n"));
    assert_eq!(table.lines().count(), rows.len() + 2);
    assert!(table.contains("most_efficient"));
    assert!(table.lines().last().unwrap().starts_with("baseline,"));

    // On the training trace the front reproduces its search scores.
    let same = ok(&[
        "evaluate",
        "--front", &ws.path("run1/front_policies.csv"),
        "--arrivals", &ws.path("train/arrivals.csv"),
        "--capacity", &ws.path("train/capacity.csv"),
        "--baseline", &ws.path("baseline.csv"),
        "--config", &ws.path("config.toml"),
        "--seed", "5",
    ]);
    for (line, (g, f)) in same.lines().skip(1).zip(&rows) {
        let c: Vec<&str> = line.split(',').collect();
        assert_eq!(c[1].parse::<f64>().unwrap(), *g);
        assert_eq!(c[2].parse::<f64>().unwrap(), *f);
    }
}

#[test]
fn simulate_reports_metrics() {
    let ws = Workspace::new();
    let args = [
        "simulate",
        "--arrivals", &ws.path("train/arrivals.csv"),
        "--capacity", &ws.path("train/capacity.csv"),
        "--policy", &ws.path("baseline.csv"),
        "--config", &ws.path("config.toml"),
        "--seed", "3",
        "--equity", "max-cost",
    ];
    let text = ok(&args);
    assert_eq!(text, ok(&args));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let policy = &v["policies"][0];
    let g = policy["g"].as_f64().unwrap();
    let costs: f64 = policy["detail"]["cost_b"].as_array().unwrap().iter().map(|c| c.as_f64().unwrap()).sum();
    assert_eq!(g, costs);
    assert!(policy["f"].as_f64().unwrap() <= g);
    assert_eq!(v["risk"]["data"], serde_json::json!([10.0, 10.0, 4.0, 4.0]));
}

#[test]
fn city_search_runs() {
    let ws = Workspace::new();
    ok(&[
        "search",
        "--arrivals", &ws.path("train/arrivals.csv"),
        "--capacity", &ws.path("train/capacity.csv"),
        "--class", "city",
        "--iterations", "2",
        "--batch", "4",
        "--repeats", "1",
        "--out", &ws.path("city"),
    ]);
    let front = fs::read_to_string(ws.path("city/front_policies.csv")).unwrap();
    assert!(front.lines().nth(1).unwrap().contains(",city,"));
}

#[test]
fn unknown_category_needs_risk() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.csv"), "date,borough,category\n2019-01-01,Q,Mystery\n").unwrap();
    fs::write(dir.path().join("c.csv"), "date,inspections\n2019-01-01,1\n").unwrap();
    fs::write(dir.path().join("p.csv"), "kind,category,borough,value\nbudget,,Q,1\n").unwrap();
    let (a, c, pol) = (dir.path().join("a.csv"), dir.path().join("c.csv"), dir.path().join("p.csv"));
    let args = ["simulate", "--arrivals", p(&a), "--capacity", p(&c), "--policy", p(&pol)];
    let out = slaforge(&args);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Mystery"));

    fs::write(dir.path().join("cfg.toml"), "[metrics.risk]\nMystery = 3\n").unwrap();
    let mut with_cfg = args.to_vec();
    let cfg = dir.path().join("cfg.toml");
    with_cfg.extend(["--config", p(&cfg)]);
    ok(&with_cfg);
}
