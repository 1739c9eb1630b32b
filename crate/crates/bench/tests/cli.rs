use std::fs;
use std::path::Path;

use mbo_bench::cli::cli_main;
use mbo_bench::config::RunConfig;
use mbo_bench::problems::{branin, sinusoidal};
use mbo_bench::rsns::{build_scale, mean_sd, rsns, RsnsScale, SubsampleMode};
use mbo_bench::runner::run_method;
use mbo_bench::trace::{build_trace, read_trace, write_trace, TraceFormat};
use mbo_core::engine::Clock;
use mbo_core::MboRng;
use proptest::prelude::*;
use rand::SeedableRng;
use serde_json::json;

fn mbo(args: &[&str]) -> i32 {
    cli_main(std::iter::once("mbo").chain(args.iter().copied()))
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn run_writes_trace_and_result() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", r#"{"problem": "sinusoidal", "budget": 7}"#);
    let out = tmp.path().join("o");
    assert_eq!(mbo(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--format", "jsonl"]), 0);
    let trace = read_trace(fs::File::open(out.join("trace.jsonl")).unwrap(), TraceFormat::Jsonl).unwrap();
    assert_eq!(trace.len(), 7);
    assert_eq!(trace.iter().map(|r| r.eval).collect::<Vec<_>>(), (1..=7).collect::<Vec<_>>());
    let result: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    assert_eq!(result["n_evals"], 7);
    assert_eq!(result["best"].as_f64().unwrap(), trace[6].best_so_far);
}

#[test]
fn problem_flag_overrides_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", r#"{"problem": "sinusoidal", "budget": 5, "loop": "random_search"}"#);
    let out = tmp.path().join("o");
    assert_eq!(mbo(&["run", "--config", &cfg, "--problem", "branin", "--out", out.to_str().unwrap()]), 0);
    let trace = read_trace(fs::File::open(out.join("trace.csv")).unwrap(), TraceFormat::Csv).unwrap();
    assert!(trace.iter().all(|r| r.problem == "branin"));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let out = out.to_str().unwrap();
    let missing = tmp.path().join("missing.json");
    assert_eq!(mbo(&["run", "--config", missing.to_str().unwrap(), "--out", out]), 2);
    let bad_json = write(tmp.path(), "bad.json", "{\"budget\": ");
    assert_eq!(mbo(&["run", "--config", &bad_json, "--out", out]), 2);
    let unknown_key = write(tmp.path(), "unk.json", r#"{"problem": "branin", "budgett": 3}"#);
    assert_eq!(mbo(&["run", "--config", &unknown_key, "--out", out]), 2);
    let unknown_problem = write(tmp.path(), "up.json", r#"{"problem": "nope"}"#);
    assert_eq!(mbo(&["run", "--config", &unknown_problem, "--out", out]), 2);
    let bad_acq = write(tmp.path(), "ba.json", r#"{"problem": "branin", "acq": {"kind": "nope"}}"#);
    assert_eq!(mbo(&["run", "--config", &bad_acq, "--out", out]), 2);
    assert_eq!(mbo(&["frobnicate"]), 2);
    assert_eq!(mbo(&["run"]), 2);
    assert_eq!(mbo(&["--help"]), 0);

    // the output path is an existing file, so writing fails at run time
    let blocker = write(tmp.path(), "blocker", "");
    let ok = write(tmp.path(), "ok.json", r#"{"problem": "sinusoidal", "budget": 4, "loop": "random_search"}"#);
    assert_eq!(mbo(&["run", "--config", &ok, "--out", &blocker]), 1);
}

#[test]
fn rsns_recomputes_the_bench_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "b.json",
        &json!({"configs": {"ego": {"budget": 6}, "rs": {"loop": "random_search"}},
                "problems": ["sinusoidal", "branin"], "n_seeds": 3,
                "long_budget": 1000, "n_subsamples": 10})
        .to_string(),
    );
    let out = tmp.path().join("bench");
    assert_eq!(mbo(&["bench", "--config", &cfg, "--out", out.to_str().unwrap(), "--format", "jsonl"]), 0);
    assert!(out.join("traces/ego__branin.jsonl").exists());
    let again = tmp.path().join("again");
    assert_eq!(
        mbo(&["rsns", "--traces", out.join("traces").to_str().unwrap(), "--out", again.to_str().unwrap()]),
        0
    );
    assert_eq!(fs::read(out.join("summary.csv")).unwrap(), fs::read(again.join("summary.csv")).unwrap());

    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let header = summary.lines().next().unwrap();
    assert_eq!(header, "config,problem,n_runs,mean_rsns,se_rsns,mean_best");
    // two problems and the mean row for each of two configs
    assert_eq!(summary.lines().count(), 1 + 2 * 3);
}

#[test]
fn rsns_without_scales_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(mbo(&["rsns", "--traces", tmp.path().to_str().unwrap()]), 2);
}

#[test]
fn bench_output_does_not_depend_on_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "b.json",
        r#"{"configs": {"ego": {"budget": 6}}, "problems": ["sinusoidal", "biobjective"], "n_seeds": 2,
            "long_budget": 500, "n_subsamples": 5}"#,
    );
    let read_all = |dir: &Path| {
        let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir.join("traces"))
            .unwrap()
            .map(|e| {
                let p = e.unwrap().path();
                (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
            })
            .collect();
        v.sort();
        v.push(("summary.csv".into(), fs::read(dir.join("summary.csv")).unwrap()));
        v
    };
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(mbo(&["bench", "--config", &cfg, "--out", a.to_str().unwrap(), "--workers", "1"]), 0);
    assert_eq!(mbo(&["bench", "--config", &cfg, "--out", b.to_str().unwrap(), "--workers", "4"]), 0);
    assert_eq!(read_all(&a), read_all(&b));
}

#[test]
fn cd_toy_log_and_evaluations() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = write(
        tmp.path(),
        "g.json",
        r#"{"params": [{"name": "a", "values": [0, 1, 2]},
                       {"name": "b", "values": [true, false]},
                       {"name": "c", "values": [1, 2], "depends": {"on": "b", "equals": true}}],
            "start": {"a": 0, "b": false},
            "toy": [[0.0, 0.4, 0.1], [0.2, 0.0], [0.1, 0.3]]}"#,
    );
    let out = tmp.path().join("cd");
    assert_eq!(mbo(&["cd", "--grid", &grid, "--out", out.to_str().unwrap()]), 0);
    let log = fs::read_to_string(out.join("cd_log.csv")).unwrap();
    let last = log.lines().last().unwrap();
    // a = 1, b = true, c = 2 scores 0.4 + 0.2 + 0.3
    assert!(last.contains("a=1;b=true;c=2"), "{log}");
    assert!(last.contains(",0.9"), "{log}");
    assert!(fs::read_to_string(out.join("cd_evaluated.csv")).unwrap().starts_with("config,score\n"));
}

#[test]
fn random_search_scores_zero_on_average() {
    // small random searches are the zero point of the scale
    let p = branin();
    let mut rng = MboRng::seed_from_u64(99);
    let budget = 20;
    let scale = build_scale(&p, 20_000, budget, 200, SubsampleMode::Random, &mut rng).unwrap();
    let rc = RunConfig::from_json(json!({"loop": "random_search", "budget": budget})).unwrap();
    let method = rc.method(&p).unwrap();
    let scores: Vec<f64> = (0..100)
        .map(|s| {
            let best = run_method(&p, &method, budget, "rs", 10_000 + s, Clock::Logical).unwrap().best();
            rsns(best, &scale).unwrap()
        })
        .collect();
    let (mean, sd) = mean_sd(&scores);
    let se = (sd * sd / 100.0 + (scale.v0_se / (scale.v0 - scale.v1)).powi(2)).sqrt();
    assert!(mean.abs() < 3.0 * se, "{mean} +- {se}");
}

#[test]
fn affine_objective_keeps_rsns() {
    let p = sinusoidal();
    let q = p.affine(250.0, -40.0);
    let s0 = build_scale(&p, 3000, 10, 20, SubsampleMode::Random, &mut MboRng::seed_from_u64(5)).unwrap();
    let s1 = build_scale(&q, 3000, 10, 20, SubsampleMode::Random, &mut MboRng::seed_from_u64(5)).unwrap();
    let rc = RunConfig::from_json(json!({"budget": 8})).unwrap();
    let a = run_method(&p, &rc.method(&p).unwrap(), 8, "ego", 3, Clock::Logical).unwrap();
    let b = run_method(&q, &rc.method(&q).unwrap(), 8, "ego", 3, Clock::Logical).unwrap();
    // the first evaluations are the initial design and coincide exactly
    let init = a.archive.rows()[0].y[0];
    assert!((b.archive.rows()[0].y[0] - (250.0 * init - 40.0)).abs() < 1e-9);
    assert!((rsns(a.best(), &s0).unwrap() - rsns(250.0 * a.best() - 40.0, &s1).unwrap()).abs() < 1e-12);
}

fn scale_strategy() -> impl Strategy<Value = RsnsScale> {
    (-1e3..1e3f64, 1e-3..1e3f64).prop_map(|(v1, gap)| RsnsScale {
        v0: v1 + gap,
        v1,
        v0_se: 0.0,
        small_budget: 1,
        long_budget: 2,
    })
}

proptest! {
    #[test]
    fn rsns_is_affine_invariant(scale in scale_strategy(), best in -2e3..2e3f64, a in 1e-3..1e3f64, c in -1e3..1e3f64) {
        let mapped = RsnsScale { v0: a * scale.v0 + c, v1: a * scale.v1 + c, ..scale };
        let r0 = rsns(best, &scale).unwrap();
        let r1 = rsns(a * best + c, &mapped).unwrap();
        prop_assert!((r0 - r1).abs() <= 1e-9 * (1.0 + r0.abs()), "{} vs {}", r0, r1);
    }

    #[test]
    fn traces_round_trip(ys in prop::collection::vec(-1e12..1e12f64, 1..40), seed in any::<u64>(), jsonl in any::<bool>()) {
        let stamps: Vec<u64> = (0..ys.len() as u64).collect();
        let trace = build_trace("p,with comma", "cfg \"q\"", seed, &ys, &stamps);
        let format = if jsonl { TraceFormat::Jsonl } else { TraceFormat::Csv };
        let mut buf = Vec::new();
        write_trace(&trace, format, &mut buf).unwrap();
        prop_assert_eq!(read_trace(buf.as_slice(), format).unwrap(), trace);
    }

    #[test]
    fn best_so_far_is_the_running_minimum(ys in prop::collection::vec(-1e6..1e6f64, 1..60)) {
        let stamps = vec![0; ys.len()];
        let trace = build_trace("p", "c", 0, &ys, &stamps);
        let mut best = f64::INFINITY;
        for (r, y) in trace.iter().zip(&ys) {
            best = best.min(*y);
            prop_assert_eq!(r.best_so_far, best);
            prop_assert_eq!(r.y, *y);
        }
    }
}
