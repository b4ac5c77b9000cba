use std::fs;
use std::path::Path;
use std::process::Command;

use uavroute::{brute_force_solve, evaluate_solution, EnergyParams, Instance, Solution};
use uavroute_cli::commands::{BenchArgs, GenArgs, SolveArgs, TrainArgs, VerifyArgs};
use uavroute_cli::{cmd_bench, cmd_gen, cmd_solve, cmd_train, cmd_verify, CommonArgs, ExperimentConfig, RESULTS_HEADER};

fn common() -> CommonArgs {
    CommonArgs::default()
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> CommonArgs {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    CommonArgs {
        config: Some(path),
        ..CommonArgs::default()
    }
}

fn tiny_train_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.hidden_dim = 8;
    cfg.train.batch_size = 4;
    cfg.train.k_train = 4;
    cfg.train.n_train = 3;
    cfg.train.steps = 10;
    cfg
}

#[test]
fn gen_writes_one_file_per_k_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = GenArgs {
        k: vec![3, 5],
        n: Some(4),
        count: Some(2),
        out: dir.path().join("a"),
    };
    let files = cmd_gen(&common(), &args).unwrap();
    assert_eq!(files.len(), 4);
    let first: Vec<String> = files.iter().map(|f| fs::read_to_string(f).unwrap()).collect();
    let again = cmd_gen(&common(), &args).unwrap();
    assert_eq!(files, again);
    for (f, before) in again.iter().zip(&first) {
        assert_eq!(&fs::read_to_string(f).unwrap(), before);
    }
    let inst = Instance::load(&files[2]).unwrap();
    assert_eq!(inst.k(), 5);
    assert!(inst.clusters.iter().all(|c| c.nodes.len() == 4));
}

#[test]
fn solve_brute_matches_oracle_and_polyline_is_closed() {
    let dir = tempfile::tempdir().unwrap();
    let files = cmd_gen(
        &common(),
        &GenArgs {
            k: vec![4],
            n: Some(3),
            count: Some(1),
            out: dir.path().to_path_buf(),
        },
    )
    .unwrap();
    let poly = dir.path().join("poly.csv");
    let out = dir.path().join("sol.json");
    let sol = cmd_solve(
        &common(),
        &SolveArgs {
            instance: files[0].clone(),
            solver: "brute".into(),
            checkpoint: None,
            out: out.clone(),
            polyline: Some(poly.clone()),
        },
    )
    .unwrap();
    let inst = Instance::load(&files[0]).unwrap();
    let params = EnergyParams::default();
    let (_, opt) = brute_force_solve(&params, &inst).unwrap();
    assert_eq!(sol.total_j(), opt.breakdown.e_total_weighted_j);

    let saved: Solution = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let fresh = evaluate_solution(&params, &inst, &saved.tour, &saved.ch_choices).unwrap();
    assert_eq!(fresh.e_total_weighted_j, saved.total_j());

    let text = fs::read_to_string(&poly).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,y");
    assert_eq!(lines.len(), 1 + inst.k() + 2);
    assert_eq!(lines[1], "0.0,0.0");
    assert_eq!(*lines.last().unwrap(), "0.0,0.0");
}

#[test]
fn neural_solver_without_checkpoint_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let files = cmd_gen(
        &common(),
        &GenArgs {
            k: vec![3],
            n: Some(2),
            count: Some(1),
            out: dir.path().to_path_buf(),
        },
    )
    .unwrap();
    let err = cmd_solve(
        &common(),
        &SolveArgs {
            instance: files[0].clone(),
            solver: "greedy".into(),
            checkpoint: None,
            out: dir.path().join("s.json"),
            polyline: None,
        },
    )
    .unwrap_err();
    assert!(err.to_string().contains("checkpoint"), "{err}");
}

#[test]
fn train_is_reproducible_and_resumes_the_step_counter() {
    let dir = tempfile::tempdir().unwrap();
    let args = write_config(dir.path(), &tiny_train_config());
    let run = |name: &str, steps: u64, resume: Option<&Path>| {
        let out = dir.path().join(name);
        let ck = cmd_train(
            &args,
            &TrainArgs {
                out: out.clone(),
                trace: None,
                resume: resume.map(Path::to_path_buf),
                steps: Some(steps),
            },
        )
        .unwrap();
        let trace = fs::read_to_string(dir.path().join(format!("{name}.trace.csv"))).unwrap();
        (ck, trace, out)
    };
    let (a, trace_a, _) = run("a.json", 10, None);
    let (b, trace_b, _) = run("b.json", 10, None);
    assert_eq!(a, b);
    assert_eq!(trace_a, trace_b);
    let lines: Vec<&str> = trace_a.lines().collect();
    assert_eq!(lines[0], "step,mean_energy,critic_loss,lr");
    assert_eq!(lines.len(), 11);

    let (half, _, half_path) = run("half.json", 5, None);
    assert_eq!(half.step, 5);
    let (resumed, trace_r, _) = run("resumed.json", 8, Some(&half_path));
    assert_eq!(resumed.step, 8);
    let steps: Vec<&str> = trace_r.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(steps, ["5", "6", "7"]);
    // The first trace values depend only on the seed: same for both runs.
    assert_eq!(trace_a.lines().nth(1), fs::read_to_string(dir.path().join("half.json.trace.csv")).unwrap().lines().nth(1));
}

#[test]
fn bench_rows_ratios_and_verification() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.instances.ks = vec![3, 4];
    cfg.instances.n = 3;
    cfg.instances.count = 3;
    cfg.ga.generations = 30;
    cfg.solvers = vec!["nn".into(), "ga".into(), "random".into(), "brute".into()];
    cfg.reference_solver = Some("brute".into());
    let args = write_config(dir.path(), &cfg);
    let bench = |name: &str| {
        let out = dir.path().join(name);
        let res = cmd_bench(
            &args,
            &BenchArgs {
                instances: None,
                solver: vec![],
                checkpoint: None,
                workers: Some(1),
                out: out.clone(),
                reference: None,
            },
        )
        .unwrap();
        (res, out)
    };
    let (first, out) = bench("run1");
    assert_eq!(first.rows.len(), 6 * 4);
    for r in first.ratios.iter().filter(|r| r.solver == "brute") {
        assert_eq!(r.mean_ratio, 1.0);
    }
    for r in &first.ratios {
        assert!(r.mean_ratio >= 1.0 - 1e-12, "{r:?}");
    }
    let text = fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), RESULTS_HEADER.join(","));

    let report = cmd_verify(
        &args,
        &VerifyArgs {
            results: out.join("results.csv"),
            solutions: None,
        },
    )
    .unwrap();
    assert_eq!(report.checked, 24);
    assert!(report.max_rel_err <= 1e-9);

    // Apart from wall time, a second run reproduces the results exactly.
    let (second, out2) = bench("run2");
    let strip = |rows: &[uavroute_cli::ResultRow]| {
        rows.iter()
            .map(|r| uavroute_cli::ResultRow {
                wall_time_s: 0.0,
                ..r.clone()
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&first.rows), strip(&second.rows));
    assert_eq!(first.ratios, second.ratios);
    assert_eq!(
        fs::read_to_string(out.join("ratios.csv")).unwrap(),
        fs::read_to_string(out2.join("ratios.csv")).unwrap()
    );
    assert_eq!(
        fs::read_to_string(out.join("solutions.jsonl")).unwrap(),
        fs::read_to_string(out2.join("solutions.jsonl")).unwrap()
    );
}

#[test]
fn verify_rejects_tampered_results() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.instances.ks = vec![3];
    cfg.instances.count = 1;
    cfg.solvers = vec!["nn".into()];
    let args = write_config(dir.path(), &cfg);
    let out = dir.path().join("run");
    cmd_bench(
        &args,
        &BenchArgs {
            instances: None,
            solver: vec![],
            checkpoint: None,
            workers: Some(1),
            out: out.clone(),
            reference: None,
        },
    )
    .unwrap();
    let path = out.join("results.csv");
    let mut rows = uavroute_cli::results::read_results(&path).unwrap();
    rows[0].energy_j = rows[0].energy_j.map(|e| e * 1.01);
    uavroute_cli::results::write_results(&path, &rows).unwrap();
    assert!(cmd_verify(
        &args,
        &VerifyArgs {
            results: path,
            solutions: None
        }
    )
    .is_err());
}

#[test]
fn binary_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let args = write_config(dir.path(), &tiny_train_config());
    let config = args.config.unwrap();
    let bin = env!("CARGO_BIN_EXE_uavroute");
    let run = |cmd: &[&str]| {
        let out = Command::new(bin)
            .args(["--config", config.to_str().unwrap()])
            .args(cmd)
            .output()
            .unwrap();
        assert!(out.status.success(), "{cmd:?}: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    };
    let d = |p: &str| dir.path().join(p).to_str().unwrap().to_string();
    run(&["gen", "--k", "3,4", "--n", "3", "--count", "2", "--out", &d("inst")]);
    run(&["train", "--steps", "3", "--out", &d("ck.json")]);
    let solved = run(&[
        "solve",
        "--instance",
        &d("inst/k3-s0.json"),
        "--solver",
        "sampling:16",
        "--checkpoint",
        &d("ck.json"),
        "--out",
        &d("sol.json"),
    ]);
    assert!(solved.contains("energy"));
    let table = run(&[
        "bench",
        "--instances",
        &d("inst"),
        "--solver",
        "nn",
        "--solver",
        "greedy",
        "--solver",
        "active:8,2,0.9",
        "--checkpoint",
        &d("ck.json"),
        "--out",
        &d("bench"),
    ]);
    assert!(table.contains("12 rows"), "{table}");
    let verified = run(&["verify", "--results", &d("bench/results.csv")]);
    assert!(verified.contains("verified 12 results"), "{verified}");

    let bad = Command::new(bin).args(["solve", "--instance", "nope.json", "--solver", "bogus", "--out", "x"]).output().unwrap();
    assert!(!bad.status.success());
}

#[test]
fn shipped_config_parses() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.json");
    let cfg = ExperimentConfig::load(Some(&path)).unwrap();
    assert_eq!(cfg.solver_specs().unwrap().len(), 5);
    assert_eq!(cfg.train.steps, 3000);
    assert_eq!(cfg.energy.omega, 0.5);
}
