use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use rayon::prelude::*;
use uavroute::instance::generate;
use uavroute::{evaluate_solution, init_params, Checkpoint, Instance, Trainer};

use crate::config::ExperimentConfig;
use crate::results::{
    ratio_table, read_results, read_solutions, write_ratios, write_results, write_solutions, ResultRow,
    SolutionRecord,
};
use crate::solver::{SolverContext, SolverSpec};

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON experiment config; defaults apply where omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Weight of ground energy in the objective, in [0, 1].
    #[arg(long, global = true)]
    pub omega: Option<f64>,
}

impl CommonArgs {
    pub fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(self.config.as_deref())?;
        if let Some(omega) = self.omega {
            cfg.energy.omega = omega;
        }
        cfg.energy.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    /// Comma-separated cluster counts; one file per K and seed.
    #[arg(long, value_delimiter = ',')]
    pub k: Vec<usize>,
    /// Nodes per cluster.
    #[arg(long)]
    pub n: Option<usize>,
    /// Instances per K.
    #[arg(long)]
    pub count: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// Name used for a generated instance in file names and result rows.
pub fn instance_id(instance: &Instance) -> String {
    format!("k{}-s{}", instance.k(), instance.seed)
}

fn configured_instances(cfg: &ExperimentConfig, base_seed: u64) -> Vec<Instance> {
    let set = &cfg.instances;
    set.ks
        .iter()
        .flat_map(|&k| {
            (0..set.count as u64).map(move |i| generate(k, set.n, set.area_m, set.std_m, base_seed + i))
        })
        .collect()
}

pub fn cmd_gen(common: &CommonArgs, args: &GenArgs) -> Result<Vec<PathBuf>> {
    let mut cfg = common.load()?;
    if !args.k.is_empty() {
        cfg.instances.ks = args.k.clone();
    }
    if let Some(n) = args.n {
        cfg.instances.n = n;
    }
    if let Some(c) = args.count {
        cfg.instances.count = c;
    }
    if cfg.instances.ks.contains(&0) || cfg.instances.n == 0 {
        bail!("K and N must be >= 1");
    }
    let base = common.seed.unwrap_or(cfg.instances.base_seed);
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut written = Vec::new();
    for inst in configured_instances(&cfg, base) {
        let path = args.out.join(format!("{}.json", instance_id(&inst)));
        inst.save(&path)?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Checkpoint file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Trace CSV; defaults to the checkpoint path with a `.trace.csv` suffix.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Continue from this checkpoint's parameters and step counter.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Total step count to train to; overrides the config.
    #[arg(long)]
    pub steps: Option<u64>,
}

fn default_trace_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".trace.csv");
    PathBuf::from(s)
}

/// Trains to the configured total step count, writing the checkpoint (and
/// intermediate ones when configured) and one trace row per step run.
pub fn cmd_train(common: &CommonArgs, args: &TrainArgs) -> Result<Checkpoint> {
    let cfg = common.load()?;
    let mut train = cfg.train.clone();
    if let Some(seed) = common.seed {
        train.seed = seed;
    }
    if let Some(steps) = args.steps {
        train.steps = steps;
    }
    let mut ck = match &args.resume {
        Some(path) => Checkpoint::load(path)?,
        None => {
            let (actor, critic) = init_params(train.seed, cfg.hidden_dim);
            Checkpoint {
                hidden_dim: cfg.hidden_dim,
                seed: train.seed,
                step: 0,
                actor,
                critic,
            }
        }
    };
    let mut trainer = Trainer::new(train.clone(), cfg.energy.clone(), &ck.actor, &ck.critic)?.resume_at(ck.step);
    let trace_path = args.trace.clone().unwrap_or_else(|| default_trace_path(&args.out));
    let mut trace = csv::Writer::from_path(&trace_path).with_context(|| format!("creating {}", trace_path.display()))?;

    while trainer.step < train.steps {
        match trainer.step(&mut ck.actor, &mut ck.critic) {
            Ok(row) => {
                trace.serialize(row)?;
                ck.step = trainer.step;
                if cfg.checkpoint_every > 0 && ck.step % cfg.checkpoint_every == 0 {
                    ck.save(&args.out)?;
                }
            }
            Err(e) => {
                trace.flush()?;
                let mut halt = args.out.as_os_str().to_owned();
                halt.push(".halt.json");
                ck.save(PathBuf::from(&halt))?;
                return Err(anyhow!(e).context(format!(
                    "training halted at step {}; parameters saved to {}",
                    trainer.step,
                    PathBuf::from(halt).display()
                )));
            }
        }
    }
    trace.flush()?;
    ck.save(&args.out)?;
    Ok(ck)
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    /// Instance JSON file.
    #[arg(long)]
    pub instance: PathBuf,
    /// Solver spec: greedy | sampling:M | active:Q,S,ZETA | nn | ga | random | brute.
    #[arg(long)]
    pub solver: String,
    /// Trained parameters, required by the neural solvers.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Solution JSON file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the hovering-point polyline as CSV (x,y).
    #[arg(long)]
    pub polyline: Option<PathBuf>,
}

fn solver_context(cfg: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<SolverContext> {
    let model = checkpoint.map(Checkpoint::load).transpose()?;
    Ok(SolverContext {
        energy: cfg.energy.clone(),
        ga: cfg.ga.clone(),
        active: cfg.active.clone(),
        model,
    })
}

pub fn cmd_solve(common: &CommonArgs, args: &SolveArgs) -> Result<uavroute::Solution> {
    let cfg = common.load()?;
    let spec: SolverSpec = args.solver.parse()?;
    let checkpoint = args.checkpoint.as_deref().or(cfg.checkpoint.as_deref());
    if spec.needs_checkpoint() && checkpoint.is_none() {
        bail!("solver `{spec}` needs --checkpoint");
    }
    let ctx = solver_context(&cfg, checkpoint)?;
    let instance = Instance::load(&args.instance)?;
    let seed = common.seed.unwrap_or(cfg.seed).wrapping_add(instance.seed);
    let sol = ctx.solve(&spec, &instance, seed)?;
    let json = serde_json::to_string_pretty(&sol)?;
    fs::write(&args.out, json).with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(path) = &args.polyline {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(["x", "y"])?;
        for p in sol.polyline(&instance) {
            w.serialize((p[0], p[1]))?;
        }
        w.flush()?;
    }
    Ok(sol)
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Directory of instance JSON files; generated from the config if absent.
    #[arg(long)]
    pub instances: Option<PathBuf>,
    /// Solver spec; repeat the flag for several solvers. Overrides the config.
    #[arg(long)]
    pub solver: Vec<String>,
    /// Trained parameters; falls back to the config.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Parallel (instance, solver) runs; 1 gives byte-stable output.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory for results.csv, ratios.csv and solutions.jsonl.
    #[arg(long)]
    pub out: PathBuf,
    /// Reference solver of the ratio table; overrides the config.
    #[arg(long)]
    pub reference: Option<String>,
}

fn load_instance_dir(dir: &Path) -> Result<Vec<(String, Instance)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "json"));
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let id = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            Ok((id, Instance::load(&p)?))
        })
        .collect()
}

/// Output of a benchmark run.
pub struct BenchOutput {
    pub rows: Vec<ResultRow>,
    pub ratios: Vec<crate::results::RatioRow>,
}

pub fn cmd_bench(common: &CommonArgs, args: &BenchArgs) -> Result<BenchOutput> {
    let mut cfg = common.load()?;
    if !args.solver.is_empty() {
        cfg.solvers = args.solver.clone();
    }
    if let Some(c) = &args.checkpoint {
        cfg.checkpoint = Some(c.clone());
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(r) = &args.reference {
        cfg.reference_solver = Some(r.clone());
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let specs = cfg.solver_specs()?;
    let ctx = solver_context(&cfg, cfg.checkpoint.as_deref())?;
    let instances = match &args.instances {
        Some(dir) => load_instance_dir(dir)?,
        None => configured_instances(&cfg, cfg.instances.base_seed)
            .into_iter()
            .map(|i| (instance_id(&i), i))
            .collect(),
    };

    let jobs: Vec<(usize, usize)> = (0..instances.len())
        .flat_map(|i| (0..specs.len()).map(move |s| (i, s)))
        .collect();
    let run = |&(i, s): &(usize, usize)| {
        let (id, inst) = &instances[i];
        let spec = &specs[s];
        let seed = cfg.seed.wrapping_add(inst.seed);
        let start = Instant::now();
        let result = ctx.solve(spec, inst, seed);
        let secs = start.elapsed().as_secs_f64();
        let name = spec.to_string();
        match result {
            Ok(sol) => {
                let row = ResultRow::from_solution(id, inst.k(), &name, &sol, secs, seed);
                let rec = SolutionRecord {
                    instance_id: id.clone(),
                    solver: name,
                    instance: inst.clone(),
                    tour: sol.tour,
                    ch_choices: sol.ch_choices,
                };
                (row, Some(rec))
            }
            Err(e) => {
                eprintln!("{id} / {name}: {e:#}");
                (ResultRow::failed(id, inst.k(), &name, secs, seed), None)
            }
        }
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build()?;
    let outputs: Vec<(ResultRow, Option<SolutionRecord>)> =
        pool.install(|| jobs.par_iter().map(run).collect());

    let (rows, records): (Vec<_>, Vec<_>) = outputs.into_iter().unzip();
    let records: Vec<SolutionRecord> = records.into_iter().flatten().collect();
    let reference = match &cfg.reference_solver {
        Some(r) => r.parse::<SolverSpec>()?.to_string(),
        None => specs[0].to_string(),
    };
    let ratios = ratio_table(&rows, &reference);

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_results(&args.out.join("results.csv"), &rows)?;
    write_ratios(&args.out.join("ratios.csv"), &ratios)?;
    write_solutions(&args.out.join("solutions.jsonl"), &records)?;
    Ok(BenchOutput { rows, ratios })
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Results CSV written by `bench`.
    #[arg(long)]
    pub results: PathBuf,
    /// Solutions file written next to it; defaults to `solutions.jsonl` in
    /// the same directory.
    #[arg(long)]
    pub solutions: Option<PathBuf>,
}

/// Summary of a verification pass.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checked: usize,
    pub skipped_failed: usize,
    pub max_rel_err: f64,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Re-evaluates every reported result from its tour and heads.
pub fn cmd_verify(common: &CommonArgs, args: &VerifyArgs) -> Result<VerifyReport> {
    let cfg = common.load()?;
    let rows = read_results(&args.results)?;
    let sol_path = match &args.solutions {
        Some(p) => p.clone(),
        None => args.results.with_file_name("solutions.jsonl"),
    };
    let records = read_solutions(&sol_path)?;
    let mut report = VerifyReport {
        checked: 0,
        skipped_failed: 0,
        max_rel_err: 0.0,
    };
    for row in &rows {
        let Some(energy) = row.energy_j else {
            report.skipped_failed += 1;
            continue;
        };
        let rec = records
            .iter()
            .find(|r| r.instance_id == row.instance_id && r.solver == row.solver)
            .ok_or_else(|| anyhow!("no solution recorded for {} / {}", row.instance_id, row.solver))?;
        let fresh = evaluate_solution(&cfg.energy, &rec.instance, &rec.tour, &rec.ch_choices)?;
        let length = uavroute::energy::tour_length_m(&rec.instance, &rec.tour, &rec.ch_choices);
        let pairs = [
            (fresh.e_total_weighted_j, Some(energy)),
            (fresh.e_ground_j, row.e_ground_j),
            (fresh.e_uav_j(), row.e_uav_j),
            (length, row.tour_length_m),
        ];
        for (want, got) in pairs {
            let got = got.ok_or_else(|| anyhow!("{} / {}: missing column", row.instance_id, row.solver))?;
            let e = rel(want, got);
            report.max_rel_err = report.max_rel_err.max(e);
            if e > 1e-9 {
                bail!(
                    "{} / {}: reported {got} but re-evaluation gives {want} (rel err {e:.2e})",
                    row.instance_id,
                    row.solver
                );
            }
        }
        report.checked += 1;
    }
    Ok(report)
}
