use anyhow::Result;
use clap::{Parser, Subcommand};
use uavroute_cli::commands::{BenchArgs, GenArgs, SolveArgs, TrainArgs, VerifyArgs};
use uavroute_cli::{cmd_bench, cmd_gen, cmd_solve, cmd_train, cmd_verify, CommonArgs};

#[derive(Parser)]
#[command(name = "uavroute", version, about = "Energy-aware UAV routing over clustered sensor networks")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate seeded instances.
    Gen(GenArgs),
    /// Train the policy and critic.
    Train(TrainArgs),
    /// Solve one instance.
    Solve(SolveArgs),
    /// Run solvers over an instance set and write results.
    Bench(BenchArgs),
    /// Re-evaluate every result of a benchmark run.
    Verify(VerifyArgs),
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let common = &cli.common;
    match &cli.command {
        Command::Gen(args) => {
            let files = cmd_gen(common, args)?;
            println!("wrote {} instances to {}", files.len(), args.out.display());
        }
        Command::Train(args) => {
            let ck = cmd_train(common, args)?;
            println!("trained to step {}; checkpoint {}", ck.step, args.out.display());
        }
        Command::Solve(args) => {
            let sol = cmd_solve(common, args)?;
            println!(
                "energy {:.3} J (ground {:.3} J, uav {:.3} J), tour {:.1} m",
                sol.total_j(),
                sol.energy.e_ground_j,
                sol.energy.e_uav_j(),
                sol.tour_length_m
            );
        }
        Command::Bench(args) => {
            let out = cmd_bench(common, args)?;
            println!("{:>4}  {:<24} {:>10} {:>5}", "k", "solver", "ratio", "n");
            for r in &out.ratios {
                println!("{:>4}  {:<24} {:>10.4} {:>5}", r.k, r.solver, r.mean_ratio, r.instances);
            }
            println!("{} rows written to {}", out.rows.len(), args.out.display());
        }
        Command::Verify(args) => {
            let report = cmd_verify(common, args)?;
            println!(
                "verified {} results ({} failed runs skipped), max relative error {:.2e}",
                report.checked, report.skipped_failed, report.max_rel_err
            );
        }
    }
    Ok(())
}
