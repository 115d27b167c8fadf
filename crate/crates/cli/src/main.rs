use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coldchain::bssaa::SaaConfig;
use coldchain::def::{build_def, export_lp, DefConfig, DefProblem, PenaltyVector};
use coldchain::demand::sample_scenarios;
use coldchain::experiments::{run_experiment, ArmSpec, ExperimentReport, ExperimentSpec};
use coldchain::instance::Instance;
use coldchain::solver::solve;
use coldchain::synthetic::{calibrate_capacity, make_synthetic_instance, Shape};
use coldchain::Result;

#[derive(Parser)]
#[command(name = "coldchain-cli", version, about = "Chance-constrained vaccine cold-chain planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Sampling {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    sample_size: usize,
    #[arg(long, default_value_t = 0.7)]
    service_level: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic instance.
    Gen {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        tiers: u8,
        #[arg(long, default_value_t = 2)]
        regions: usize,
        #[arg(long, default_value_t = 3)]
        districts: usize,
        #[arg(long, default_value_t = 4)]
        clinics: usize,
        #[arg(long, default_value_t = 12)]
        periods: usize,
        #[arg(long)]
        capacity_scale: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        demand_scale: f64,
        /// shrink capacity until a clinic refrigerator row binds
        #[arg(long)]
        calibrate: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one scenario-expanded LP with a uniform penalty.
    Solve {
        instance: PathBuf,
        #[command(flatten)]
        sampling: Sampling,
        #[arg(long, default_value_t = 0.0)]
        penalty: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the bisection over several replications and write a report bundle.
    Bssaa {
        instance: PathBuf,
        #[command(flatten)]
        sampling: Sampling,
        #[arg(long, default_value_t = 10)]
        replications: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment spec (or re-run a manifest).
    Experiment {
        spec: PathBuf,
        /// overrides the spec's master seed
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        sample_size: Option<usize>,
        #[arg(long)]
        service_level: Option<f64>,
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the scenario-expanded LP in MPS format.
    ExportLp {
        instance: PathBuf,
        #[command(flatten)]
        sampling: Sampling,
        #[arg(long, default_value_t = 0.0)]
        penalty: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn build(instance: &Path, s: &Sampling, penalty: f64) -> Result<DefProblem> {
    let inputs = Instance::load(instance)?.inputs()?;
    let scenarios = sample_scenarios(&inputs.demand, s.sample_size, s.seed)?;
    let config = DefConfig {
        service_level: s.service_level,
        penalties: PenaltyVector::Uniform(penalty),
        extended: inputs.multi_presentation(),
        ..DefConfig::default()
    };
    build_def(&inputs, &scenarios, &config)
}

fn print_report(report: &ExperimentReport) {
    for arm in &report.arms {
        match &arm.result {
            Ok(r) => println!(
                "{}: SR avg {:.4} [{:.4}, {:.4}]  FIC avg {:.4} [{:.4}, {:.4}]  confidence {}  failures {}",
                arm.name,
                r.run.sr.avg,
                r.run.sr.min,
                r.run.sr.max,
                r.run.fic.avg,
                r.run.fic.min,
                r.run.fic.max,
                r.run.confidence_label(),
                r.run.failures.len()
            ),
            Err(e) => println!("{}: failed: {e}", arm.name),
        }
    }
    for c in &report.comparisons {
        match &c.test {
            Some(t) => println!(
                "{} vs {} {:?}: diff {:+.5}  p {:.4}  p(greater) {:.4}",
                c.b, c.a, c.metric, t.mean_diff, t.p_two_sided, t.p_greater
            ),
            None => println!("{} vs {} {:?}: {}", c.b, c.a, c.metric, c.error.as_deref().unwrap_or("")),
        }
    }
    println!("bundle written to {}", report.spec.output_dir.display());
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Gen { seed, tiers, regions, districts, clinics, periods, capacity_scale, demand_scale, calibrate, out } => {
            let mut shape = Shape {
                tiers,
                regions,
                districts_per_region: districts,
                clinics_per_district: clinics,
                periods,
                demand_scale,
                ..Shape::default()
            };
            if let Some(c) = capacity_scale {
                shape.capacity_scale = c;
            }
            let instance = if calibrate {
                let (scale, inst) = calibrate_capacity(&shape, seed)?;
                eprintln!("calibrated capacity scale {scale}");
                inst
            } else {
                make_synthetic_instance(&shape, seed)?
            };
            instance.save(&out)?;
            println!("{}: {} nodes, {} arcs", out.display(), instance.nodes.len(), instance.arcs.len());
            Ok(true)
        }
        Command::Solve { instance, sampling, penalty, out } => {
            let def = build(&instance, &sampling, penalty)?;
            let sol = solve(&def, &Default::default())?;
            let counts = def.violation_counts(&sol.x, 1e-6);
            let summary = serde_json::json!({
                "status": format!("{:?}", sol.status),
                "objective": sol.objective,
                "model_objective": def.model_objective(&sol.x),
                "iterations": sol.iterations,
                "max_violations": counts.iter().max().copied().unwrap_or(0),
                "def": def.summary(),
            });
            let text = serde_json::to_string_pretty(&summary)? + "\n";
            match out {
                Some(p) => std::fs::write(p, text)?,
                None => print!("{text}"),
            }
            Ok(true)
        }
        Command::Bssaa { instance, sampling, replications, out } => {
            let spec = ExperimentSpec {
                name: "bssaa".into(),
                base_instance: instance,
                arms: vec![ArmSpec { name: "baseline".into(), transforms: vec![] }],
                saa: SaaConfig {
                    master_seed: sampling.seed,
                    sample_size: sampling.sample_size,
                    service_level: sampling.service_level,
                    replications,
                    ..SaaConfig::default()
                },
                output_dir: out,
                level: 0.05,
            };
            let report = run_experiment(&spec)?;
            print_report(&report);
            Ok(!report.partial)
        }
        Command::Experiment { spec, seed, sample_size, service_level, replications, out } => {
            let mut spec = ExperimentSpec::load(&spec)?;
            if let Some(v) = seed {
                spec.saa.master_seed = v;
            }
            if let Some(v) = sample_size {
                spec.saa.sample_size = v;
            }
            if let Some(v) = service_level {
                spec.saa.service_level = v;
            }
            if let Some(v) = replications {
                spec.saa.replications = v;
            }
            if let Some(v) = out {
                spec.output_dir = v;
            }
            let report = run_experiment(&spec)?;
            print_report(&report);
            Ok(!report.partial)
        }
        Command::ExportLp { instance, sampling, penalty, out } => {
            let def = build(&instance, &sampling, penalty)?;
            export_lp(&def, &out)?;
            let s = def.summary();
            println!("{}: {} rows, {} columns, {} nonzeros", out.display(), s.rows, s.cols, s.nnz);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
