use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use spincomb::scenario::{
    builtin, builtin_names, resolve_scenario, run_scenario, run_sweep, sensitivity_study,
    write_sensitivity_csv, Scenario, SolverChoice,
};

/// Cavity coupled to a comb of spin ensembles: scenario runner.
#[derive(Parser)]
#[command(name = "spincomb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Built-in scenario name or path to a JSON scenario file.
    scenario: String,
    /// Output directory. Defaults to $SPINCOMB_OUT/<name>, else out/<name>.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweep and sensitivity points.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its CSV artifacts.
    Run {
        #[command(flatten)]
        common: Common,
        /// Override the scenario's solver: ode, volterra, laplace, all or none.
        #[arg(long)]
        solver: Option<String>,
    },
    /// Eigenmode maps over comb detuning.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comb positions per coupling.
        #[arg(long)]
        points: Option<usize>,
        /// Comma-separated couplings Ω/2π in MHz.
        #[arg(long, value_delimiter = ',')]
        couplings: Option<Vec<f64>>,
    },
    /// Late-time envelope versus displacement of the automatic holes.
    Sensitivity {
        #[command(flatten)]
        common: Common,
        /// Comma-separated fractional hole displacements.
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            default_value = "-0.1,-0.03,0,0.03,0.1"
        )]
        shifts: Vec<f64>,
    },
    /// List the built-in scenarios.
    ListScenarios,
    /// Print a scenario as JSON with every default filled in.
    Show { scenario: String },
}

fn load(common: &Common) -> Result<Scenario> {
    let mut s = resolve_scenario(&common.scenario)?;
    if let Some(out) = &common.out {
        s.out_dir = Some(out.clone());
    } else if s.out_dir.is_none() {
        if let Some(base) = std::env::var_os("SPINCOMB_OUT") {
            s.out_dir = Some(PathBuf::from(base).join(&s.name));
        }
    }
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    Ok(s)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { common, solver } => {
            let mut s = load(&common)?;
            if let Some(name) = solver {
                s.solver = Some(name.parse::<SolverChoice>()?);
                s.validate()?;
            }
            let report = run_scenario(&s)?;
            println!(
                "{}: wrote {} files to {}",
                report.name,
                report.files.len(),
                report.out_dir.display()
            );
            for d in &report.deviations {
                println!(
                    "  {} vs {}: max relative deviation {:.3e}",
                    d.other, d.reference, d.max_relative
                );
            }
            if let Some(p) = &report.pulses {
                println!(
                    "  {} pulses, {} above the e^(-kappa t) barrier ({} solver)",
                    p.count, p.count_above_barrier, p.solver
                );
            }
        }
        Command::Sweep {
            common,
            points,
            couplings,
        } => {
            let mut s = load(&common)?;
            let sweep = s.sweep.get_or_insert_with(Default::default);
            if let Some(n) = points {
                sweep.points = n;
            }
            if let Some(c) = couplings {
                sweep.couplings_mhz = c;
            }
            let report = run_sweep(&s)?;
            println!(
                "{}: {} points per coupling, wrote {}",
                s.name,
                report.points,
                report.files.join(", ")
            );
        }
        Command::Sensitivity { common, shifts } => {
            let s = load(&common)?;
            let rows = sensitivity_study(&s, &shifts)?;
            let dir = s.output_dir();
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            write_sensitivity_csv(&dir.join("sensitivity.csv"), &rows)?;
            for r in &rows {
                println!(
                    "  shift {:+.3}: late ratio {:.4e} ({:.3} of unshifted)",
                    r.shift, r.late_ratio, r.relative
                );
            }
        }
        Command::ListScenarios => {
            for name in builtin_names() {
                let s = builtin(name).expect("listed scenarios exist");
                println!(
                    "{name:<12} Ω/2π = {} MHz, solver {}",
                    s.comb.omega_over_2pi_mhz,
                    s.solver()
                );
            }
        }
        Command::Show { scenario } => {
            println!("{}", resolve_scenario(&scenario)?.to_json()?);
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<spincomb::Error>() {
        Some(e) if e.is_config() => 2,
        Some(_) => 3,
        None => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
