use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use natconv::scenarios::{run_benchmark, run_mms, Scenario, ScenarioConfig, MMS_COLUMNS};

#[derive(Parser)]
#[command(name = "natconv", version, about = "Ensemble solver for natural convection in a square cavity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convergence study against a manufactured solution.
    Mms(RunArgs),
    /// Differentially heated cavity run to steady state.
    Cavity(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    ra: Option<f64>,
    /// Mesh subdivisions per side. For `mms`, a comma-separated ladder.
    #[arg(long)]
    m: Option<String>,
    /// Initial timestep (MMS default: 1/m).
    #[arg(long)]
    dt: Option<f64>,
    /// Ensemble size; only 2 is supported.
    #[arg(long, default_value_t = 2)]
    j: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for CSV and VTK files.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    steady_tol: Option<f64>,
}

fn load_config(args: &RunArgs, scenario: Scenario) -> Result<ScenarioConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let c = ScenarioConfig::parse(&text)?;
            if c.scenario != scenario {
                bail!("{} describes a different scenario", path.display());
            }
            c
        }
        None => match scenario {
            Scenario::Mms => ScenarioConfig::mms(),
            Scenario::DoublePaneWindow => ScenarioConfig::cavity(1e4, 64),
        },
    };
    if args.j != 2 {
        bail!("only two-member ensembles are supported, got --j {}", args.j);
    }
    if let Some(ra) = args.ra {
        config.ra = ra;
    }
    if let Some(m) = &args.m {
        match scenario {
            Scenario::Mms => config.set("mms_ladder", m)?,
            Scenario::DoublePaneWindow => config.set("m", m)?,
        }
    }
    if let Some(dt) = args.dt {
        config.dt0 = Some(dt);
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.output_dir = Some(out.clone());
    }
    if let Some(t) = args.t_final {
        config.t_final = Some(t);
    }
    if let Some(t) = args.steady_tol {
        config.steady_tol = Some(t);
    }
    config.validate()?;
    Ok(config)
}

fn mms(args: &RunArgs) -> Result<()> {
    let config = load_config(args, Scenario::Mms)?;
    let report = run_mms(&config)?;
    println!("{:>4} {:>10} {}", "m", "dt", MMS_COLUMNS.map(|c| format!("{c:>14} {:>6}", "rate")).join(" "));
    for (i, row) in report.rows.iter().enumerate() {
        let cols: Vec<String> = row
            .summary
            .columns()
            .iter()
            .enumerate()
            .map(|(k, e)| match i.checked_sub(1) {
                Some(r) => format!("{e:>14.6e} {:>6.2}", report.rates[r][k]),
                None => format!("{e:>14.6e} {:>6}", "-"),
            })
            .collect();
        println!("{:>4} {:>10.6} {}", row.m, row.dt, cols.join(" "));
    }
    Ok(())
}

fn cavity(args: &RunArgs) -> Result<()> {
    let config = load_config(args, Scenario::DoublePaneWindow)?;
    let r = run_benchmark(&config)?;
    println!("Ra          {:e}", r.ra);
    println!("mesh        {0}x{0}", r.m);
    println!("steps       {}", r.steps);
    println!("t           {:.6}", r.t_final);
    println!("steady      {}", r.steady);
    println!("halvings    {}", r.halvings);
    println!("Nu_avg      {:.4}", r.nu_avg);
    println!("max u1 x=.5 {:.4} at y = {:.4}", r.max_u1_x05.0, r.max_u1_x05.1);
    println!("max u2 y=.5 {:.4} at x = {:.4}", r.max_u2_y05.0, r.max_u2_y05.1);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Mms(a) => mms(a),
        Command::Cavity(a) => cavity(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
