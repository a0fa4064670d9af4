use clap::{Args, Parser, Subcommand};
use fdtd_mor_cli::compare::{compare_dirs, CompareThresholds};
use fdtd_mor_cli::exit_codes;
use fdtd_mor_cli::generators::{
    cavity2d, cavity3d, cube_demo, iris_waveguide, Cavity2dParams, Cavity3dParams,
    CubeDemoParams, IrisWaveguideParams,
};
use fdtd_mor_cli::pipeline::{eigen_dump, run_scenario, PipelineError};
use fdtd_mor_cli::scenario;
use std::path::PathBuf;
use std::process::ExitCode;

/// Yee FDTD with structure-preserving model order reduction and stability
/// enforcement beyond the CFL limit.
#[derive(Parser)]
#[command(name = "fdtd-mor", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenario files end to end
    Run {
        /// scenario TOML files
        scenarios: Vec<PathBuf>,
        /// run the scenarios concurrently, each in its own output directory
        #[arg(long)]
        batch: bool,
    },
    /// Compare a candidate run directory against a reference
    Compare {
        reference: PathBuf,
        candidate: PathBuf,
        /// maximum relative error per paired resonance
        #[arg(long, default_value_t = 0.01)]
        max_resonance_error: f64,
        /// maximum in-band |dS21| in dB
        #[arg(long, default_value_t = 1.0)]
        max_ds21_db: f64,
    },
    /// Dump update eigenvalues and singular values for a scenario
    Eigen { scenario: PathBuf },
    /// Generate a scenario file from a built-in template
    Gen(GenArgs),
}

#[derive(Args)]
struct GenArgs {
    /// cube-demo | cavity2d | cavity3d | iris-waveguide
    template: String,
    /// output scenario path
    #[arg(long)]
    out: PathBuf,
    /// cells per side (cavities) or across the guide
    #[arg(long)]
    cells: Option<usize>,
    /// cells along the waveguide axis
    #[arg(long)]
    cells_axis: Option<usize>,
    /// cell size in meters
    #[arg(long)]
    delta: Option<f64>,
    /// CFL extension factor
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// "full" or "reduced"
    #[arg(long)]
    engine: Option<String>,
    /// reduced state dimension (even)
    #[arg(long)]
    order: Option<usize>,
    /// excitation bandwidth in Hz
    #[arg(long)]
    fmax: Option<f64>,
    /// artifact directory stamped into the scenario
    #[arg(long)]
    out_dir: Option<String>,
    /// omit the irises (incident-reference geometry)
    #[arg(long)]
    no_irises: bool,
    /// incident-only run directory for S-parameter extraction
    #[arg(long)]
    sparams_ref: Option<String>,
}

fn run_one(path: &PathBuf) -> i32 {
    let v = match scenario::load(path) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            return exit_codes::CONFIG_ERROR;
        }
    };
    match run_scenario(&v, None) {
        Ok(outcome) => {
            println!(
                "{}: {} unknowns{}, artifacts in {}",
                path.display(),
                outcome.n_unknowns,
                outcome
                    .reduced_order
                    .map_or(String::new(), |o| format!(" (reduced order {o})")),
                outcome.out_dir.display()
            );
            print!("{}", outcome.timing.render());
            exit_codes::SUCCESS
        }
        Err(PipelineError::Engine(e @ fdtd_mor::FdtdError::Divergence { .. })) => {
            eprintln!("{}: {e}", path.display());
            exit_codes::DIVERGENCE
        }
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            exit_codes::CONFIG_ERROR
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { scenarios, batch } => {
            if scenarios.is_empty() {
                eprintln!("no scenario files given");
                exit_codes::CONFIG_ERROR
            } else if batch && scenarios.len() > 1 {
                let codes: Vec<i32> = std::thread::scope(|scope| {
                    let handles: Vec<_> = scenarios
                        .iter()
                        .map(|p| scope.spawn(move || run_one(p)))
                        .collect();
                    handles.into_iter().map(|h| h.join().unwrap()).collect()
                });
                codes.into_iter().max().unwrap()
            } else {
                let mut worst = exit_codes::SUCCESS;
                for p in &scenarios {
                    worst = worst.max(run_one(p));
                }
                worst
            }
        }
        Command::Compare {
            reference,
            candidate,
            max_resonance_error,
            max_ds21_db,
        } => {
            let thresholds = CompareThresholds {
                resonance_rel: max_resonance_error,
                ds21_db: max_ds21_db,
            };
            match compare_dirs(&reference, &candidate, thresholds) {
                Ok(report) => {
                    print!("{}", report.render());
                    if report.pass {
                        exit_codes::SUCCESS
                    } else {
                        exit_codes::COMPARISON_FAILED
                    }
                }
                Err(e) => {
                    eprintln!("{e}");
                    exit_codes::CONFIG_ERROR
                }
            }
        }
        Command::Eigen { scenario: path } => match scenario::load(&path) {
            Ok(v) => match eigen_dump(&v, None) {
                Ok(dir) => {
                    println!("eigenvalue artifacts in {}", dir.display());
                    exit_codes::SUCCESS
                }
                Err(e) => {
                    eprintln!("{e}");
                    exit_codes::CONFIG_ERROR
                }
            },
            Err(e) => {
                eprintln!("{e}");
                exit_codes::CONFIG_ERROR
            }
        },
        Command::Gen(args) => match generate(&args) {
            Ok(()) => {
                println!("wrote {}", args.out.display());
                exit_codes::SUCCESS
            }
            Err(e) => {
                eprintln!("{e}");
                exit_codes::CONFIG_ERROR
            }
        },
    };
    ExitCode::from(code as u8)
}

fn generate(args: &GenArgs) -> Result<(), String> {
    let s = match args.template.as_str() {
        "cube-demo" => {
            let mut p = CubeDemoParams::default();
            if let Some(c) = args.cells {
                p.cells = c;
            }
            if let Some(d) = args.delta {
                p.side = p.cells as f64 * d;
            }
            if let Some(v) = args.s {
                p.s_factor = v;
            }
            if let Some(v) = args.steps {
                p.steps = v;
            }
            if let Some(v) = args.fmax {
                p.f_max = v;
            }
            if let Some(v) = &args.out_dir {
                p.out_dir = v.clone();
            }
            cube_demo(&p)
        }
        "cavity2d" => {
            let mut p = Cavity2dParams::default();
            if let Some(c) = args.cells {
                p.cells = c;
            }
            if let Some(d) = args.delta {
                p.delta = d;
            }
            if let Some(v) = args.s {
                p.s_factor = v;
            }
            if let Some(v) = args.steps {
                p.steps = v;
            }
            if let Some(v) = &args.engine {
                p.engine = v.clone();
            }
            if let Some(v) = args.order {
                p.order = v;
            }
            if let Some(v) = args.fmax {
                p.f_max = v;
            }
            if let Some(v) = &args.out_dir {
                p.out_dir = v.clone();
            }
            cavity2d(&p)
        }
        "cavity3d" => {
            let mut p = Cavity3dParams::default();
            if let Some(c) = args.cells {
                p.cells = c;
            }
            if let Some(d) = args.delta {
                p.delta = d;
            }
            if let Some(v) = args.s {
                p.s_factor = v;
            }
            if let Some(v) = args.steps {
                p.steps = v;
            }
            if let Some(v) = &args.engine {
                p.engine = v.clone();
            }
            if let Some(v) = args.order {
                p.order = v;
            }
            if let Some(v) = args.fmax {
                p.f_max = v;
            }
            if let Some(v) = &args.out_dir {
                p.out_dir = v.clone();
            }
            cavity3d(&p)
        }
        "iris-waveguide" => {
            let mut p = IrisWaveguideParams::default();
            if let Some(c) = args.cells {
                p.nx = c;
            }
            if let Some(c) = args.cells_axis {
                p.ny = c;
            }
            if let Some(d) = args.delta {
                p.delta = d;
            }
            if let Some(v) = args.s {
                p.s_factor = v;
            }
            if let Some(v) = args.steps {
                p.steps = v;
            }
            if let Some(v) = &args.engine {
                p.engine = v.clone();
            }
            if let Some(v) = args.order {
                p.order = v;
            }
            if let Some(v) = args.fmax {
                p.f_max = v;
            }
            if let Some(v) = &args.out_dir {
                p.out_dir = v.clone();
            }
            p.irises = !args.no_irises;
            p.s_params_reference = args.sparams_ref.clone();
            iris_waveguide(&p)
        }
        other => return Err(format!("unknown template `{other}`")),
    };
    // generated scenarios must round-trip through validation
    scenario::validate(s.clone()).map_err(|e| e.to_string())?;
    std::fs::write(&args.out, scenario::to_toml(&s)).map_err(|e| e.to_string())?;
    Ok(())
}
