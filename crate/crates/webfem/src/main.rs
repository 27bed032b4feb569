//! Command-line driver: `solve` one grid, `converge` over a sweep, or
//! `check` the well-posedness gate, all from a JSON config.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use webfem::config::{ExportFormat, RunConfig};
use webfem::error::{Error, Result};
use webfem::export::{render_field, write_atomic};
use webfem::post::{run_single, ConvergenceReport, RunOptions};
use webfem::problem::{check_wellposedness, CoupledProblem, WellposednessReport};

#[derive(Parser)]
#[command(name = "webfem", version, about = "Meshfree WEB-spline solver for coupled elliptic systems on implicit domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a single (n, h) run and export the solution field.
    Solve(RunArgs),
    /// Run the grid sweep and report errors, residuals and conditioning.
    Converge(RunArgs),
    /// Evaluate the well-posedness gate and exit accordingly.
    Check(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,

    /// Dotted-path overrides, e.g. --set grid.h=0.05 --set solver.method=direct.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Output directory (overrides output.dir from the config).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Field export format (overrides output.format).
    #[arg(long, value_enum)]
    format: Option<FormatArg>,

    /// Proceed / exit 0 even when the well-posedness gate fails.
    #[arg(long = "override-gate")]
    override_gate: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Vtk,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config, &self.set)?;
        if let Some(out) = &self.out {
            cfg.output.dir = Some(out.display().to_string());
        }
        if let Some(fmt) = self.format {
            cfg.output.format = match fmt {
                FormatArg::Csv => ExportFormat::Csv,
                FormatArg::Vtk => ExportFormat::Vtk,
            };
        }
        if self.override_gate {
            cfg.solver.override_gate = true;
        }
        Ok(cfg)
    }
}

const GATE_SAMPLE_RESOLUTION: usize = 64;

fn gate_report(prob: &CoupledProblem) -> Result<WellposednessReport> {
    check_wellposedness(prob, GATE_SAMPLE_RESOLUTION)
}

/// Gate policy for solve/converge: failing is an error unless overridden.
fn enforce_gate(prob: &CoupledProblem, cfg: &RunConfig) -> Result<()> {
    let report = gate_report(prob)?;
    if report.pass {
        return Ok(());
    }
    if cfg.solver.override_gate {
        eprintln!("warning: proceeding despite failing gate (override set)\n{report}");
        Ok(())
    } else {
        Err(Error::GateFailed(format!(
            "{report}\nThe condition is sufficient, not necessary; pass --override-gate \
             or set solver.override_gate to proceed."
        )))
    }
}

fn output_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = PathBuf::from(cfg.output.dir.clone().unwrap_or_else(|| ".".into()));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn run_options(cfg: &RunConfig, n: u32) -> RunOptions {
    RunOptions {
        method: cfg.solver.method,
        tol: cfg.solver.tol,
        quad: Some(cfg.quadrature.resolve(n)),
        estimate_cond: true,
    }
}

fn cmd_solve(args: &RunArgs) -> Result<()> {
    let cfg = args.load()?;
    let prob = cfg.build_problem()?;
    enforce_gate(&prob, &cfg)?;
    let n = cfg.grid.n.to_vec()[0];
    let h = cfg.grid.h.to_vec()[0];
    let result = run_single(&prob, n, h, &run_options(&cfg, n))?;

    let dir = output_dir(&cfg)?;
    let ext = match cfg.output.format {
        ExportFormat::Csv => "csv",
        ExportFormat::Vtk => "vtk",
    };
    let field_path = dir.join(format!("field.{ext}"));
    let rendered = render_field(&result.solution, cfg.output.resolution, cfg.output.format)?;
    write_atomic(&field_path, &rendered)?;

    if cfg.output.dump_matrix {
        let mut buf = Vec::new();
        result.system.g.write_matrix_market(&mut buf)?;
        write_atomic(&dir.join("g.mtx"), &String::from_utf8_lossy(&buf))?;
        let mut rhs = String::from("%%MatrixMarket matrix array real general\n");
        rhs.push_str(&format!("{} 1\n", result.system.f.len()));
        for v in &result.system.f {
            rhs.push_str(&format!("{v:.16e}\n"));
        }
        write_atomic(&dir.join("f.mtx"), &rhs)?;
    }

    let row = result.row;
    println!("n = {}, h = {}, unknowns per component N = {}", row.n, row.h, row.n_unknowns);
    if row.e.is_nan() {
        println!("relative residual e: unavailable (needs n >= 3)");
    } else {
        println!("relative residual e = {:.6e}", row.e);
    }
    if !row.l2.is_nan() {
        println!("errors vs exact: L2 = {:.6e}, H1 = {:.6e}", row.l2, row.h1);
    }
    println!("condition estimate = {:.6e}", row.cond);
    println!("wall time = {:.3} s", row.seconds);
    println!("field written to {}", field_path.display());
    Ok(())
}

fn cmd_converge(args: &RunArgs) -> Result<()> {
    let cfg = args.load()?;
    let prob = cfg.build_problem()?;
    enforce_gate(&prob, &cfg)?;
    let hs = cfg.grid.h.to_vec();
    let mut reports: Vec<ConvergenceReport> = Vec::new();
    for n in cfg.grid.n.to_vec() {
        let opts = run_options(&cfg, n);
        let mut rows = Vec::new();
        for &h in &hs {
            rows.push(run_single(&prob, n, h, &opts)?.row);
        }
        reports.push(ConvergenceReport::from_rows(rows));
    }

    let mut csv = String::from("n,h,N,L2,H1,e,cond,seconds\n");
    for report in &reports {
        for line in report.to_csv().lines().skip(1) {
            csv.push_str(line);
            csv.push('\n');
        }
    }
    let dir = output_dir(&cfg)?;
    let path = dir.join("converge.csv");
    write_atomic(&path, &csv)?;

    for report in &reports {
        print!("{}", report.to_table());
    }
    println!("report written to {}", path.display());
    Ok(())
}

fn cmd_check(args: &RunArgs) -> Result<bool> {
    let cfg = args.load()?;
    let prob = cfg.build_problem()?;
    let report = gate_report(&prob)?;
    println!("{report}");
    Ok(report.pass || cfg.solver.override_gate)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Solve(args) => cmd_solve(args).map(|()| true),
        Command::Converge(args) => cmd_converge(args).map(|()| true),
        Command::Check(args) => cmd_check(args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
