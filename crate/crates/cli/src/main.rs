use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qgraph_cli::{CommandRegistry, RunConfig, Status};

#[derive(Parser)]
#[command(
    name = "qgraph",
    version,
    about = "Spectral computations on metric graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Check the graph and the vertex conditions
    Validate,
    /// Eigenvalues from each selected solver and their disagreement
    Spectrum,
    /// Eigenfunction expansion report
    Expansion,
    /// Schrödinger perturbation report
    Potential,
}

impl Cmd {
    fn name(self) -> &'static str {
        match self {
            Cmd::Validate => "validate",
            Cmd::Spectrum => "spectrum",
            Cmd::Expansion => "expansion",
            Cmd::Potential => "potential",
        }
    }
}

#[derive(Args)]
struct Opts {
    /// Graph description (JSON)
    #[arg(long, global = true)]
    graph: Option<PathBuf>,
    /// Vertex-condition file, or a preset used at every vertex (default kirchhoff)
    #[arg(long, global = true)]
    bc: Option<String>,
    /// Mesh width (default u/20)
    #[arg(long, global = true)]
    mesh: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    lambda_min: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    lambda_max: Option<f64>,
    /// Number of eigenvalues
    #[arg(long, global = true)]
    modes: Option<usize>,
    /// Residual tolerance of the eigen-equation checks
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Self-adjointness tolerance of vertex conditions
    #[arg(long, global = true, default_value_t = qgraph::boundary::DEFAULT_TOL)]
    bc_tol: f64,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Random samples for the form inequalities
    #[arg(long, global = true, default_value_t = 1000)]
    samples: usize,
    /// Directory for the JSON report and CSV files
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Potential preset (const:c, well:edge,t0,t1,depth, random:seed,amp) or CSV file
    #[arg(long, global = true)]
    potential: Option<String>,
    #[arg(long, global = true, default_value_t = 0.5)]
    weight_eps: f64,
    /// Base point of the weight, `vertex` or `edge:t` (default w = 1)
    #[arg(long, global = true)]
    weight_base: Option<String>,
    /// Comma-separated solver names
    #[arg(long, global = true, default_value = "fem,secular")]
    solvers: String,
    /// Sampled function (edge_id,t,re,im) to test as a generalized eigenfunction
    #[arg(long, global = true)]
    check_file: Option<PathBuf>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    check_lambda: Option<f64>,
    #[arg(long, global = true, default_value_t = 1e-4)]
    check_tol: f64,
    /// The C of (C + H)^(-1/2) in the HS norm (default Heins C + 1)
    #[arg(long, global = true, allow_negative_numbers = true)]
    gamma_shift: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let o = cli.opts;
    let Some(graph) = o.graph else {
        eprintln!("error: --graph is required");
        return ExitCode::from(Status::InputError.code());
    };
    let cfg = RunConfig {
        graph,
        bc: o.bc,
        mesh: o.mesh,
        lambda_min: o.lambda_min,
        lambda_max: o.lambda_max,
        modes: o.modes,
        tol: o.tol,
        bc_tol: o.bc_tol,
        seed: o.seed,
        samples: o.samples,
        out: o.out,
        potential: o.potential,
        weight_eps: o.weight_eps,
        weight_base: o.weight_base,
        solvers: o.solvers,
        check_file: o.check_file,
        check_lambda: o.check_lambda,
        check_tol: o.check_tol,
        gamma_shift: o.gamma_shift,
    };
    let name = cli.command.name();
    let outcome = CommandRegistry::builtin().run(name, &cfg);
    if let Some(err) = outcome.report.get("error").and_then(|e| e.as_str()) {
        eprintln!("error: {err}");
    }
    match &cfg.out {
        Some(dir) => {
            if let Err(e) = outcome.write_to(dir, name) {
                eprintln!("error: writing to `{}`: {e}", dir.display());
                return ExitCode::from(Status::InputError.code());
            }
        }
        None => print!("{}", outcome.report_json()),
    }
    ExitCode::from(outcome.status.code())
}
