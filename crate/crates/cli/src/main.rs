//! `nvb`: check, relabel, refine and measure simplicial meshes.
//!
//! Exit codes: 0 ok or compatible, 1 incompatible, 2 input error, 3 an
//! internal guard tripped (closure did not terminate or ended non-conforming).

mod commands;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use nvb_core::io::IoError;
use nvb_core::MeshError;

#[derive(Parser, Debug)]
#[command(name = "nvb", version, about = "Newest vertex bisection toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Report weakest/weak compatibility and the face classification counts.
    Check {
        mesh: PathBuf,
        /// Count boundary faces in the face totals.
        #[arg(long)]
        boundary: bool,
        /// One CSV row instead of text.
        #[arg(long)]
        csv: bool,
    },
    /// Relabel vertices so that the mesh becomes weakly compatible.
    Relabel(RelabelArgs),
    /// Refine uniformly or by marking elements and closing.
    Refine(RefineArgs),
    /// Geometric quality indicators and adjacency maxima.
    Metrics {
        mesh: PathBuf,
        /// Uniform refinements applied before measuring.
        #[arg(long, default_value_t = 0)]
        refine_uniform: usize,
        #[arg(long)]
        csv: bool,
    },
    /// Per-element conforming-closure sizes.
    Closure {
        mesh: PathBuf,
        /// Uniform refinements applied before measuring.
        #[arg(long, default_value_t = 0)]
        level: usize,
        /// Run every closure instead of bounding the average.
        #[arg(long)]
        exact_average: bool,
    },
    /// Threshold sweep writing one CSV per (strategy, ordering).
    Sweep(sweep::SweepArgs),
    /// Generate structured meshes.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Convert between formats, chosen by extension (.msh, .dsimp, .vtk).
    Convert { input: PathBuf, output: PathBuf },
    /// Time the relabel pipeline on growing Kuhn grids; CSV on stdout.
    Bench(sweep::BenchArgs),
}

#[derive(Subcommand, Debug)]
enum GenKind {
    /// Kuhn triangulation of the unit cube.
    Kuhn {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        cells: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Sets {
    Ot0,
    Ile,
    Lae,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Order {
    Srn,
    Srn2,
}

#[derive(Args, Debug)]
struct RelabelArgs {
    mesh: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, value_enum)]
    sets: Sets,
    #[arg(long, default_value_t = 0)]
    threshold: u32,
    #[arg(long, value_enum)]
    order: Order,
    /// Lines `element v_a v_b`; unlisted elements announce their longest edge.
    #[arg(long)]
    announce: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("how").required(true).args(["uniform", "mark", "mark_random"])))]
struct RefineArgs {
    mesh: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    /// Bisect every element this many times.
    #[arg(long)]
    uniform: Option<usize>,
    /// File of element indices to mark.
    #[arg(long)]
    mark: Option<PathBuf>,
    /// Mark each element independently with this probability (ChaCha8 generator).
    #[arg(long, requires = "seed")]
    mark_random: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let guard = |e: &MeshError| matches!(e, MeshError::NonTermination { .. } | MeshError::ClosureNotConforming(_));
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<MeshError>() {
            if guard(e) {
                return 3;
            }
        }
        if let Some(IoError::Mesh(e)) = cause.downcast_ref::<IoError>() {
            if guard(e) {
                return 3;
            }
        }
    }
    2
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Check { mesh, boundary, csv } => commands::check(&mesh, boundary, csv),
        Command::Relabel(a) => commands::relabel(&a.mesh, &a.output, a.sets, a.threshold, a.order, a.announce.as_deref()),
        Command::Refine(a) => {
            let how = match (a.uniform, a.mark, a.mark_random) {
                (Some(k), _, _) => commands::Refinement::Uniform(k),
                (_, Some(path), _) => commands::Refinement::MarkFile(path),
                (_, _, Some(p)) => commands::Refinement::Random { p, seed: a.seed.unwrap_or(0) },
                _ => unreachable!("clap enforces one refinement mode"),
            };
            commands::refine(&a.mesh, &a.output, how)
        }
        Command::Metrics { mesh, refine_uniform, csv } => commands::metrics(&mesh, refine_uniform, csv),
        Command::Closure { mesh, level, exact_average } => commands::closure(&mesh, level, exact_average),
        Command::Sweep(a) => sweep::sweep(&a),
        Command::Gen { kind: GenKind::Kuhn { dim, cells, output } } => commands::gen_kuhn(dim, cells, &output),
        Command::Convert { input, output } => commands::convert(&input, &output),
        Command::Bench(a) => sweep::bench(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
