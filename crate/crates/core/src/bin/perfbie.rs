use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use perfbie::geometry::Point;
use perfbie::harness::{load_config, run, ExperimentSpec, Mode};

#[derive(Parser)]
#[command(name = "perfbie", version, about = "Two-hole mixed Laplace problem: solves, sweeps, expansions and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve on the parameter grid and evaluate every view.
    Solve(Common),
    /// eps sweep with eta(eps) = c eps^beta, errors against the limit.
    Converge(Common),
    /// Expansion coefficients, finite-difference checks and remainder order.
    Expand(Common),
    /// Run the invariant suite; exits 1 if any check fails.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// JSON configuration; the built-in default when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Nodes per curve, overriding the configuration.
    #[arg(long)]
    nodes: Option<usize>,
    /// c,beta
    #[arg(long, value_parser = parse_pair)]
    eta: Option<(f64, f64)>,
    /// t1,t2,...
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// Macroscopic points "x,y;x,y".
    #[arg(long = "macro", value_parser = parse_points)]
    macro_points: Option<PointList>,
    /// Microscopic points t, "x,y;x,y".
    #[arg(long = "micro", value_parser = parse_points)]
    micro_points: Option<PointList>,
    /// Boundary-layer points "j:x,y;j:x,y".
    #[arg(long = "layer", value_parser = parse_layer_points)]
    layer_points: Option<LayerList>,
}

#[derive(Clone)]
struct PointList(Vec<Point>);

#[derive(Clone)]
struct LayerList(Vec<(usize, Point)>);

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected two numbers, got '{s}'"))?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("'{v}': {e}"));
    Ok((num(a)?, num(b)?))
}

fn parse_points(s: &str) -> Result<PointList, String> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| parse_pair(p).map(|(x, y)| Point::new(x, y)))
        .collect::<Result<_, _>>()
        .map(PointList)
}

fn parse_layer_points(s: &str) -> Result<LayerList, String> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (j, xy) = p.split_once(':').ok_or_else(|| format!("expected j:x,y, got '{p}'"))?;
            let j = j.trim().parse::<usize>().map_err(|e| format!("'{j}': {e}"))?;
            let (x, y) = parse_pair(xy)?;
            Ok((j, Point::new(x, y)))
        })
        .collect::<Result<_, String>>()
        .map(LayerList)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, common) = match cli.command {
        Command::Solve(c) => (Mode::Solve, c),
        Command::Converge(c) => (Mode::Converge, c),
        Command::Expand(c) => (Mode::Expand, c),
        Command::Validate(c) => (Mode::Validate, c),
    };
    let config = match load_config(common.config.as_deref(), common.nodes) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let mut spec = ExperimentSpec::new(mode, config, common.out);
    if let Some(g) = common.grid {
        spec.grid = g;
    }
    if let Some(e) = common.eta {
        spec.eta = e;
    }
    if let Some(p) = common.macro_points {
        spec.macro_points = p.0;
    }
    if let Some(p) = common.micro_points {
        spec.micro_points = p.0;
    }
    if let Some(p) = common.layer_points {
        spec.layer_points = p.0;
    }
    match run(&spec) {
        Ok(report) => {
            println!("wrote {}", report.path.display());
            if report.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                for name in &report.failures {
                    eprintln!("FAIL {name}");
                }
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
