use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use robust_bounds::discretise::{lift_error, stages};
use robust_bounds::marginals::{marginal_from_puts, PutPriceCurve};
use robust_bounds::paths::GridPath;
use robust_bounds::problem::{run_bounds, run_sweep, run_verify, write_results, write_strategy, ProblemSpec, ResultRow, StaticHoldings};
use robust_bounds::rational::{pow2, q_to_f64, Q};
use robust_bounds::Error;

#[derive(Parser)]
#[command(name = "robust-bounds", version, about = "Model-free price bounds and superhedges on path lattices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for data-parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomised sweeps.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Tolerance for gap and slack checks.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Discretise a path CSV (`t,s1,...`) at mesh 2^-N.
    Discretise {
        #[arg(long)]
        input: PathBuf,
        #[arg(long = "n", short = 'n')]
        n: u32,
    },
    /// Primal and dual bounds with gaps for every relaxation level.
    Bounds {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Replay a strategy on every lattice path and report slacks.
    Verify {
        #[arg(long)]
        spec: PathBuf,
        /// Per-path positions, CSV `path_id,rebalance_time,asset,position`.
        #[arg(long)]
        strategy: Option<PathBuf>,
        /// Static holdings JSON `{"a0": .., "holdings": [..]}`.
        #[arg(long = "static")]
        statics: PathBuf,
    },
    /// Invert a put price curve (`strike,price`) into a marginal.
    Marginals {
        #[arg(long)]
        puts: PathBuf,
    },
    /// Penalty, relaxation, mesh and price-perturbation sweeps.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
    },
}

const EXIT_INPUT: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_BUDGET: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Budget { .. } => EXIT_BUDGET,
        Error::Infeasible(_) => EXIT_INFEASIBLE,
        Error::InternalConsistency(_) | Error::Construction(_) => 1,
        _ => EXIT_INPUT,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: &Cli) -> Result<u8, Error> {
    std::fs::create_dir_all(&cli.out)?;
    match &cli.command {
        Command::Discretise { input, n } => discretise(input, *n, &cli.out),
        Command::Bounds { spec } => {
            let spec = ProblemSpec::read(spec)?;
            let (prob, out) = run_bounds(&spec, cli.tolerance)?;
            write_results(&out.rows, File::create(cli.out.join("results.csv"))?)?;
            if let Some(q) = &out.measure {
                let mut w = csv::Writer::from_writer(File::create(cli.out.join("measure.csv"))?);
                w.write_record(["path_id", "prob"]).map_err(csv_err)?;
                for (i, p) in q.iter().enumerate() {
                    w.write_record([i.to_string(), format!("{p}")]).map_err(csv_err)?;
                }
                w.flush()?;
            }
            if let Some(sol) = &out.superhedge {
                write_strategy(&prob, sol, &cli.out)?;
            }
            print_rows(&out.rows);
            if out.infeasible {
                let cert = out.certificate.unwrap_or_default();
                let mut w = csv::Writer::from_writer(File::create(cli.out.join("certificate.csv"))?);
                w.write_record(["row", "multiplier"]).map_err(csv_err)?;
                for (i, y) in cert.iter().enumerate() {
                    w.write_record([i.to_string(), format!("{y}")]).map_err(csv_err)?;
                }
                w.flush()?;
                eprintln!("primal infeasible at eta = {}; certificate written", spec.eta);
                return Ok(EXIT_INFEASIBLE);
            }
            Ok(0)
        }
        Command::Verify { spec, strategy, statics } => {
            let spec = ProblemSpec::read(spec)?;
            let holdings: StaticHoldings = serde_json::from_str(&std::fs::read_to_string(statics)?)?;
            let report = run_verify(&spec, &holdings, strategy.as_deref())?;
            report.write_csv(File::create(cli.out.join("slacks.csv"))?)?;
            let tol = cli.tolerance.unwrap_or(1e-8);
            match report.worst_path {
                Some(p) => println!(
                    "worst slack {:e} on path {p}: {}",
                    report.worst_slack,
                    if report.superhedges(tol) { "superhedges" } else { "fails to superhedge" }
                ),
                None => println!("no path in scope"),
            }
            Ok(0)
        }
        Command::Marginals { puts } => {
            let curve = PutPriceCurve::read_csv(File::open(puts)?)?;
            let mu = marginal_from_puts(&curve)?;
            std::fs::write(cli.out.join("marginal.json"), mu.to_json()?)?;
            let mut w = csv::Writer::from_writer(File::create(cli.out.join("marginal.csv"))?);
            w.write_record(["value", "prob"]).map_err(csv_err)?;
            for (x, p) in mu.support().iter().zip(mu.probs()) {
                w.write_record([format!("{x}"), format!("{p}")]).map_err(csv_err)?;
            }
            w.flush()?;
            println!("{} atoms, mean {}", mu.support().len(), mu.mean());
            Ok(0)
        }
        Command::Sweep { spec } => {
            let spec = ProblemSpec::read(spec)?;
            let rows = run_sweep(&spec, cli.seed)?;
            write_results(&rows, File::create(cli.out.join("sweep.csv"))?)?;
            print_rows(&rows);
            Ok(0)
        }
    }
}

fn discretise(input: &Path, n: u32, out: &Path) -> Result<u8, Error> {
    let path = GridPath::read_csv(File::open(input)?)?;
    let st = stages(&path, n)?;
    let errors = st.errors();
    std::fs::write(out.join("discretised.json"), st.hat.to_json()?)?;
    let rows = vec![
        ResultRow { quantity: "steps".into(), value: st.hat.step_count() as f64, status: "ok".into() },
        row_bound("naive_vs_path", &errors.naive_vs_path, &pow2(-(n as i64)), false),
        row_bound("hat_vs_path", &errors.hat_vs_path, &pow2(-(n as i64) + 3), true),
        row_bound("lift_vs_hat", &lift_error(&st.hat), &pow2(-(n as i64) + 1), false),
    ];
    write_results(&rows, File::create(out.join("errors.csv"))?)?;
    print_rows(&rows);
    Ok(0)
}

fn row_bound(name: &str, value: &Q, bound: &Q, strict: bool) -> ResultRow {
    let within = if strict { value < bound } else { value <= bound };
    let status = if within { "within_bound" } else { "exceeds_bound" };
    ResultRow { quantity: name.into(), value: q_to_f64(value), status: status.into() }
}

fn print_rows(rows: &[ResultRow]) {
    for r in rows {
        println!("{:<36} {:>22} {}", r.quantity, format!("{}", r.value), r.status);
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
