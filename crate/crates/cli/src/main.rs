use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use quantbeam::harness::{
    check, evaluate, flop_report, load_scenario, parse_methods, run_cdf, run_sweep, write_cdf, write_sweep,
    DirectionSetup, HarnessError, Method, Scenario, SweepConfig,
};
use quantbeam::optimize::StartOrder;

#[derive(Parser)]
#[command(name = "quantbeam", version, about = "Discrete RX/TX beam codeword synthesis for full-duplex sensing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Preset name (`A`, `B`) or path to a scenario JSON file.
    #[arg(long, global = true, default_value = "A")]
    scenario: String,
    /// Comma-separated methods, or `all`.
    #[arg(long, global = true)]
    methods: Option<String>,
    /// Seed for the randomized property suites.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Alternate starting from the TX codeword only.
    #[arg(long, global = true, conflicts_with = "rx_first")]
    tx_first: bool,
    /// Alternate starting from the RX codeword only.
    #[arg(long, global = true)]
    rx_first: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one sensing direction and print the codewords.
    Solve {
        /// Sensing direction in degrees.
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
    },
    /// Sweep the scenario's sensing directions and write CSV plus a gnuplot script.
    Sweep,
    /// Pooled and per-combination SINR CDFs.
    Cdf {
        /// Communication directions in degrees (defaults to the scenario's).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        comm_dirs: Option<Vec<f64>>,
        /// Communication gain thresholds `c` (defaults to the scenario's).
        #[arg(long, value_delimiter = ',')]
        thresholds: Option<Vec<f64>>,
    },
    /// FLOPs of FP-SS, FP-CSS and the joint optimizer relative to exhaustive search.
    Flops,
    /// Run the randomized property suites.
    Check {
        /// Fraction of the full suite sizes to run.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
    },
    /// Write the scenario as JSON to stdout.
    Scenario,
}

const DEFAULT_METHODS: &str = "fp-ss,fp-css,joint,mvdr-cm-hq,eff-mvdr";

fn config(common: &Common, default_methods: &str) -> Result<SweepConfig, HarnessError> {
    let mut cfg = SweepConfig {
        methods: parse_methods(common.methods.as_deref().unwrap_or(default_methods))?,
        ..SweepConfig::default()
    };
    if common.tx_first {
        cfg.joint.order = StartOrder::TxFirst;
    } else if common.rx_first {
        cfg.joint.order = StartOrder::RxFirst;
    }
    Ok(cfg)
}

fn indices(c: &quantbeam::Codeword) -> String {
    let v: Vec<String> = c.indices().iter().map(ToString::to_string).collect();
    format!("[{}]", v.join(" "))
}

fn solve(s: &Scenario, theta: f64, cfg: &SweepConfig) -> Result<(), HarnessError> {
    if !(theta.abs() <= 90.0) {
        return Err(HarnessError::Validation(vec![format!(
            "theta must lie in [-90, 90] degrees, got {theta}"
        )]));
    }
    let setup = DirectionSetup::new(s)?;
    println!(
        "scenario {}  theta {theta} deg  theta_c {} deg  c {}  bits {}",
        s.name, s.comm_direction_deg, s.comm_threshold, s.bits
    );
    let mut failed = None;
    for &m in &cfg.methods {
        let e = evaluate(s, &setup, theta, m, cfg);
        println!("{m}: sinr {:.4} dB  iterations {}  flops {:.4e}", e.sinr_db, e.iterations, e.flops.total());
        if let Some(w) = &e.rx {
            println!("  rx {}", indices(w));
        }
        if let Some(v) = &e.tx {
            println!("  tx {}  feasible {}", indices(v), e.feasible);
        }
        if let Some(err) = e.error {
            println!("  error: {err}");
            failed.get_or_insert(err);
        }
    }
    match failed {
        Some(err) => Err(HarnessError::Failed(err)),
        None => Ok(()),
    }
}

fn report_errors<'a>(errors: impl Iterator<Item = (f64, Method, &'a str)>) {
    let mut n = 0;
    for (theta, m, e) in errors {
        n += 1;
        if n <= 10 {
            eprintln!("warning: {m} at {theta} deg: {e}");
        }
    }
    if n > 10 {
        eprintln!("warning: {} more failed rows", n - 10);
    }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let common = &cli.common;
    match cli.command {
        Command::Check { scale } => {
            let outcomes = check::run_all(common.seed, scale);
            let mut ok = true;
            for o in &outcomes {
                println!("{o}");
                ok &= o.passed();
            }
            if ok {
                Ok(())
            } else {
                Err(HarnessError::Failed("property suites failed".to_string()))
            }
        }
        command => {
            let s = load_scenario(&common.scenario)?;
            match command {
                Command::Solve { theta } => solve(&s, theta, &config(common, DEFAULT_METHODS)?),
                Command::Sweep => {
                    let cfg = config(common, DEFAULT_METHODS)?;
                    let r = run_sweep(&s, &cfg)?;
                    report_errors(r.errors().map(|x| (x.theta_deg, x.method, x.eval.error.as_deref().unwrap_or(""))));
                    let (csv, gp) = write_sweep(&r, &common.out)?;
                    println!("{} rows -> {}", r.records.len(), csv.display());
                    println!("plot script -> {}", gp.display());
                    Ok(())
                }
                Command::Cdf { comm_dirs, thresholds } => {
                    let cfg = config(common, DEFAULT_METHODS)?;
                    let dirs = comm_dirs.unwrap_or_else(|| s.cdf.comm_directions_deg.clone());
                    let cs = thresholds.unwrap_or_else(|| s.cdf.thresholds.clone());
                    let r = run_cdf(&s, &dirs, &cs, &cfg)?;
                    report_errors(
                        r.samples
                            .iter()
                            .filter_map(|x| x.error.as_deref().map(|e| (x.theta_deg, x.method, e))),
                    );
                    for p in write_cdf(&r, &common.out)? {
                        println!("-> {}", p.display());
                    }
                    Ok(())
                }
                Command::Flops => {
                    let cfg = config(common, DEFAULT_METHODS)?;
                    let r = flop_report(&s, &cfg)?;
                    print!("{r}");
                    write_text(&common.out, &format!("flops_{}.csv", s.name), &r.to_csv())
                }
                Command::Scenario => {
                    print!("{}", s.to_json());
                    Ok(())
                }
                Command::Check { .. } => unreachable!("handled above"),
            }
        }
    }
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let p = dir.join(name);
    std::fs::write(&p, text).map_err(|e| io_err(&p, e))?;
    println!("-> {}", p.display());
    Ok(())
}

fn io_err(path: &Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
