use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cnl::{cmd_analyze, cmd_dim, cmd_generate, cmd_repro_sec1, print_outcome, AnalyzeArgs, CliError, Overrides};
use cnl_core::theta::SelectionPolicy;

#[derive(Parser)]
#[command(name = "cnl", version, about = "Exact Cantor-series normality toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Top,
}

#[derive(Subcommand)]
enum Top {
    /// Construct and analyse the Theta set for a chain of bases
    #[command(subcommand)]
    Theta(ThetaCmd),
}

#[derive(Args, Clone)]
struct Common {
    /// Theta config JSON; defaults to q_n = 2^(n+3), s = 2, depth 4
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Chain depth J, overriding the config
    #[arg(long)]
    depth: Option<usize>,
    /// Digit policy: min, max, mid or seeded:<u64>
    #[arg(long)]
    policy: Option<SelectionPolicy>,
    /// Seed for the seeded policy
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides { config: self.config.clone(), depth: self.depth, policy: self.policy, seed: self.seed }
    }
}

#[derive(Subcommand)]
enum ThetaCmd {
    /// Write digits.jsonl, schedule.json and summary.json
    Generate {
        #[command(flatten)]
        common: Common,
        /// Number of digits
        #[arg(long, default_value_t = 5000)]
        n: u64,
    },
    /// Discrepancy, block-count and envelope reports for a digit file
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Digit file; defaults to <out>/digits.jsonl
        #[arg(long)]
        digits: Option<PathBuf>,
        /// Chain levels j, comma separated
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<usize>>,
        /// Shifts k, comma separated
        #[arg(long, value_delimiter = ',', default_value = "0")]
        shifts: Vec<u64>,
        /// Only use the first N digits
        #[arg(long)]
        n: Option<u64>,
    },
    /// Falconer lower-bound trace for the Hausdorff dimension
    Dim {
        #[command(flatten)]
        common: Common,
        /// Depth K of the trace
        #[arg(long, default_value_t = 2000)]
        n: u64,
    },
    /// Reproduce the explicit P, Q counterexample
    #[command(name = "repro-sec1")]
    ReproSec1 {
        /// Output directory
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Horizon for the T_{Q,n}(x) < 1/2 check
        #[arg(long, default_value_t = 5000)]
        n: u64,
    },
}

fn run(cmd: ThetaCmd) -> Result<(), CliError> {
    match cmd {
        ThetaCmd::Generate { common, n } => {
            let o = cmd_generate(&common.overrides(), n, &common.out)?;
            print_outcome(&o);
            o.into_result().map(|_| ())
        }
        ThetaCmd::Analyze { common, digits, levels, shifts, n } => {
            let digits = digits.unwrap_or_else(|| common.out.join("digits.jsonl"));
            let args = AnalyzeArgs { digits, levels, shifts, n };
            let o = cmd_analyze(&common.overrides(), &args, &common.out)?;
            print_outcome(&o);
            o.into_result().map(|_| ())
        }
        ThetaCmd::Dim { common, n } => {
            let d = cmd_dim(&common.overrides(), n, &common.out)?;
            println!("d_{} = {:.12} (bound-substituted {:.12}); growth {}", n, d.d_final, d.d_final_bound, d.growth);
            print_outcome(&d.outcome);
            d.outcome.into_result().map(|_| ())
        }
        ThetaCmd::ReproSec1 { out, n } => {
            let (o, report) = cmd_repro_sec1(n, &out)?;
            print_outcome(&o);
            for flag in &report.flags {
                println!("FLAG  {flag}");
            }
            for t in &report.trends {
                println!("D* {:<10} at N = {}: {:.6}", t.label, t.rows.last().map(|r| r.n).unwrap_or(0), t.last());
            }
            o.into_result().map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    let Top::Theta(cmd) = Cli::parse().command;
    match run(cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cnl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
