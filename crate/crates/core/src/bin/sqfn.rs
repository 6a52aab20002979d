use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use sqfn::carleson::{bound_constant_43, c0_of_b};
use sqfn::kernels::{derived_exponents, KernelFile};
use sqfn::lab::{self, RunParams, DEFAULT_SEED};
use sqfn::{Error, Result};

/// Square functions, weights and Carleson conditions at desk scale.
#[derive(Parser)]
#[command(name = "sqfn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and print its JSON report.
    Run {
        scenario: String,
        #[command(flatten)]
        res: Resolution,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run invariant batteries and scenarios; `all` by default.
    Verify {
        /// Names to run. Passing the flag with no names selects nothing.
        #[arg(long, num_args = 0..)]
        suite: Option<Vec<String>>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the CSV series behind a scenario.
    Plotdata {
        scenario: String,
        #[command(flatten)]
        res: Resolution,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the bound constant and C0(B) for given exponents.
    Constants {
        /// Exponents p_i, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        p: Vec<f64>,
        /// Weight constants [w_i^{p_i}]_{A_{p_i}}, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        ap: Vec<f64>,
        /// Strong Carleson constant.
        #[arg(long)]
        sc: f64,
        /// B in C0(B); defaults to the largest weight constant.
        #[arg(long)]
        b: Option<f64>,
    },
    /// Parse a kernel description file and summarise it.
    Kernel { file: PathBuf },
}

#[derive(Args)]
struct Resolution {
    #[arg(long)]
    grid_h: Option<f64>,
    #[arg(long)]
    t_min: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    per_octave: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

impl Resolution {
    fn params(&self) -> RunParams {
        RunParams {
            grid_h: self.grid_h,
            t_min: self.t_min,
            t_max: self.t_max,
            per_octave: self.per_octave,
            seed: self.seed,
        }
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Config(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json_text(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values serialise");
    s.push('\n');
    s
}

fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run { scenario, res, out } => {
            let start = Instant::now();
            let mut report = lab::run_scenario(&scenario, &res.params())?;
            report.environment.runtime_ms = Some(lab::elapsed_ms(start));
            emit(&report.to_json(), out.as_deref())?;
            Ok(report.exit_code())
        }
        Command::Verify { suite, seed, out } => {
            let selection = suite.unwrap_or_else(|| vec!["all".into()]);
            let report = lab::run_suite(&selection, seed)?;
            emit(&report.to_json(), out.as_deref())?;
            for c in report.checks.iter().filter(|c| !c.pass) {
                eprintln!("FAIL {}: computed {} reference {:?}", c.id, c.computed, c.reference);
            }
            Ok(report.exit_code())
        }
        Command::Plotdata { scenario, res, out } => {
            let csv = lab::plotdata(&scenario, &res.params())?;
            emit(&csv, Some(&out))?;
            Ok(0)
        }
        Command::Constants { p, ap, sc, b } => {
            let bound = bound_constant_43(&ap, &p, sc)?;
            let b = b.unwrap_or_else(|| ap.iter().copied().fold(1.0, f64::max));
            // C0(B) is only defined for B > 1
            let c0 = if b > 1.0 { Some(c0_of_b(b, &p, sc)?) } else { None };
            let v = json!({ "p": p, "ap": ap, "sc": sc, "bound_constant": bound, "b": b, "c0": c0 });
            emit(&json_text(&v), None)?;
            Ok(0)
        }
        Command::Kernel { file } => {
            let desc = KernelFile::load(&file)?;
            let spec = desc.build()?;
            let exps = derived_exponents(spec.decay, spec.gamma, spec.n)?;
            let weights = desc
                .weights
                .iter()
                .map(|w| w.build(spec.n).map(|w| w.tag()))
                .collect::<Result<Vec<_>>>()?;
            let v = json!({
                "m": spec.m,
                "n": spec.n,
                "N": spec.decay,
                "gamma": spec.gamma,
                "t_constant": spec.t_constant,
                "reach": spec.reach(),
                "derived": exps,
                "weights": weights,
            });
            emit(&json_text(&v), None)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
