use std::collections::BTreeMap;
use std::process::ExitCode;

use clap::Parser;
use sinhpoisson_cli::{merge, parse_config_text, run, CliError, RunConfig};

/// Multi-peak solutions of the nonlocal sinh-Poisson equation on (-1, 1).
#[derive(Debug, Parser)]
#[command(name = "sinhpoisson", version)]
struct Args {
    /// optimize | solve | sweep | verify | probe (may come from the config file)
    command: Option<String>,
    /// Flat key=value config file; flags override its entries.
    #[arg(long)]
    config: Option<String>,
    /// Number of peaks.
    #[arg(long)]
    k: Option<String>,
    /// Sign pattern such as +-+, or "alternating".
    #[arg(long)]
    signs: Option<String>,
    /// Comma-separated peak locations (default: reduced-energy maximizer).
    #[arg(long, allow_hyphen_values = true)]
    xi: Option<String>,
    /// Single lambda for solve
    #[arg(long)]
    lambda: Option<String>,
    /// start:end
    #[arg(long)]
    lambda_range: Option<String>,
    /// Geometric ratio between consecutive lambdas.
    #[arg(long)]
    factor: Option<String>,
    /// Base mesh resolution.
    #[arg(long)]
    base_n: Option<String>,
    /// Newton tolerance on the sup residual.
    #[arg(long)]
    tol: Option<String>,
    /// Seed for the random starts of optimize and probe
    #[arg(long)]
    seed: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Profile CSV to verify.
    #[arg(long)]
    profile: Option<String>,
    /// Report JSON to verify.
    #[arg(long)]
    report: Option<String>,
    /// Random starts for probe.
    #[arg(long)]
    starts: Option<String>,
    /// Compute smallest singular values (true/false).
    #[arg(long)]
    sigma: Option<String>,
}

impl Args {
    fn flags(&self) -> BTreeMap<String, String> {
        let pairs = [
            ("command", &self.command),
            ("k", &self.k),
            ("signs", &self.signs),
            ("xi", &self.xi),
            ("lambda", &self.lambda),
            ("lambda_range", &self.lambda_range),
            ("factor", &self.factor),
            ("base_n", &self.base_n),
            ("tol", &self.tol),
            ("seed", &self.seed),
            ("out", &self.out),
            ("profile", &self.profile),
            ("report", &self.report),
            ("starts", &self.starts),
            ("sigma", &self.sigma),
        ];
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect()
    }
}

fn resolve(args: &Args) -> Result<RunConfig, CliError> {
    let file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {path}: {e}")))?;
            parse_config_text(&text)?
        }
        None => BTreeMap::new(),
    };
    RunConfig::from_map(&merge(file, args.flags()))
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = resolve(&args).and_then(|cfg| run(&cfg));
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
