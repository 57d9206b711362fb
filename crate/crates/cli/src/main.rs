use std::path::PathBuf;
use std::process::ExitCode;

use bvhscan::morton::CodeWidth;
use bvhscan_cli::{
    parse_derive_eps, run, Algorithm, CliError, EpsSource, GenSpec, RunConfig, Source,
};
use clap::{ArgGroup, Parser};

/// Cluster a point set with a BVH-based DBSCAN.
#[derive(Parser, Debug)]
#[command(name = "bvhscan", version)]
#[command(group(ArgGroup::new("source").required(true).args(["input", "generate"])))]
#[command(group(ArgGroup::new("radius").required(true).args(["eps", "derive_eps"])))]
struct Args {
    /// Point file to read
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,
    /// Generator spec, e.g. gaussian:n=10000,d=3,clusters=8,sigma=0.01
    #[arg(long, value_name = "SPEC")]
    generate: Option<String>,
    /// Format of --input
    #[arg(long, default_value = "csv", value_parser = ["csv", "binary"])]
    format: String,
    #[arg(long, default_value = "fdbscan",
          value_parser = ["fdbscan", "densebox", "fof", "legacy", "oracle"])]
    algo: String,
    /// Neighborhood radius
    #[arg(long, value_name = "X")]
    eps: Option<f64>,
    /// Derive eps as b*(V/n)^(1/3); terms may be written base^exp
    #[arg(long, value_name = "b,V,n")]
    derive_eps: Option<String>,
    /// Minimum neighborhood size (including the point) of a core point
    #[arg(long, default_value_t = 2)]
    minpts: usize,
    #[arg(long, default_value = "64", value_parser = ["32", "64"])]
    code_width: String,
    /// Compare against the brute-force oracle
    #[arg(long)]
    verify: bool,
    /// Run every phase sequentially
    #[arg(long)]
    sequential: bool,
    #[arg(long, value_name = "PATH")]
    labels_out: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    report_out: Option<PathBuf>,
    /// Print 32- and 64-bit Morton duplicate statistics
    #[arg(long)]
    morton_report: bool,
    /// Seed for generators that do not set one
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn config_from(args: Args) -> Result<RunConfig, CliError> {
    let source = match (args.input, args.generate) {
        (Some(path), None) => Source::File {
            path,
            format: args.format.parse().map_err(CliError::Usage)?,
        },
        (None, Some(spec)) => Source::Generate(spec.parse::<GenSpec>()?),
        _ => unreachable!("clap enforces exactly one source"),
    };
    let eps = match (args.eps, args.derive_eps) {
        (Some(e), None) => EpsSource::Explicit(e),
        (None, Some(s)) => {
            let (b, volume, n) = parse_derive_eps(&s)?;
            EpsSource::Derived { b, volume, n }
        }
        _ => unreachable!("clap enforces exactly one radius"),
    };
    let mut config = RunConfig::new(source, eps, args.minpts);
    config.seed = args.seed;
    config.algorithm = args.algo.parse::<Algorithm>().map_err(CliError::Usage)?;
    config.code_width = args
        .code_width
        .parse()
        .ok()
        .and_then(CodeWidth::from_bits)
        .ok_or_else(|| CliError::Usage(format!("bad code width {}", args.code_width)))?;
    config.verify = args.verify;
    config.sequential = args.sequential;
    config.labels_out = args.labels_out;
    config.report_out = args.report_out;
    config.morton_report = args.morton_report;
    Ok(config)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = config_from(args).and_then(|config| run(&config));
    match result {
        Ok(report) => {
            println!("{}", report.summary());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
