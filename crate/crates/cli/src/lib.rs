//! Batch driver for `bvhscan`: loads or generates points, runs one of the
//! clustering algorithms, optionally checks it against the brute-force
//! oracle, and writes labels plus a flat `key=value` report.

pub mod generate;
pub mod io;

use std::fmt::{self, Write as _};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bvhscan::dbscan::{
    check_equivalence, dsdbscan_oracle, fdbscan, fdbscan_densebox, fof_connected_components,
    legacy_graph_dbscan, DbscanError, DbscanOptions, DbscanOutput, DbscanParams, Label, Mismatch,
};
use bvhscan::geometry::bounding_box;
use bvhscan::morton::{morton_stats, point_code, CodeWidth, MortonStats};
use bvhscan::{Execution, Point};
use thiserror::Error;

pub use generate::GenSpec;
pub use io::{load_points, save_points, Format, PointCloud};

pub const DEFAULT_ORACLE_CEILING: usize = 20_000;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{0}")]
    Algorithm(#[from] DbscanError),
    #[error("verification failed: {0}")]
    Verify(Mismatch),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 1 usage, 2 I/O or parse, 3 verification mismatch.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Algorithm(DbscanError::InvalidParams(_)) => 1,
            CliError::Io { .. } | CliError::Parse { .. } | CliError::Algorithm(_) => 2,
            CliError::Verify(_) => 3,
        }
    }
}

/// `eps = b * (V / n)^(1/3)`, evaluated in double precision.
pub fn derive_eps(b: f64, volume: f64, n: f64) -> Result<f64, CliError> {
    for (name, v) in [("b", b), ("V", volume), ("n", n)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(CliError::Usage(format!(
                "derive-eps: {name} must be positive, got {v}"
            )));
        }
    }
    Ok(b * (volume / n).cbrt())
}

/// Parses `b,V,n`. Each term may be written `base^exp`, e.g. `256^3`.
pub fn parse_derive_eps(s: &str) -> Result<(f64, f64, f64), CliError> {
    let usage = || CliError::Usage(format!("derive-eps: expected b,V,n, got '{s}'"));
    let term = |t: &str| -> Result<f64, CliError> {
        let t = t.trim();
        match t.split_once('^') {
            Some((base, exp)) => {
                let base: f64 = base.trim().parse().map_err(|_| usage())?;
                let exp: i32 = exp.trim().parse().map_err(|_| usage())?;
                Ok(base.powi(exp))
            }
            None => t.parse().map_err(|_| usage()),
        }
    };
    let parts: Vec<&str> = s.split(',').collect();
    let [b, v, n] = parts[..] else {
        return Err(usage());
    };
    Ok((term(b)?, term(v)?, term(n)?))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Algorithm {
    #[default]
    Fdbscan,
    Densebox,
    Fof,
    Legacy,
    Oracle,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Fdbscan,
        Algorithm::Densebox,
        Algorithm::Fof,
        Algorithm::Legacy,
        Algorithm::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Fdbscan => "fdbscan",
            Algorithm::Densebox => "densebox",
            Algorithm::Fof => "fof",
            Algorithm::Legacy => "legacy",
            Algorithm::Oracle => "oracle",
        }
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm '{s}'"))
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    File { path: PathBuf, format: Format },
    Generate(GenSpec),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EpsSource {
    Explicit(f64),
    Derived { b: f64, volume: f64, n: f64 },
}

impl EpsSource {
    pub fn resolve(self) -> Result<f32, CliError> {
        let eps = match self {
            EpsSource::Explicit(e) => e,
            EpsSource::Derived { b, volume, n } => derive_eps(b, volume, n)?,
        };
        let eps32 = eps as f32;
        if !(eps32.is_finite() && eps32 > 0.0) {
            return Err(CliError::Usage(format!(
                "eps must be positive and finite, got {eps}"
            )));
        }
        Ok(eps32)
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub source: Source,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub eps: EpsSource,
    pub min_pts: usize,
    pub code_width: CodeWidth,
    pub verify: bool,
    pub sequential: bool,
    pub labels_out: Option<PathBuf>,
    pub report_out: Option<PathBuf>,
    pub morton_report: bool,
    pub oracle_ceiling: usize,
}

impl RunConfig {
    pub fn new(source: Source, eps: EpsSource, min_pts: usize) -> Self {
        RunConfig {
            source,
            seed: 0,
            algorithm: Algorithm::default(),
            eps,
            min_pts,
            code_width: CodeWidth::W64,
            verify: false,
            sequential: false,
            labels_out: None,
            report_out: None,
            morton_report: false,
            oracle_ceiling: DEFAULT_ORACLE_CEILING,
        }
    }

    fn options(&self) -> DbscanOptions {
        DbscanOptions {
            execution: if self.sequential {
                Execution::Sequential
            } else {
                Execution::Parallel
            },
            code_width: self.code_width,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verification {
    Skipped,
    Passed,
    Failed,
}

impl Verification {
    fn as_str(self) -> &'static str {
        match self {
            Verification::Skipped => "skipped",
            Verification::Passed => "passed",
            Verification::Failed => "failed",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub n: usize,
    pub d: usize,
    pub eps: f32,
    pub min_pts: usize,
    pub algorithm: Algorithm,
    pub code_width: CodeWidth,
    pub sequential: bool,
    pub num_clusters: usize,
    pub num_noise: usize,
    pub num_core: usize,
    /// build, core detection, merge, finalize, total; milliseconds
    pub timings_ms: [f64; 5],
    pub verification: Verification,
    pub morton: Option<Vec<(CodeWidth, MortonStats)>>,
}

impl RunReport {
    /// The flat `key=value` report, one pair per line.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: &dyn fmt::Display| writeln!(s, "{k}={v}").unwrap();
        kv("n", &self.n);
        kv("d", &self.d);
        kv("eps", &self.eps);
        kv("min_pts", &self.min_pts);
        kv("algorithm", &self.algorithm);
        kv("code_width", &self.code_width.bits());
        kv(
            "execution",
            &if self.sequential {
                "sequential"
            } else {
                "parallel"
            },
        );
        kv("num_clusters", &self.num_clusters);
        kv("num_noise", &self.num_noise);
        kv("num_core", &self.num_core);
        let names = ["build", "core", "merge", "finalize", "total"];
        for (name, ms) in names.iter().zip(self.timings_ms) {
            kv(&format!("time_{name}_ms"), &format!("{ms:.3}"));
        }
        kv("verify", &self.verification.as_str());
        if let Some(rows) = &self.morton {
            for (w, st) in rows {
                let b = w.bits();
                kv(
                    &format!("morton{b}_codes_dup_gt3"),
                    &st.num_codes_duplicated_gt3,
                );
                kv(
                    &format!("morton{b}_points_dup"),
                    &st.num_points_with_duplicate_code,
                );
                kv(&format!("morton{b}_max_dup"), &st.max_same_code_duplicates);
            }
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "{} on {} points (d={}, eps={}, minPts={}): {} clusters, {} core, {} noise in {:.1} ms",
            self.algorithm,
            self.n,
            self.d,
            self.eps,
            self.min_pts,
            self.num_clusters,
            self.num_core,
            self.num_noise,
            self.timings_ms[4],
        );
        if self.verification != Verification::Skipped {
            write!(
                s,
                "\nverification against oracle: {}",
                self.verification.as_str()
            )
            .unwrap();
        }
        if let Some(rows) = &self.morton {
            s.push('\n');
            s.push_str(&format_morton_table(rows));
        }
        s
    }
}

/// Duplicate-code statistics of `points` at each width.
pub fn morton_report<const D: usize>(
    points: &[Point<D>],
    widths: &[CodeWidth],
) -> Vec<(CodeWidth, MortonStats)> {
    let scene = bounding_box(points);
    widths
        .iter()
        .map(|&w| {
            let codes: Vec<_> = points.iter().map(|p| point_code(p, &scene, w)).collect();
            (w, morton_stats(&codes))
        })
        .collect()
}

pub fn format_morton_table(rows: &[(CodeWidth, MortonStats)]) -> String {
    let mut s = format!(
        "{:>6} {:>18} {:>18} {:>14}\n",
        "width", "codes dup (>3)", "points dup", "max dup"
    );
    for (w, st) in rows {
        writeln!(
            s,
            "{:>6} {:>18} {:>18} {:>14}",
            w.bits(),
            st.num_codes_duplicated_gt3,
            st.num_points_with_duplicate_code,
            st.max_same_code_duplicates
        )
        .unwrap();
    }
    s
}

pub fn load_source(source: &Source, seed: u64) -> Result<PointCloud, CliError> {
    match source {
        Source::File { path, format } => load_points(path, *format),
        Source::Generate(spec) => Ok(spec.generate(seed)),
    }
}

/// Runs the configured algorithm and writes the requested outputs.
///
/// Outputs are written before the verification verdict is returned, so a
/// mismatch still leaves the labels and report on disk.
pub fn run(config: &RunConfig) -> Result<RunReport, CliError> {
    let cloud = load_source(&config.source, config.seed)?;
    run_on(config, &cloud)
}

pub fn run_on(config: &RunConfig, cloud: &PointCloud) -> Result<RunReport, CliError> {
    let eps = config.eps.resolve()?;
    let params =
        DbscanParams::new(eps, config.min_pts).map_err(|e| CliError::Usage(e.to_string()))?;
    if config.verify && cloud.len() > config.oracle_ceiling {
        return Err(CliError::Usage(format!(
            "--verify needs n <= {} (oracle ceiling), got {}",
            config.oracle_ceiling,
            cloud.len()
        )));
    }
    let (report, labels, mismatch) = match cloud.dim {
        2 => run_dim::<2>(config, &params, &cloud.to_points().unwrap())?,
        3 => run_dim::<3>(config, &params, &cloud.to_points().unwrap())?,
        d => {
            return Err(CliError::Usage(format!(
                "clustering supports 2 or 3 dimensions, got {d}"
            )))
        }
    };
    if let Some(path) = &config.labels_out {
        write_labels(path, &labels)?;
    }
    if let Some(path) = &config.report_out {
        fs::write(path, report.to_key_values()).map_err(|e| CliError::io(path, e))?;
    }
    match mismatch {
        Some(m) => Err(CliError::Verify(m)),
        None => Ok(report),
    }
}

fn run_dim<const D: usize>(
    config: &RunConfig,
    params: &DbscanParams,
    points: &[Point<D>],
) -> Result<(RunReport, Vec<Label>, Option<Mismatch>), CliError> {
    let options = config.options();
    let started = std::time::Instant::now();
    let out: DbscanOutput = match config.algorithm {
        Algorithm::Fdbscan => fdbscan(points, params, &options)?,
        Algorithm::Densebox => fdbscan_densebox(points, params, &options)?,
        Algorithm::Oracle => dsdbscan_oracle(points, params)?,
        Algorithm::Fof => fof_connected_components(points, params.eps, &options)?,
        Algorithm::Legacy => legacy_graph_dbscan(points, params.eps, &options, usize::MAX)?,
    };
    let elapsed = started.elapsed();
    if matches!(config.algorithm, Algorithm::Fof | Algorithm::Legacy) && params.min_pts != 2 {
        eprintln!(
            "note: {} ignores --minpts and clusters with minPts=2",
            config.algorithm
        );
    }
    let (mut verification, mut mismatch) = (Verification::Skipped, None);
    if config.verify {
        let oracle_params = match config.algorithm {
            Algorithm::Fof | Algorithm::Legacy => DbscanParams::new(params.eps, 2)?,
            _ => *params,
        };
        let reference = dsdbscan_oracle(points, &oracle_params)?;
        mismatch = check_equivalence(points, params.eps, &out, &reference).err();
        verification = if mismatch.is_some() {
            Verification::Failed
        } else {
            Verification::Passed
        };
    }
    let t = &out.timings;
    let ms = |d: std::time::Duration| d.as_secs_f64() * 1e3;
    let report = RunReport {
        n: points.len(),
        d: D,
        eps: params.eps,
        min_pts: match config.algorithm {
            Algorithm::Fof | Algorithm::Legacy => 2,
            _ => params.min_pts,
        },
        algorithm: config.algorithm,
        code_width: config.code_width,
        sequential: config.sequential,
        num_clusters: count_clusters(&out.labels),
        num_noise: out.num_noise(),
        num_core: out.num_core(),
        timings_ms: [
            ms(t.build),
            ms(t.core_detection),
            ms(t.merge),
            ms(t.finalize),
            ms(elapsed),
        ],
        verification,
        morton: config
            .morton_report
            .then(|| morton_report(points, &[CodeWidth::W32, CodeWidth::W64])),
    };
    Ok((report, out.labels, mismatch))
}

/// Number of distinct non-noise labels.
pub fn count_clusters(labels: &[Label]) -> usize {
    let mut ids: Vec<usize> = labels
        .iter()
        .filter_map(|l| match l {
            Label::Cluster(c) => Some(*c),
            Label::Noise => None,
        })
        .collect();
    ids.sort_unstable();
    ids.dedup();
    ids.len()
}

pub fn write_labels(path: &Path, labels: &[Label]) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    labels
        .iter()
        .try_for_each(|l| writeln!(w, "{}", l.as_i64()))
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}
