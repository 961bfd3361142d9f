//! The `signshape` command line.
//!
//! Every command writes one JSON object (or a CSV matrix with `--output csv`)
//! to standard output. Exit status is 0 on success, 1 on invalid input and 2
//! when a numerical routine fails to converge; diagnostics go to standard error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::eigenmap::{asymptotic_cov, phi};
use crate::error::{Error, Result};
use crate::geometry::{sample_kendall_tau, sample_sscm, Center, DataMatrix, MedianConfig};
use crate::inversemap::{estimate_shape, invert_phi, InversionConfig};
use crate::linalg::sym_eigen_desc;
use crate::oracle::{mc_sampling_distribution, pin_fixtures, render_fixtures, EllipticalSampler, Radial};
use crate::quadrature::QuadratureConfig;
use crate::spectrum::Spectrum;

/// Environment variable that caps the worker thread count.
pub const THREADS_ENV: &str = "SIGNSHAPE_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "signshape",
    version,
    about = "Spatial sign covariance estimation and eigenvalue maps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Tolerance of the spatial median (sscm, shape) or of the eigenvalue inversion (invmap, shape).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Relative tolerance of the quadrature.
    #[arg(long, global = true)]
    pub rel_tol: Option<f64>,
    /// Iteration cap of the spatial median or the inversion.
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte Carlo draws (pin-fixtures).
    #[arg(long, global = true)]
    pub draws: Option<usize>,
    /// Simulation replicates (simulate).
    #[arg(long, global = true)]
    pub replicates: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    pub output: OutputFormat,
    /// Input CSV files have no header row.
    #[arg(long, global = true)]
    pub no_header: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RadialArg {
    /// Gaussian data
    Chi,
    /// Points on the ellipsoid surface
    Constant,
    /// Radius 1 + |U_1|, dependent on direction
    Dependent,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample SSCM centred at the spatial median.
    Sscm { input: PathBuf },
    /// Spatial Kendall's tau matrix.
    Kendall { input: PathBuf },
    /// Trace-normalized shape matrix recovered from the SSCM.
    Shape { input: PathBuf },
    /// Map shape eigenvalues to SSCM eigenvalues.
    Map {
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        lambdas: Vec<f64>,
    },
    /// Map SSCM eigenvalues back to shape eigenvalues.
    Invmap {
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        deltas: Vec<f64>,
    },
    /// Gamma and the asymptotic covariance W_S of the sample SSCM.
    Asymcov {
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        lambdas: Vec<f64>,
        /// CSV file with the p x p orthogonal eigenvector matrix (identity if omitted).
        #[arg(long)]
        eigvecs: Option<PathBuf>,
    },
    /// Monte Carlo sampling distribution of the SSCM at a diagonal shape matrix.
    Simulate {
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        lambdas: Vec<f64>,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, value_enum, default_value_t = RadialArg::Chi)]
        radial: RadialArg,
    },
    /// Regenerate the Monte Carlo reference fixtures.
    PinFixtures {
        /// Write the fixtures here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Invalid(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_) => Failure::Invalid(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

/// Result of a command: the payload plus an optional convergence warning
/// that turns the exit status into 2.
struct Output {
    json: Value,
    csv: String,
    nonconverged: Option<String>,
}

/// Caps rayon's global pool from `SIGNSHAPE_THREADS` (first call wins).
pub fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 {
                write!(stdout, "{rendered}")
            } else {
                write!(stderr, "{rendered}")
            };
            return code;
        }
    };
    configure_threads();
    match execute(&cli, stderr) {
        Ok(out) => {
            let text = match cli.output {
                OutputFormat::Json => format!("{}\n", out.json),
                OutputFormat::Csv => out.csv,
            };
            let _ = stdout.write_all(text.as_bytes());
            match out.nonconverged {
                Some(msg) => {
                    let _ = writeln!(stderr, "error: {msg}");
                    2
                }
                None => 0,
            }
        }
        Err(Failure::Invalid(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            1
        }
        Err(Failure::Numerical(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            2
        }
    }
}

fn quad_config(cli: &Cli) -> QuadratureConfig {
    let mut cfg = QuadratureConfig::default();
    if let Some(r) = cli.rel_tol {
        cfg.rel_tol = r;
    }
    cfg
}

fn median_config(cli: &Cli) -> MedianConfig {
    let d = MedianConfig::default();
    MedianConfig {
        tol: cli.tol.unwrap_or(d.tol),
        max_iter: cli.max_iter.unwrap_or(d.max_iter),
    }
}

fn inversion_config(cli: &Cli) -> InversionConfig {
    let d = InversionConfig::default();
    InversionConfig {
        tol: cli.tol.unwrap_or(d.tol),
        max_iter: cli.max_iter.unwrap_or(d.max_iter),
        ..d
    }
}

/// Reads a numeric CSV: rows are observations, columns are variables.
pub fn read_csv_matrix(path: &Path, has_header: bool, stderr: &mut dyn Write) -> Result<DataMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    if has_header {
        let header = reader
            .headers()
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
        if !header.is_empty() && header.iter().all(|h| h.parse::<f64>().is_ok()) {
            let _ = writeln!(
                stderr,
                "warning: first row of {} is numeric but is read as a header (pass --no-header to keep it)",
                path.display()
            );
        }
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(j, cell)| {
                cell.parse::<f64>().map_err(|_| {
                    Error::InvalidInput(format!(
                        "{}: non-numeric cell {cell:?} in data row {}, column {}",
                        path.display(),
                        i + 1,
                        j + 1
                    ))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput(format!("{} contains no data rows", path.display())));
    }
    DataMatrix::from_rows(&rows)
}

fn inline_spectrum(values: &[f64], name: &str, stderr: &mut dyn Write) -> Result<Spectrum> {
    let (s, reordered) = Spectrum::from_unsorted(values.to_vec())?;
    if reordered {
        let _ = writeln!(stderr, "warning: --{name} reordered into descending order");
    }
    Ok(s)
}

fn matrix_json(m: &DMatrix<f64>) -> Value {
    Value::from(
        m.row_iter()
            .map(|r| r.iter().copied().collect::<Vec<f64>>())
            .collect::<Vec<_>>(),
    )
}

fn csv_row(values: &[f64]) -> String {
    let mut s = values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
    s.push('\n');
    s
}

fn matrix_csv(m: &DMatrix<f64>) -> String {
    m.row_iter()
        .map(|r| csv_row(&r.iter().copied().collect::<Vec<f64>>()))
        .collect()
}

fn quad_json(cfg: &QuadratureConfig) -> Value {
    json!({
        "rel_tol": cfg.rel_tol,
        "abs_tol": cfg.abs_tol,
        "max_subdivisions": cfg.max_subdivisions,
    })
}

fn execute(cli: &Cli, stderr: &mut dyn Write) -> std::result::Result<Output, Failure> {
    let qcfg = quad_config(cli);
    qcfg.validate()?;
    let has_header = !cli.no_header;
    match &cli.command {
        Command::Sscm { input } => {
            let data = read_csv_matrix(input, has_header, stderr)?;
            let mcfg = median_config(cli);
            let est = sample_sscm(&data, &Center::SpatialMedian(mcfg))?;
            let median = est.median.clone().expect("median computed internally");
            let nonconverged = (!median.converged).then(|| {
                format!(
                    "spatial median did not converge (residual gradient norm {:.3e})",
                    median.residual_gradient_norm
                )
            });
            Ok(Output {
                json: json!({
                    "kind": "sscm",
                    "matrix": matrix_json(&est.matrix),
                    "center": median.location,
                    "metadata": {
                        "n": data.n(),
                        "p": data.p(),
                        "nonzero_signs": est.nonzero_terms,
                        "trace": est.matrix.trace(),
                        "median": {
                            "converged": median.converged,
                            "iterations": median.iterations,
                            "residual_gradient_norm": median.residual_gradient_norm,
                            "tol": mcfg.tol,
                            "max_iter": mcfg.max_iter,
                        },
                    },
                }),
                csv: matrix_csv(&est.matrix),
                nonconverged,
            })
        }
        Command::Kendall { input } => {
            let data = read_csv_matrix(input, has_header, stderr)?;
            let est = sample_kendall_tau(&data)?;
            Ok(Output {
                json: json!({
                    "kind": "kendall_tau",
                    "matrix": matrix_json(&est.matrix),
                    "metadata": {
                        "n": data.n(),
                        "p": data.p(),
                        "pairs": est.total_terms,
                        "nonzero_pairs": est.nonzero_terms,
                        "trace": est.matrix.trace(),
                    },
                }),
                csv: matrix_csv(&est.matrix),
                nonconverged: None,
            })
        }
        Command::Shape { input } => {
            let data = read_csv_matrix(input, has_header, stderr)?;
            let mcfg = median_config(cli);
            let icfg = inversion_config(cli);
            let sscm = sample_sscm(&data, &Center::SpatialMedian(mcfg))?;
            let (est, nonconverged) = match estimate_shape(&sscm, &icfg, &qcfg) {
                Ok(est) => (est, None),
                Err(Error::InversionFailed(partial)) => {
                    let msg = format!(
                        "eigenvalue inversion did not converge (residual {:.3e})",
                        partial.inversion.residual
                    );
                    (*partial, Some(msg))
                }
                Err(e) => return Err(e.into()),
            };
            if est.clamped {
                let _ = writeln!(stderr, "warning: negative SSCM eigenvalues clamped to zero");
            }
            let median = sscm.median.clone().expect("median computed internally");
            Ok(Output {
                json: json!({
                    "shape": matrix_json(&est.matrix),
                    "lambda": est.inversion.lambda.values(),
                    "delta": est.delta.values(),
                    "eigenvectors": matrix_json(&est.eigenvectors),
                    "sscm": matrix_json(&sscm.matrix),
                    "converged": est.inversion.converged,
                    "metadata": {
                        "n": data.n(),
                        "p": data.p(),
                        "iterations": est.inversion.iterations,
                        "residual": est.inversion.residual,
                        "tol": icfg.tol,
                        "max_iter": icfg.max_iter,
                        "clamped": est.clamped,
                        "quadrature": quad_json(&qcfg),
                        "median": {
                            "converged": median.converged,
                            "iterations": median.iterations,
                            "residual_gradient_norm": median.residual_gradient_norm,
                        },
                    },
                }),
                csv: matrix_csv(&est.matrix),
                nonconverged,
            })
        }
        Command::Map { lambdas } => {
            let lambda = inline_spectrum(lambdas, "lambdas", stderr)?;
            let delta = phi(&lambda, &qcfg)?;
            Ok(Output {
                json: json!({
                    "lambda": lambda.values(),
                    "delta": delta.values(),
                    "metadata": { "p": lambda.len(), "quadrature": quad_json(&qcfg) },
                }),
                csv: csv_row(delta.values()),
                nonconverged: None,
            })
        }
        Command::Invmap { deltas } => {
            let delta = inline_spectrum(deltas, "deltas", stderr)?;
            let icfg = inversion_config(cli);
            let r = invert_phi(&delta, &icfg, &qcfg)?;
            let nonconverged =
                (!r.converged).then(|| format!("eigenvalue inversion did not converge (residual {:.3e})", r.residual));
            Ok(Output {
                json: json!({
                    "delta": delta.values(),
                    "lambda": r.lambda.values(),
                    "converged": r.converged,
                    "iterations": r.iterations,
                    "residual": r.residual,
                    "metadata": {
                        "p": delta.len(),
                        "tol": icfg.tol,
                        "max_iter": icfg.max_iter,
                        "quadrature": quad_json(&qcfg),
                    },
                }),
                csv: csv_row(r.lambda.values()),
                nonconverged,
            })
        }
        Command::Asymcov { lambdas, eigvecs } => {
            let lambda = inline_spectrum(lambdas, "lambdas", stderr)?;
            let p = lambda.len();
            let o = match eigvecs {
                Some(path) => read_csv_matrix(path, has_header, stderr)?.to_dmatrix(),
                None => DMatrix::identity(p, p),
            };
            let a = asymptotic_cov(&o, &lambda, &qcfg)?;
            Ok(Output {
                json: json!({
                    "lambda": lambda.values(),
                    "delta": a.delta.values(),
                    "eigenvectors": matrix_json(&a.eigenvectors),
                    "gamma": matrix_json(&a.gamma),
                    "w": matrix_json(&a.w),
                    "metadata": { "p": p, "vec_order": "column-major", "quadrature": quad_json(&qcfg) },
                }),
                csv: matrix_csv(&a.w),
                nonconverged: None,
            })
        }
        Command::Simulate { lambdas, n, radial } => {
            let lambda = inline_spectrum(lambdas, "lambdas", stderr)?;
            let seed = cli.seed.unwrap_or(1);
            let replicates = cli.replicates.unwrap_or(200);
            let radial_law = match radial {
                RadialArg::Chi => Radial::Chi,
                RadialArg::Constant => Radial::Constant(1.0),
                RadialArg::Dependent => Radial::OnePlusAbsFirst,
            };
            let sampler = EllipticalSampler::diagonal(lambda.values(), radial_law, seed)?;
            let summary = mc_sampling_distribution(&sampler, *n, replicates)?;
            let (mean_eig, _) = sym_eigen_desc(&summary.mean_sscm);
            let delta = phi(&lambda, &qcfg)?;
            Ok(Output {
                json: json!({
                    "lambda": lambda.values(),
                    "delta_theory": delta.values(),
                    "mean_sscm": matrix_json(&summary.mean_sscm),
                    "mean_sscm_eigenvalues": mean_eig,
                    "emp_cov": matrix_json(&summary.emp_cov),
                    "emp_cov_se": matrix_json(&summary.emp_cov_se),
                    "metadata": {
                        "n": n,
                        "p": lambda.len(),
                        "replicates": replicates,
                        "seed": seed,
                        "radial": format!("{radial:?}").to_lowercase(),
                        "vec_order": "column-major",
                    },
                }),
                csv: matrix_csv(&summary.emp_cov),
                nonconverged: None,
            })
        }
        Command::PinFixtures { out } => {
            let draws = cli.draws.unwrap_or(10_000_000);
            let fixtures = pin_fixtures(draws)?;
            let text = render_fixtures(&fixtures);
            match out {
                Some(path) => {
                    fs::write(path, &text)
                        .map_err(|e| Failure::Invalid(format!("cannot write {}: {e}", path.display())))?;
                    let json = json!({
                        "written": path.display().to_string(),
                        "scenarios": fixtures.len(),
                        "draws": draws,
                    });
                    Ok(Output {
                        csv: format!("{}\n", path.display()),
                        json,
                        nonconverged: None,
                    })
                }
                None => Ok(Output {
                    json: Value::String(text.clone()),
                    csv: text,
                    nonconverged: None,
                }),
            }
        }
    }
}
