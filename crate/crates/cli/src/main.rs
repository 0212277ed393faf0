mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use curvgrf::covariance::CovarianceBundle;
use curvgrf::curvature::{principal_curvatures_scaled, sample_curvatures};
use curvgrf::fieldgrid::{sample_field_curvatures, synthesize};
use curvgrf::matops::{commutation_matrix, dim_from_vech_len, dup_pinv, duplication_matrix};
use curvgrf::validate::run_full_validation;
use curvgrf::{DensitySpec, JetSampler, PointJet, Profile, ValidationConfig};
use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

use config::{pick, ConfigError, FileConfig, ModelArgs};
use output::{fmt, matrix_rows, Out};

/// Principal curvatures of isosurfaces in isotropic Gaussian random fields.
#[derive(Debug, Parser)]
#[command(name = "curvgrf", version, about)]
struct Cli {
    /// Worker threads [default: available cores]
    #[arg(long, global = true, env = "CURVGRF_THREADS")]
    threads: Option<usize>,
    /// Plain-text `key = value` file; flags take precedence over it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OpsMatrix {
    /// Commutation matrix C_n
    Commutation,
    /// Duplication matrix D_n
    Duplication,
    /// Moore-Penrose inverse of D_n
    DupPinv,
    /// D_n D_n^+ - (I + C_n)/2, which should vanish
    IdentityResidual,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PdfKind {
    /// Joint density of the n - 1 principal curvatures
    Curvature,
    /// Joint density of the n Hessian eigenvalues
    Eig,
    /// Density of the gradient norm
    Gradnorm,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a vec/vech operator matrix as CSV
    Ops {
        /// Matrix dimension n [default: 2]
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_enum)]
        matrix: OpsMatrix,
        /// Output file [default: stdout]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the lag-zero derivative covariances as JSON
    Bundle {
        /// Field dimension [default: 2]
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        model: ModelArgs,
        /// Output file [default: stdout]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample gradient/Hessian jets; CSV columns g_1..g_n then vech(H)
    SampleJets {
        /// Field dimension [default: 2]
        #[arg(long)]
        n: Option<usize>,
        /// Number of jets [default: 10000]
        #[arg(long)]
        count: Option<usize>,
        /// Random seed [default: 42]
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        model: ModelArgs,
        /// Output file [default: stdout]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Principal curvatures of sampled jets, or of jets read from a CSV
    Curvature {
        /// Jets CSV as written by sample-jets; sampled afresh when absent
        #[arg(long)]
        jets: Option<PathBuf>,
        /// Field dimension when sampling [default: 2]
        #[arg(long)]
        n: Option<usize>,
        /// Number of jets when sampling [default: 10000]
        #[arg(long)]
        count: Option<usize>,
        /// Random seed when sampling [default: 42]
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        model: ModelArgs,
        /// Output file [default: stdout]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate a closed-form density on a tensor grid
    Pdf {
        #[arg(long, value_enum)]
        which: PdfKind,
        /// Field dimension [default: 2]
        #[arg(long)]
        n: Option<usize>,
        /// Grid per axis as `start:stop:points`
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        #[command(flatten)]
        model: ModelArgs,
        /// Output file [default: stdout]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesise periodic field realisations and pool their curvatures
    SampleField {
        /// Field dimension, 2 or 3 [default: 2]
        #[arg(long)]
        n: Option<usize>,
        /// Grid points per axis
        #[arg(long, default_value_t = 256)]
        shape: usize,
        /// Grid spacing
        #[arg(long, default_value_t = 0.125)]
        spacing: f64,
        /// Number of independent realisations
        #[arg(long, default_value_t = 20)]
        reals: usize,
        /// Random seed; realisation r uses seed + r [default: 42]
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        model: ModelArgs,
        /// Curvature CSV [default: stdout]
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also dump realisation 0 to PREFIX.bin (little-endian f64) and PREFIX.json
        #[arg(long, value_name = "PREFIX")]
        raw: Option<PathBuf>,
    },
    /// Run the validation suite and write a JSON report; exit 1 if any check fails
    Validate {
        #[arg(long, value_enum, default_value = "full")]
        profile: ProfileArg,
        /// Random seed [default: 42]
        #[arg(long)]
        seed: Option<u64>,
        /// Report file [default: stdout]
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProfileArg {
    Fast,
    Full,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] curvgrf::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("validation failed: {0} check(s) did not pass")]
    ChecksFailed(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Model(_) => 2,
            CliError::Io(_) | CliError::Csv(_) | CliError::ChecksFailed(_) => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.exit_code() == 2 {
                eprintln!("run `curvgrf --help` for usage");
            }
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let threads: Option<usize> = match cli.threads {
        Some(t) => Some(t),
        None => file.get("threads")?,
    };
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let out_path = |flag: &Option<PathBuf>| -> Result<Option<PathBuf>> {
        Ok(match flag {
            Some(p) => Some(p.clone()),
            None => file.get::<PathBuf>("out")?,
        })
    };
    let dim = |flag: Option<usize>| -> Result<usize> {
        let n = pick(flag, &file, "n", 2)?;
        if n == 0 {
            return Err(CliError::Usage("--n must be at least 1".into()));
        }
        Ok(n)
    };

    match cli.command {
        Command::Ops { n, matrix, out } => {
            let n = dim(n)?;
            let m = match matrix {
                OpsMatrix::Commutation => commutation_matrix(n),
                OpsMatrix::Duplication => duplication_matrix(n),
                OpsMatrix::DupPinv => dup_pinv(n),
                OpsMatrix::IdentityResidual => {
                    let nn = n * n;
                    duplication_matrix(n) * dup_pinv(n) - (DMatrix::identity(nn, nn) + commutation_matrix(n)) * 0.5
                }
            };
            let mut w = Out::csv(out_path(&out)?)?;
            let header: Vec<String> = (1..=m.ncols()).map(|j| format!("col_{j}")).collect();
            w.write_record(&header)?;
            for row in matrix_rows(&m) {
                w.write_record(row.iter().map(|v| fmt(*v)))?;
            }
            w.flush()?;
        }
        Command::Bundle { n, model, out } => {
            let n = dim(n)?;
            let model = model.resolve(&file)?;
            let b = CovarianceBundle::build(n, model.constants()?);
            let json = serde_json::json!({
                "n": n,
                "model": model,
                "constants": b.consts,
                "grad_cov": matrix_rows(&b.grad_cov),
                "hess_cov": matrix_rows(&b.hess_cov),
                "sigma_n": matrix_rows(&b.sigma_n),
                "sigma_tilde": matrix_rows(&b.sigma_tilde),
                "sigma_det": b.sigma_det,
            });
            Out::write_text(out_path(&out)?, &serde_json::to_string_pretty(&json).expect("json"))?;
        }
        Command::SampleJets { n, count, seed, model, out } => {
            let n = dim(n)?;
            let count = pick(count, &file, "count", 10_000)?;
            let seed = pick(seed, &file, "seed", 42)?;
            let sampler = JetSampler::new(n, model.resolve(&file)?.constants()?, seed);
            let mut w = Out::csv(out_path(&out)?)?;
            w.write_record(jet_header(n))?;
            // bounded batches keep memory flat for large counts
            const BATCH: usize = 1 << 16;
            let mut start = 0;
            while start < count {
                let len = BATCH.min(count - start);
                for j in sampler.jets(start as u64, len) {
                    w.write_record(j.flat().iter().map(|v| fmt(*v)))?;
                }
                start += len;
            }
            w.flush()?;
        }
        Command::Curvature { jets, n, count, seed, model, out } => {
            let (kappas, n, skipped) = match jets {
                Some(path) => {
                    let jets = read_jets(&path)?;
                    let n =
                        jets.first().map(PointJet::dim).ok_or_else(|| CliError::Usage("jets file is empty".into()))?;
                    if n < 2 {
                        return Err(CliError::Usage("curvatures need n >= 2".into()));
                    }
                    let model = model.resolve(&file)?;
                    let scale = model.constants()?.grad_variance().sqrt();
                    let all: Vec<Option<Vec<f64>>> =
                        jets.par_iter().map(|j| principal_curvatures_scaled(j, scale).ok().map(|c| c.kappas)).collect();
                    let skipped = all.iter().filter(|k| k.is_none()).count();
                    (all.into_iter().flatten().collect::<Vec<_>>(), n, skipped)
                }
                None => {
                    let n = dim(n)?;
                    if n < 2 {
                        return Err(CliError::Usage("curvatures need n >= 2".into()));
                    }
                    let count = pick(count, &file, "count", 10_000)?;
                    let seed = pick(seed, &file, "seed", 42)?;
                    let sampler = JetSampler::new(n, model.resolve(&file)?.constants()?, seed);
                    let (samples, skipped) = sample_curvatures(&sampler, count);
                    (samples.into_iter().map(|s| s.kappas).collect(), n, skipped)
                }
            };
            if skipped > 0 {
                eprintln!("skipped {skipped} jet(s) with degenerate gradient");
            }
            write_kappas(out_path(&out)?, n, &kappas)?;
        }
        Command::Pdf { which, n, grid, model, out } => {
            let n = dim(n)?;
            let axis = parse_grid(&grid)?;
            let spec = DensitySpec::new(n, model.resolve(&file)?.constants()?);
            let (names, arity): (Vec<String>, usize) = match which {
                PdfKind::Curvature => {
                    if n < 2 {
                        return Err(CliError::Usage("curvature density needs n >= 2".into()));
                    }
                    ((1..n).map(|i| format!("kappa_{i}")).collect(), n - 1)
                }
                PdfKind::Eig => ((1..=n).map(|i| format!("lambda_{i}")).collect(), n),
                PdfKind::Gradnorm => {
                    if axis[0] < 0.0 {
                        return Err(CliError::Usage("gradient norm grid must start at >= 0".into()));
                    }
                    (vec!["u".into()], 1)
                }
            };
            let rows = (axis.len() as f64).powi(arity as i32);
            if rows > 1e7 {
                return Err(CliError::Usage(format!("grid would have {rows:.0} rows; the limit is 1e7")));
            }
            let points = tensor_grid(&axis, arity);
            let values: Vec<f64> = points
                .par_iter()
                .map(|p| match which {
                    PdfKind::Curvature => Ok(spec.curvature_pdf(p)),
                    PdfKind::Eig => Ok(spec.eig_pdf(p)),
                    PdfKind::Gradnorm => spec.gradnorm_pdf(p[0]),
                })
                .collect::<std::result::Result<_, _>>()?;
            let mut w = Out::csv(out_path(&out)?)?;
            let mut header = names;
            header.push("pdf".into());
            w.write_record(&header)?;
            for (p, v) in points.iter().zip(values) {
                w.write_record(p.iter().chain(std::iter::once(&v)).map(|x| fmt(*x)))?;
            }
            w.flush()?;
        }
        Command::SampleField { n, shape, spacing, reals, seed, model, out, raw } => {
            let n = dim(n)?;
            if !(2..=3).contains(&n) {
                return Err(CliError::Usage("sample-field supports n = 2 or 3".into()));
            }
            if reals == 0 {
                return Err(CliError::Usage("--reals must be at least 1".into()));
            }
            let seed = pick(seed, &file, "seed", 42)?;
            let model = model.resolve(&file)?;
            let dims = vec![shape; n];
            let (kappas, skipped) = sample_field_curvatures(&model, &dims, spacing, reals, seed)?;
            if skipped > 0 {
                eprintln!("skipped {skipped} grid point(s) with degenerate gradient");
            }
            write_kappas(out_path(&out)?, n, &kappas)?;
            if let Some(prefix) = raw {
                let grid = synthesize(&model, &dims, spacing, seed)?;
                std::fs::write(prefix.with_extension("bin"), grid.raw_bytes())?;
                let header = serde_json::to_string_pretty(&grid.raw_header()).expect("json");
                std::fs::write(prefix.with_extension("json"), header + "\n")?;
            }
        }
        Command::Validate { profile, seed, out } => {
            let profile = match profile {
                ProfileArg::Fast => Profile::Fast,
                ProfileArg::Full => Profile::Full,
            };
            let seed = pick(seed, &file, "seed", 42)?;
            let report = run_full_validation(&ValidationConfig { profile, seed });
            for c in &report.checks {
                let stat = c.statistic.map(fmt).unwrap_or_else(|| "n/a".into());
                eprintln!(
                    "{} {} statistic={} threshold={}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    stat,
                    fmt(c.threshold)
                );
            }
            Out::write_text(out_path(&out)?, &report.to_json())?;
            let failed = report.failures().count();
            if failed > 0 {
                return Err(CliError::ChecksFailed(failed));
            }
        }
    }
    Ok(())
}

fn jet_header(n: usize) -> Vec<String> {
    let mut h: Vec<String> = (1..=n).map(|i| format!("g_{i}")).collect();
    for j in 1..=n {
        for i in j..=n {
            h.push(format!("h_{i}{j}"));
        }
    }
    h
}

fn read_jets(path: &std::path::Path) -> Result<Vec<PointJet>> {
    let mut r = csv::Reader::from_path(path)?;
    let cols = r.headers()?.len();
    let n = (1..=64)
        .find(|&n| n + n * (n + 1) / 2 == cols && dim_from_vech_len(cols - n) == Some(n))
        .ok_or_else(|| CliError::Usage(format!("{}: {cols} columns is not a jet layout", path.display())))?;
    let mut jets = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        jets.push(PointJet::from_vech(&vals[..n], &vals[n..])?);
    }
    Ok(jets)
}

fn write_kappas(out: Option<PathBuf>, n: usize, kappas: &[Vec<f64>]) -> Result<()> {
    let mut w = Out::csv(out)?;
    let header: Vec<String> = (1..n).map(|i| format!("kappa_{i}")).collect();
    w.write_record(&header)?;
    for k in kappas {
        w.write_record(k.iter().map(|v| fmt(*v)))?;
    }
    w.flush()?;
    Ok(())
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || CliError::Usage(format!("--grid expects start:stop:points, got `{spec}`"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, k] = parts.as_slice() else {
        return Err(bad());
    };
    let a: f64 = a.parse().map_err(|_| bad())?;
    let b: f64 = b.parse().map_err(|_| bad())?;
    let k: usize = k.parse().map_err(|_| bad())?;
    if k < 2 || b <= a || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    Ok((0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect())
}

// Every point of axis^arity, first coordinate varying slowest.
fn tensor_grid(axis: &[f64], arity: usize) -> Vec<Vec<f64>> {
    let mut points: Vec<Vec<f64>> = vec![Vec::new()];
    for _ in 0..arity {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    points
}
