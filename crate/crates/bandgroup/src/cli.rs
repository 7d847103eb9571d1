//! Command-line interface.
//!
//! Exit status contract: 0 on success, 1 on usage errors (unknown flags, bad
//! values, violated static preconditions), 2 on data or computation errors.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{ArgGroup, Parser, Subcommand};
use serde::Serialize;

use crate::correlation::correlation_matrix;
use crate::cube::{DownsampleOperator, HsiCube, SyntheticSpec};
use crate::error::{Error, Result};
use crate::io_util::write_atomic;
use crate::kdpp::{exact_kdpp_pmf, sample_kdpp, BandSubset, SubsetRecord};
use crate::pipeline::{run_group_pipeline, PipelineConfig, DEFAULT_TAU};
use crate::sam::sam_matrix;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "bandgroup",
    version,
    about = "Diverse hyperspectral band selection via exact k-DPP sampling with SAM overlap resolution"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic HSIC cube with planted correlation clusters.
    Gen {
        #[arg(long, default_value_t = 32)]
        width: usize,
        #[arg(long, default_value_t = 32)]
        height: usize,
        /// Comma-separated band counts per cluster, e.g. 3,3.
        #[arg(long, value_delimiter = ',', required = true)]
        clusters: Vec<usize>,
        /// Intra-cluster shared-latent weight in (0, 1].
        #[arg(long, default_value_t = 0.95)]
        rho: f64,
        /// Additive noise scale.
        #[arg(long, default_value_t = 0.01)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output cube path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Reduce a cube's spatial resolution by box averaging.
    Downsample {
        #[arg(long)]
        input: PathBuf,
        /// Block size; must divide both width and height.
        #[arg(long)]
        factor: usize,
        /// Output cube path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the band correlation matrix; write corr.csv and corr.pgm.
    Correlate {
        #[arg(long)]
        input: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw one diverse band subset from the cube's correlation kernel.
    Sample {
        #[arg(long)]
        input: PathBuf,
        /// Subset size.
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output JSON path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full pipeline: correlation -> k-DPP -> SAM -> groups.
    Group {
        #[arg(long)]
        input: PathBuf,
        /// Diverse subset size.
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Overlap threshold in [0, 1].
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
        /// Include a rank-n factorization summary in the report; the bare
        /// flag uses rank 8.
        #[arg(long, num_args = 0..=1, default_missing_value = "8")]
        basis_rank: Option<usize>,
        /// Output directory for the five artifacts.
        #[arg(long)]
        out: PathBuf,
    },
    /// SAM matrix between chosen bands (rows) and all bands (columns), as CSV.
    #[command(group(ArgGroup::new("reps").required(true).args(["bands", "subset"])))]
    Sam {
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated band indices, e.g. 0,3,7.
        #[arg(long, value_delimiter = ',')]
        bands: Option<Vec<usize>>,
        /// Subset JSON produced by `sample`.
        #[arg(long)]
        subset: Option<PathBuf>,
        /// Output CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact k-DPP subset distribution (small cubes only), as JSON.
    Pmf {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        k: usize,
        /// Output JSON path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct PmfEntry {
    indices: Vec<usize>,
    probability: f64,
}

#[derive(Serialize)]
struct PmfRecord {
    n: usize,
    k: usize,
    kernel_hash: String,
    normalizer: f64,
    subsets: Vec<PmfEntry>,
}

/// Parse and run; returns the process exit status instead of exiting, so the
/// dispatcher is callable in-process.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return EXIT_OK;
        }
        Err(e) => {
            eprint!("{e}");
            return EXIT_USAGE;
        }
    };
    if let Err(message) = check_usage(&cli.command) {
        eprintln!("error: {message}");
        return EXIT_USAGE;
    }
    match run(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}

/// Static preconditions that make a command line invalid regardless of data.
fn check_usage(command: &Command) -> std::result::Result<(), String> {
    match command {
        Command::Sample { k, .. } | Command::Pmf { k, .. } if *k == 0 => {
            Err("--k must be at least 1".to_string())
        }
        Command::Group { k, .. } if *k == 0 => Err("--k must be at least 1".to_string()),
        Command::Group { tau, .. } if !(0.0..=1.0).contains(tau) => {
            Err(format!("--tau must lie in [0, 1], got {tau}"))
        }
        Command::Downsample { factor, .. } if *factor == 0 => {
            Err("--factor must be at least 1".to_string())
        }
        Command::Gen { rho, .. } if !(*rho > 0.0 && *rho <= 1.0) => {
            Err(format!("--rho must lie in (0, 1], got {rho}"))
        }
        Command::Gen { noise, .. } if *noise < 0.0 => {
            Err(format!("--noise must be >= 0, got {noise}"))
        }
        _ => Ok(()),
    }
}

fn emit(out: Option<&PathBuf>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, bytes),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn json_pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("value serializes");
    bytes.push(b'\n');
    bytes
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Gen {
            width,
            height,
            clusters,
            rho,
            noise,
            seed,
            out,
        } => {
            let spec = SyntheticSpec {
                width,
                height,
                cluster_sizes: clusters,
                intra_cluster_corr: rho,
                noise_sigma: noise,
                seed,
            };
            let cube = spec.generate()?;
            cube.save(&out)?;
            eprintln!(
                "wrote {}x{}x{} cube to {}",
                cube.width(),
                cube.height(),
                cube.bands(),
                out.display()
            );
            Ok(())
        }
        Command::Downsample { input, factor, out } => {
            let cube = HsiCube::load(&input)?;
            let low = cube.downsample(&DownsampleOperator::new(factor)?)?;
            low.save(&out)?;
            eprintln!(
                "wrote {}x{}x{} cube to {}",
                low.width(),
                low.height(),
                low.bands(),
                out.display()
            );
            Ok(())
        }
        Command::Correlate { input, out } => {
            let cube = HsiCube::load(&input)?;
            let r = correlation_matrix(&cube);
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            r.write_csv_file(out.join("corr.csv"))?;
            r.write_heatmap(out.join("corr.pgm"))?;
            eprintln!("wrote corr.csv and corr.pgm to {}", out.display());
            Ok(())
        }
        Command::Sample {
            input,
            k,
            seed,
            out,
        } => {
            let cube = HsiCube::load(&input)?;
            let kernel = correlation_matrix(&cube).to_kernel();
            let subset = sample_kdpp(&kernel, k, seed)?;
            let record = SubsetRecord::new(&subset, seed, &kernel);
            emit(out.as_ref(), &json_pretty(&record))
        }
        Command::Group {
            input,
            k,
            seed,
            tau,
            basis_rank,
            out,
        } => {
            let report = run_group_pipeline(&PipelineConfig {
                input,
                k,
                tau,
                seed,
                basis_rank,
                out_dir: out.clone(),
            })?;
            for t in &report.timings {
                eprintln!("stage {}: {:.3}s", t.stage, t.seconds);
            }
            eprintln!(
                "wrote report.json, groups.json, corr.csv, corr.pgm, sam.csv to {}",
                out.display()
            );
            Ok(())
        }
        Command::Sam {
            input,
            bands,
            subset,
            out,
        } => {
            let cube = HsiCube::load(&input)?;
            let indices = match (bands, subset) {
                (Some(list), None) => list,
                (None, Some(path)) => {
                    let text =
                        std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                    let record: SubsetRecord =
                        serde_json::from_str(&text).map_err(|source| Error::Json {
                            path: path.clone(),
                            source,
                        })?;
                    record.indices
                }
                _ => unreachable!("clap arg group enforces exactly one source"),
            };
            let reps = BandSubset::new(indices)?;
            let matrix = sam_matrix(&cube, &reps)?;
            emit(out.as_ref(), &matrix.csv_bytes())
        }
        Command::Pmf { input, k, out } => {
            let cube = HsiCube::load(&input)?;
            let kernel = correlation_matrix(&cube).to_kernel();
            let pmf = exact_kdpp_pmf(&kernel, k)?;
            let record = PmfRecord {
                n: pmf.n(),
                k: pmf.k(),
                kernel_hash: kernel.content_hash(),
                normalizer: pmf.normalizer(),
                subsets: pmf
                    .iter()
                    .map(|(indices, probability)| PmfEntry {
                        indices: indices.to_vec(),
                        probability,
                    })
                    .collect(),
            };
            emit(out.as_ref(), &json_pretty(&record))
        }
    }
}
