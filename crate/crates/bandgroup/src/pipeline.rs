//! End-to-end grouping pipeline: load a cube, build the correlation kernel,
//! draw the diverse band subset, resolve overlaps, and write the artifacts.
//!
//! Runs are reproducible: the tuple (input bytes, k, tau, seed, basis_rank)
//! fully determines every artifact byte. All outputs are staged to temp files
//! and renamed together, so a failed run leaves nothing behind. Stage timings
//! are kept in memory (and printed by the CLI) but never serialized, which
//! keeps reruns byte-identical.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::correlation::{correlation_matrix, factorize, reconstruct};
use crate::cube::HsiCube;
use crate::error::{Error, Result};
use crate::kdpp::{
    eigendecompose, inclusion_marginals, sample_kdpp, SubsetRecord, RNG_ALGORITHM,
};
use crate::sam::{assign_groups, detect_overlaps, sam_matrix, GroupAssignment};

/// Identifier written into every report.
pub const REPORT_FORMAT: &str = "bandgroup/1";

/// Default overlap threshold.
pub const DEFAULT_TAU: f64 = 0.9;

/// Default factorization rank for reports that ask for one.
pub const DEFAULT_BASIS_RANK: usize = 8;

/// Everything a `group` run needs.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// HSIC cube to read.
    pub input: PathBuf,
    /// Diverse subset size.
    pub k: usize,
    /// Overlap threshold in [0, 1].
    pub tau: f64,
    /// Sampling seed.
    pub seed: u64,
    /// Optional factorization rank to report on.
    pub basis_rank: Option<usize>,
    /// Directory receiving report.json, groups.json, corr.csv, corr.pgm, sam.csv.
    pub out_dir: PathBuf,
}

/// Wall-clock duration of one pipeline stage.
#[derive(Debug, Clone)]
pub struct StageTiming {
    pub stage: &'static str,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub input: String,
    pub k: usize,
    pub tau: f64,
    pub seed: u64,
    pub basis_rank: Option<usize>,
    pub rng: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CubeSummary {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrelationSummary {
    pub min_off_diagonal: f64,
    pub max_off_diagonal: f64,
    /// Smallest eigenvalue of R before kernel clamping.
    pub min_eigenvalue: f64,
    pub degenerate_bands: Vec<usize>,
}

/// One selected band with its exact k-DPP inclusion marginal, the
/// probability context for the draw.
#[derive(Debug, Clone, Serialize)]
pub struct BandMarginal {
    pub band: usize,
    pub marginal: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubsetReport {
    pub indices: Vec<usize>,
    pub kernel_hash: String,
    pub rng: String,
    pub selected: Vec<BandMarginal>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FactorizationSummary {
    pub rank: usize,
    /// Relative Frobenius reconstruction error at that rank.
    pub relative_error: f64,
}

/// The materialized pipeline output.
#[derive(Debug, Clone, Serialize)]
pub struct GroupingReport {
    pub format: String,
    pub config: ConfigEcho,
    pub cube: CubeSummary,
    pub correlation: CorrelationSummary,
    pub subset: SubsetReport,
    pub groups: BTreeMap<usize, Vec<usize>>,
    pub overlapping: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factorization: Option<FactorizationSummary>,
    /// Wall-clock stage timings; diagnostic only, never serialized.
    #[serde(skip)]
    pub timings: Vec<StageTiming>,
}

impl GroupingReport {
    pub fn to_json_bytes(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("report serializes");
        bytes.push(b'\n');
        bytes
    }
}

/// The standalone groups.json artifact.
#[derive(Debug, Clone, Serialize)]
struct GroupsFile<'a> {
    tau: f64,
    groups: &'a BTreeMap<usize, Vec<usize>>,
    overlapping: &'a [usize],
    seed: u64,
}

struct StageClock {
    timings: Vec<StageTiming>,
}

impl StageClock {
    fn new() -> Self {
        StageClock {
            timings: Vec::new(),
        }
    }

    fn run<T>(
        &mut self,
        stage: &'static str,
        f: impl FnOnce() -> Result<T>,
    ) -> Result<T> {
        let start = Instant::now();
        let out = f().map_err(Error::stage(stage))?;
        self.timings.push(StageTiming {
            stage,
            seconds: start.elapsed().as_secs_f64(),
        });
        Ok(out)
    }
}

fn groups_as_sorted_vecs(assignment: &GroupAssignment) -> BTreeMap<usize, Vec<usize>> {
    assignment
        .groups()
        .iter()
        .map(|(&rep, members)| (rep, members.iter().copied().collect()))
        .collect()
}

/// Execute the full grouping pipeline and write all artifacts.
///
/// Stage order is fixed: load, correlation, kernel, sample, sam, overlaps,
/// assign, optional factorization report, then a single atomic write of all
/// five artifacts. Any stage error aborts the run with a stage-tagged
/// diagnostic and no partial outputs.
pub fn run_group_pipeline(config: &PipelineConfig) -> Result<GroupingReport> {
    if !(0.0..=1.0).contains(&config.tau) {
        return Err(Error::InvalidThreshold { tau: config.tau });
    }
    let mut clock = StageClock::new();

    let cube = clock.run("load", || HsiCube::load(&config.input))?;
    if config.k == 0 || config.k > cube.bands() {
        return Err(Error::InvalidSubsetSize {
            k: config.k,
            n: cube.bands(),
        });
    }

    let correlation = clock.run("correlation", || Ok(correlation_matrix(&cube)))?;
    let kernel = clock.run("kernel", || Ok(correlation.to_kernel()))?;

    let (subset, marginals) = clock.run("sample", || {
        let subset = sample_kdpp(&kernel, config.k, config.seed)?;
        let eig = eigendecompose(&kernel)?;
        let marginals = inclusion_marginals(&eig, config.k)?;
        Ok((subset, marginals))
    })?;

    let sam = clock.run("sam", || sam_matrix(&cube, &subset))?;
    let overlaps = clock.run("overlaps", || {
        detect_overlaps(&correlation, &subset, config.tau)
    })?;
    let assignment = clock.run("assign", || {
        assign_groups(&cube, &correlation, &subset, config.tau)
    })?;
    debug_assert_eq!(&overlaps, assignment.overlapping());

    let factorization = match config.basis_rank {
        Some(rank) => Some(clock.run("factorize", || {
            let (basis, coeffs) = factorize(&cube, rank)?;
            let back = reconstruct(&basis, &coeffs)?;
            let mut err = 0.0;
            let mut scale = 0.0;
            for (a, b) in cube.data().iter().zip(back.data()) {
                err += (a - b) * (a - b);
                scale += a * a;
            }
            Ok(FactorizationSummary {
                rank,
                relative_error: if scale > 0.0 {
                    (err / scale).sqrt()
                } else {
                    0.0
                },
            })
        })?),
        None => None,
    };

    let (min_off, max_off) = correlation.off_diagonal_range();
    let record = SubsetRecord::new(&subset, config.seed, &kernel);
    let groups = groups_as_sorted_vecs(&assignment);
    let overlapping: Vec<usize> = assignment.overlapping().iter().copied().collect();

    let mut report = GroupingReport {
        format: REPORT_FORMAT.to_string(),
        config: ConfigEcho {
            input: config.input.display().to_string(),
            k: config.k,
            tau: config.tau,
            seed: config.seed,
            basis_rank: config.basis_rank,
            rng: RNG_ALGORITHM.to_string(),
        },
        cube: CubeSummary {
            width: cube.width(),
            height: cube.height(),
            bands: cube.bands(),
        },
        correlation: CorrelationSummary {
            min_off_diagonal: min_off,
            max_off_diagonal: max_off,
            min_eigenvalue: correlation.min_eigenvalue(),
            degenerate_bands: correlation.degenerate_bands().iter().copied().collect(),
        },
        subset: SubsetReport {
            indices: subset.indices().to_vec(),
            kernel_hash: record.kernel_hash,
            rng: record.rng,
            selected: subset
                .indices()
                .iter()
                .map(|&band| BandMarginal {
                    band,
                    marginal: marginals[band],
                })
                .collect(),
        },
        groups,
        overlapping,
        factorization,
        timings: Vec::new(),
    };

    clock.run("write", || {
        let groups_file = GroupsFile {
            tau: config.tau,
            groups: &report.groups,
            overlapping: &report.overlapping,
            seed: config.seed,
        };
        let mut groups_bytes =
            serde_json::to_vec_pretty(&groups_file).expect("groups serialize");
        groups_bytes.push(b'\n');
        let artifacts = [
            ("report.json", report.to_json_bytes()),
            ("groups.json", groups_bytes),
            ("corr.csv", correlation.csv_bytes()),
            ("corr.pgm", correlation.heatmap_bytes()),
            ("sam.csv", sam.csv_bytes()),
        ];
        commit_artifacts(&config.out_dir, &artifacts)
    })?;

    report.timings = clock.timings;
    Ok(report)
}

/// Names of the artifacts a `group` run writes.
pub const GROUP_ARTIFACTS: [&str; 5] = [
    "report.json",
    "groups.json",
    "corr.csv",
    "corr.pgm",
    "sam.csv",
];

/// Stage every artifact to a temp file, then rename all of them; roll back
/// already-renamed files if a late rename fails.
fn commit_artifacts(dir: &Path, artifacts: &[(&str, Vec<u8>)]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut staged = Vec::with_capacity(artifacts.len());
    for (name, bytes) in artifacts {
        let target = dir.join(name);
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(&target, e))?;
        tmp.write_all(bytes).map_err(|e| Error::io(&target, e))?;
        tmp.flush().map_err(|e| Error::io(&target, e))?;
        staged.push((tmp, target));
    }
    let mut committed: Vec<PathBuf> = Vec::with_capacity(staged.len());
    for (tmp, target) in staged {
        match tmp.persist(&target) {
            Ok(_) => {
                crate::io_util::widen_temp_permissions(&target)?;
                committed.push(target);
            }
            Err(e) => {
                for done in committed {
                    let _ = std::fs::remove_file(done);
                }
                return Err(Error::io(target, e.error));
            }
        }
    }
    Ok(())
}
