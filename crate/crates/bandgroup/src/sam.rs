//! Spectral Angle Mapper values and the overlap-resolution grouping rule.
//!
//! SAM between two band vectors is the arccosine of their cosine similarity,
//! computed on raw (not mean-centered) samples, so it is invariant under
//! positive scaling. Grouping assigns every band to one k-DPP representative:
//! bands correlated with several representatives above the threshold tau are
//! "overlapping" and resolved by the lowest SAM; everything else follows the
//! strongest absolute correlation.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::correlation::CorrelationMatrix;
use crate::cube::{BandVector, HsiCube};
use crate::error::{Error, Result};
use crate::io_util::{fmt_g17, write_atomic};
use crate::kdpp::BandSubset;

/// Ties between representatives (equal score within this slack) break toward
/// the smaller band index.
const TIE_EPSILON: f64 = 1e-12;

fn angle_slices(a: &[f64], b: &[f64]) -> std::result::Result<f64, &'static str> {
    debug_assert_eq!(a.len(), b.len());
    let mut na = 0.0;
    let mut nb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 {
        return Err("first");
    }
    if nb == 0.0 {
        return Err("second");
    }
    let (na, nb) = (na.sqrt(), nb.sqrt());
    // arccos(dot/(|a||b|)) evaluated as 2*atan2(|u-v|, |u+v|) on the unit
    // vectors: same value, stays in [0, pi] without clamping, and keeps full
    // precision where the arccos form loses half its digits (angles near 0
    // and pi).
    let mut diff = 0.0;
    let mut sum = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let u = x / na;
        let v = y / nb;
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    Ok(2.0 * diff.sqrt().atan2(sum.sqrt()))
}

/// Spectral angle between two band vectors, in radians in [0, pi].
pub fn sam(v1: &BandVector, v2: &BandVector) -> Result<f64> {
    if v1.len() != v2.len() {
        return Err(Error::ShapeMismatch {
            context: "sam",
            expected: format!("{} samples", v1.len()),
            found: format!("{} samples", v2.len()),
        });
    }
    angle_slices(v1.values(), v2.values()).map_err(|argument| Error::ZeroNormVector { argument })
}

/// SAM values between each representative band (rows) and every band of the
/// cube (columns). The entry where a representative meets its own column is
/// NaN: the angle of a band with itself carries no information here.
#[derive(Debug, Clone)]
pub struct SamMatrix {
    representatives: Vec<usize>,
    bands: usize,
    values: Vec<f64>,
}

impl SamMatrix {
    pub fn representatives(&self) -> &[usize] {
        &self.representatives
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    /// Value at (row, column); NaN on the representative's own column.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        assert!(row < self.representatives.len() && col < self.bands);
        self.values[row * self.bands + col]
    }

    /// False exactly where the representative index equals the column.
    pub fn is_defined(&self, row: usize, col: usize) -> bool {
        !self.get(row, col).is_nan()
    }

    /// CSV rows in representative order, `nan` literals for undefined entries.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for row in 0..self.representatives.len() {
            for col in 0..self.bands {
                if col > 0 {
                    out.write_all(b",")?;
                }
                out.write_all(fmt_g17(self.get(row, col)).as_bytes())?;
            }
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn csv_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        buf
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.csv_bytes())
    }
}

/// SAM of every (representative, band) pair of the cube.
pub fn sam_matrix(cube: &HsiCube, diverse_set: &BandSubset) -> Result<SamMatrix> {
    let n = cube.bands();
    for &rep in diverse_set.indices() {
        if rep >= n {
            return Err(Error::BandIndexOutOfRange {
                index: rep,
                bands: n,
            });
        }
    }
    let reps = diverse_set.indices().to_vec();
    let mut values = Vec::with_capacity(reps.len() * n);
    for &rep in &reps {
        for col in 0..n {
            if rep == col {
                values.push(f64::NAN);
            } else {
                let angle = angle_slices(cube.plane(rep), cube.plane(col)).map_err(|side| {
                    Error::ZeroNormBand {
                        band: if side == "first" { rep } else { col },
                    }
                })?;
                values.push(angle);
            }
        }
    }
    Ok(SamMatrix {
        representatives: reps,
        bands: n,
        values,
    })
}

/// Bands whose absolute correlation reaches `tau` with at least two distinct
/// representatives. Representatives themselves are never overlapping.
pub fn detect_overlaps(
    correlation: &CorrelationMatrix,
    representatives: &BandSubset,
    tau: f64,
) -> Result<BTreeSet<usize>> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidThreshold { tau });
    }
    let n = correlation.size();
    for &rep in representatives.indices() {
        if rep >= n {
            return Err(Error::BandIndexOutOfRange {
                index: rep,
                bands: n,
            });
        }
    }
    let mut out = BTreeSet::new();
    for band in 0..n {
        if representatives.contains(band) {
            continue;
        }
        let hits = representatives
            .indices()
            .iter()
            .filter(|&&rep| correlation.get(band, rep).abs() >= tau)
            .count();
        if hits >= 2 {
            out.insert(band);
        }
    }
    Ok(out)
}

/// A disjoint partition of all bands keyed by representative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAssignment {
    tau: f64,
    groups: BTreeMap<usize, BTreeSet<usize>>,
    overlapping: BTreeSet<usize>,
}

impl GroupAssignment {
    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Representative -> members (each representative is a member of its own
    /// group).
    pub fn groups(&self) -> &BTreeMap<usize, BTreeSet<usize>> {
        &self.groups
    }

    /// Bands that triggered SAM resolution.
    pub fn overlapping(&self) -> &BTreeSet<usize> {
        &self.overlapping
    }

    pub fn representatives(&self) -> impl Iterator<Item = usize> + '_ {
        self.groups.keys().copied()
    }

    /// The representative whose group contains `band`.
    pub fn group_of(&self, band: usize) -> Option<usize> {
        self.groups
            .iter()
            .find(|(_, members)| members.contains(&band))
            .map(|(&rep, _)| rep)
    }
}

/// Partition all bands around the representatives.
///
/// Representatives map to themselves. A non-overlapping band joins the
/// representative with the largest |correlation|; an overlapping band joins
/// the representative with the smallest SAM. Ties within 1e-12 go to the
/// smaller representative index, so the result does not depend on
/// representative order.
pub fn assign_groups(
    cube: &HsiCube,
    correlation: &CorrelationMatrix,
    representatives: &BandSubset,
    tau: f64,
) -> Result<GroupAssignment> {
    if representatives.is_empty() {
        return Err(Error::EmptyRepresentatives);
    }
    let n = cube.bands();
    if correlation.size() != n {
        return Err(Error::ShapeMismatch {
            context: "assign_groups",
            expected: format!("correlation over {n} bands"),
            found: format!("correlation over {} bands", correlation.size()),
        });
    }
    let overlapping = detect_overlaps(correlation, representatives, tau)?;
    let mut groups: BTreeMap<usize, BTreeSet<usize>> = representatives
        .indices()
        .iter()
        .map(|&rep| (rep, BTreeSet::from([rep])))
        .collect();

    // BandSubset keeps indices sorted, so scanning scores in order makes the
    // first entry inside the tie window the smallest representative.
    let winner = |scores: &[(usize, f64)], target: f64| -> usize {
        scores
            .iter()
            .find(|(_, s)| (s - target).abs() <= TIE_EPSILON)
            .expect("target comes from the score list")
            .0
    };

    for band in 0..n {
        if representatives.contains(band) {
            continue;
        }
        let rep = if overlapping.contains(&band) {
            let mut scores = Vec::with_capacity(representatives.len());
            for &rep in representatives.indices() {
                let angle = angle_slices(cube.plane(band), cube.plane(rep)).map_err(|side| {
                    Error::ZeroNormBand {
                        band: if side == "first" { band } else { rep },
                    }
                })?;
                scores.push((rep, angle));
            }
            let best = scores.iter().map(|&(_, s)| s).fold(f64::INFINITY, f64::min);
            winner(&scores, best)
        } else {
            let scores: Vec<(usize, f64)> = representatives
                .indices()
                .iter()
                .map(|&rep| (rep, correlation.get(band, rep).abs()))
                .collect();
            let best = scores
                .iter()
                .map(|&(_, s)| s)
                .fold(f64::NEG_INFINITY, f64::max);
            winner(&scores, best)
        };
        groups.get_mut(&rep).expect("group exists").insert(band);
    }

    Ok(GroupAssignment {
        tau,
        groups,
        overlapping,
    })
}
