//! Random DNA triplets labeled with exact edit-distance-with-moves ground
//! truth, and their line-delimited JSON file format.
//!
//! One record per line:
//!
//! ```text
//! {"a":"ATGCATGC","b":"TTGCAAGC","c":"GGGCATTA","d_ab":2,"d_ac":4,"s_ab":0.75,"s_ac":0.5}
//! ```

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::edm::{edm_exact, similarity_from_distance, EdmCache, MAX_EXACT_LENGTH};
use crate::error::{Error, Result};
use crate::sequence::{Nucleotide, NucleotideSequence};

/// Node budget handed to the exact solver during generation. Length-8
/// instances stay several orders of magnitude below it.
pub const DEFAULT_EDM_BUDGET: usize = 50_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledTriplet {
    pub a: NucleotideSequence,
    pub b: NucleotideSequence,
    pub c: NucleotideSequence,
    pub d_ab: usize,
    pub d_ac: usize,
    pub s_ab: f64,
    pub s_ac: f64,
}

impl LabeledTriplet {
    /// Builds a triplet from sequences and distances, deriving the
    /// similarity labels.
    pub fn new(
        a: NucleotideSequence,
        b: NucleotideSequence,
        c: NucleotideSequence,
        d_ab: usize,
        d_ac: usize,
    ) -> Result<Self> {
        let s_ab = similarity_from_distance(a.len(), b.len(), d_ab)?;
        let s_ac = similarity_from_distance(a.len(), c.len(), d_ac)?;
        Ok(Self {
            a,
            b,
            c,
            d_ab,
            d_ac,
            s_ab,
            s_ac,
        })
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let n = self.a.len();
        if self.b.len() != n || self.c.len() != n {
            return Err(format!(
                "sequence lengths differ: {}, {}, {}",
                n,
                self.b.len(),
                self.c.len()
            ));
        }
        for (name, d, s) in [("ab", self.d_ab, self.s_ab), ("ac", self.d_ac, self.s_ac)] {
            let expected = (n as f64 - d as f64) / n as f64;
            if (s - expected).abs() > 1e-12 {
                return Err(format!("s_{name} = {s} but (N − d_{name})/N = {expected}"));
            }
        }
        if self.d_ab == self.d_ac {
            return Err(format!("tied distances d_ab = d_ac = {}", self.d_ab));
        }
        Ok(())
    }
}

/// One regression example: a sequence pair and its similarity target.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPair {
    pub x: NucleotideSequence,
    pub y: NucleotideSequence,
    pub target: f64,
}

/// The `(a, b)` and `(a, c)` pairs of every triplet, in order.
pub fn training_pairs(triplets: &[LabeledTriplet]) -> Vec<LabeledPair> {
    triplets
        .iter()
        .flat_map(|t| {
            [
                LabeledPair {
                    x: t.a.clone(),
                    y: t.b.clone(),
                    target: t.s_ab,
                },
                LabeledPair {
                    x: t.a.clone(),
                    y: t.c.clone(),
                    target: t.s_ac,
                },
            ]
        })
        .collect()
}

/// Uniform i.i.d. bases.
pub fn random_sequence<R: Rng + ?Sized>(rng: &mut R, length: usize) -> Result<NucleotideSequence> {
    NucleotideSequence::new(
        (0..length)
            .map(|_| Nucleotide::from_index(rng.gen_range(0..4)))
            .collect(),
    )
}

/// Draws `count` triplets of length-`length` sequences from `seed`, redrawing
/// any triplet whose two distances tie.
///
/// Candidates are drawn sequentially and labeled in parallel, so the output
/// does not depend on the thread count.
pub fn generate_triplets(seed: u64, count: usize, length: usize) -> Result<Vec<LabeledTriplet>> {
    if count == 0 {
        return Err(Error::Config("triplet count must be at least 1".into()));
    }
    if length == 0 {
        return Err(Error::EmptySequence);
    }
    if length > MAX_EXACT_LENGTH {
        return Err(Error::SequenceTooLong {
            length,
            max: MAX_EXACT_LENGTH,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cache = EdmCache::new(Some(DEFAULT_EDM_BUDGET));
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let want = count - out.len();
        let candidates = (0..want + want / 4 + 1)
            .map(|_| {
                Ok((
                    random_sequence(&mut rng, length)?,
                    random_sequence(&mut rng, length)?,
                    random_sequence(&mut rng, length)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let labeled = candidates
            .into_par_iter()
            .map(|(a, b, c)| {
                let d_ab = cache.distance(&a, &b)?;
                let d_ac = cache.distance(&a, &c)?;
                Ok((a, b, c, d_ab, d_ac))
            })
            .collect::<Result<Vec<_>>>()?;
        for (a, b, c, d_ab, d_ac) in labeled {
            if out.len() == count {
                break;
            }
            if d_ab != d_ac {
                out.push(LabeledTriplet::new(a, b, c, d_ab, d_ac)?);
            }
        }
    }
    Ok(out)
}

/// One JSON object per line, newline-terminated.
pub fn format_triplets(triplets: &[LabeledTriplet]) -> Result<String> {
    let mut out = String::new();
    for t in triplets {
        out.push_str(&serde_json::to_string(t)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn save_triplets(path: &Path, triplets: &[LabeledTriplet]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for t in triplets {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads and validates a triplet file. Blank lines are skipped.
pub fn load_triplets(path: &Path) -> Result<Vec<LabeledTriplet>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_line(&line, i + 1)?);
    }
    Ok(out)
}

pub fn parse_line(line: &str, line_no: usize) -> Result<LabeledTriplet> {
    let t: LabeledTriplet = serde_json::from_str(line).map_err(|e| Error::Parse {
        line: line_no,
        message: e.to_string(),
    })?;
    t.validate().map_err(|message| Error::Validation {
        line: line_no,
        message,
    })?;
    Ok(t)
}

/// Recomputes the distances of a random `fraction` of triplets (at least one)
/// and fails on the first disagreement.
pub fn spot_check(triplets: &[LabeledTriplet], fraction: f64, seed: u64) -> Result<()> {
    if triplets.is_empty() {
        return Ok(());
    }
    let k = ((triplets.len() as f64 * fraction).ceil() as usize).clamp(1, triplets.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = sample(&mut rng, triplets.len(), k).into_vec();
    picks.into_par_iter().try_for_each(|i| {
        let t = &triplets[i];
        let d_ab = edm_exact(&t.a, &t.b, Some(DEFAULT_EDM_BUDGET))?;
        let d_ac = edm_exact(&t.a, &t.c, Some(DEFAULT_EDM_BUDGET))?;
        if (d_ab, d_ac) != (t.d_ab, t.d_ac) {
            return Err(Error::Validation {
                line: i + 1,
                message: format!(
                    "stored distances ({}, {}) but recomputed ({d_ab}, {d_ac})",
                    t.d_ab, t.d_ac
                ),
            });
        }
        Ok(())
    })
}
