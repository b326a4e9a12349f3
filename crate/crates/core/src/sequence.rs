use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// One of the four DNA bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Nucleotide {
    A,
    T,
    G,
    C,
}

impl Nucleotide {
    pub const ALL: [Nucleotide; 4] = [Nucleotide::A, Nucleotide::T, Nucleotide::G, Nucleotide::C];

    /// Dense index in `0..4`, in the order A, T, G, C.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Nucleotide {
        Self::ALL[index & 3]
    }

    pub fn as_char(self) -> char {
        match self {
            Nucleotide::A => 'A',
            Nucleotide::T => 'T',
            Nucleotide::G => 'G',
            Nucleotide::C => 'C',
        }
    }
}

impl TryFrom<char> for Nucleotide {
    type Error = Error;

    fn try_from(c: char) -> Result<Self> {
        match c {
            'A' => Ok(Nucleotide::A),
            'T' => Ok(Nucleotide::T),
            'G' => Ok(Nucleotide::G),
            'C' => Ok(Nucleotide::C),
            other => Err(Error::InvalidSymbol(other)),
        }
    }
}

impl fmt::Display for Nucleotide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// A non-empty string over `{A, T, G, C}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NucleotideSequence(Vec<Nucleotide>);

impl NucleotideSequence {
    pub fn new(bases: Vec<Nucleotide>) -> Result<Self> {
        if bases.is_empty() {
            return Err(Error::EmptySequence);
        }
        Ok(Self(bases))
    }

    pub fn bases(&self) -> &[Nucleotide] {
        &self.0
    }

    /// The sequence with positions `i` and `j` exchanged.
    ///
    /// # Panics
    /// If either index is out of bounds.
    pub fn swapped(&self, i: usize, j: usize) -> Self {
        let mut bases = self.0.clone();
        bases.swap(i, j);
        Self(bases)
    }
}

impl Deref for NucleotideSequence {
    type Target = [Nucleotide];

    fn deref(&self) -> &[Nucleotide] {
        &self.0
    }
}

impl FromStr for NucleotideSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bases = s.chars().map(Nucleotide::try_from).collect::<Result<Vec<_>>>()?;
        Self::new(bases)
    }
}

impl fmt::Display for NucleotideSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&bases_to_string(&self.0))
    }
}

impl Serialize for NucleotideSequence {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NucleotideSequence {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn bases_to_string(bases: &[Nucleotide]) -> String {
    bases.iter().map(|b| b.as_char()).collect()
}
