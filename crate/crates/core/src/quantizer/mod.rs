//! Multi-level quantizer with guard bands and the joint-distribution-matched
//! design algorithm.
//!
//! A `2^b`-level quantizer is a set of half-open cells `(a_j^-, a_j^+]`
//! separated by guard bands; samples falling in a guard band are erased and
//! excluded from consensus. The design loop alternates an error block (guard
//! widening bounds the adjacent-cell confusion mass) with an entropy block
//! (guard translation equalizes the diagonal cell masses), and finishes with
//! a refining block that equalizes the diagonal masses exactly, which pins
//! the conditional key entropy at `b` bits.

mod baseline;
mod blocks;
mod emem;
mod joint;
mod lattice;
pub mod metrics;

pub use baseline::{baseline_max_lloyd, baseline_marginal_maxent, baseline_uniform};
pub use blocks::{entropy_block, error_block, init_block, refining_block};
pub use emem::{
    default_eta_grid, design_for_target, em_em, search_eta_star, DesignReport, ENTROPY_GAP_FRACTION,
    MAX_ALTERNATIONS,
};
pub use joint::{JointDistribution, SupportKind, HISTOGRAM_BINS, HISTOGRAM_SPAN_SIGMAS};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum QuantizerError {
    #[error("number of levels must be a positive power of two, got {0}")]
    InvalidLevelCount(usize),
    #[error("quantizer violates the cell ordering invariants: {0}")]
    InvalidCells(String),
    #[error("distribution grid is invalid: {0}")]
    InvalidDistribution(String),
    #[error("step size must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("eta must be positive, got {0}")]
    InvalidEta(f64),
    #[error("eta search grid is empty")]
    EmptyEtaGrid,
    #[error("consensus probability is zero; conditional quantities are undefined")]
    ZeroConsensus,
    #[error("the marginal cannot fill 2^{bits} cells of mass 1/2^{bits}")]
    InitUnreachable { bits: u32 },
    #[error("guard band {guard} cannot widen further without emptying a neighboring cell")]
    GuardExhausted { guard: usize },
    #[error("guard band {guard} translation exited the support without crossing the target")]
    TranslationExhausted { guard: usize },
    #[error("cell {cell} would collapse while refining")]
    CellCollapsed { cell: usize },
    #[error("guard growth cannot reach the requested mismatch target")]
    TargetUnreachable,
    #[error("sequence lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// Output of quantizer evaluation: a level index or the erasure symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QuantizedSymbol {
    Level(u16),
    Erased,
}

impl QuantizedSymbol {
    pub fn is_erased(&self) -> bool {
        matches!(self, QuantizedSymbol::Erased)
    }

    pub fn level(&self) -> Option<u16> {
        match self {
            QuantizedSymbol::Level(j) => Some(*j),
            QuantizedSymbol::Erased => None,
        }
    }
}

/// One quantizer cell `(lo, hi]` with its representative value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub lo: f64,
    pub hi: f64,
    pub rep: f64,
}

/// `2^b`-level scalar quantizer with guard bands.
///
/// Invariants: `lo < hi` per cell, `hi_j <= lo_{j+1}`, the first `lo` is
/// `-inf` and the last `hi` is `+inf`, and each representative lies in its
/// cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiLevelQuantizer {
    cells: Vec<Cell>,
}

impl MultiLevelQuantizer {
    pub fn new(pairs: Vec<(f64, f64)>, representatives: Vec<f64>) -> Result<Self, QuantizerError> {
        if pairs.len() != representatives.len() {
            return Err(QuantizerError::InvalidCells(format!(
                "{} cells but {} representatives",
                pairs.len(),
                representatives.len()
            )));
        }
        let cells: Vec<Cell> = pairs
            .iter()
            .zip(&representatives)
            .map(|(&(lo, hi), &rep)| Cell { lo, hi, rep })
            .collect();
        let q = Self { cells };
        q.validate()?;
        Ok(q)
    }

    /// Checks every structural invariant; design code calls this after each
    /// block.
    pub fn validate(&self) -> Result<(), QuantizerError> {
        let n = self.cells.len();
        if n == 0 || !n.is_power_of_two() {
            return Err(QuantizerError::InvalidLevelCount(n));
        }
        if self.cells[0].lo != f64::NEG_INFINITY {
            return Err(QuantizerError::InvalidCells("first cell must open at -inf".into()));
        }
        if self.cells[n - 1].hi != f64::INFINITY {
            return Err(QuantizerError::InvalidCells("last cell must close at +inf".into()));
        }
        for (j, c) in self.cells.iter().enumerate() {
            if !(c.lo < c.hi) {
                return Err(QuantizerError::InvalidCells(format!(
                    "cell {j} has lo {} >= hi {}",
                    c.lo, c.hi
                )));
            }
            if !(c.rep > c.lo && c.rep <= c.hi) {
                return Err(QuantizerError::InvalidCells(format!(
                    "representative {} of cell {j} is outside ({}, {}]",
                    c.rep, c.lo, c.hi
                )));
            }
        }
        for j in 0..n - 1 {
            if !(self.cells[j].hi <= self.cells[j + 1].lo) {
                return Err(QuantizerError::InvalidCells(format!(
                    "cells {j} and {} overlap",
                    j + 1
                )));
            }
        }
        Ok(())
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn level_count(&self) -> usize {
        self.cells.len()
    }

    /// Bits per retained sample, `log2` of the level count.
    pub fn bits(&self) -> u32 {
        self.cells.len().trailing_zeros()
    }

    /// Width of the guard band between cells `j` and `j+1`.
    pub fn guard_width(&self, j: usize) -> f64 {
        self.cells[j + 1].lo - self.cells[j].hi
    }

    pub fn representatives(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.rep).collect()
    }

    /// Quantizes a real sample: the level of the cell whose half-open
    /// interval contains it, or the erasure symbol inside a guard band.
    pub fn evaluate(&self, y: f64) -> QuantizedSymbol {
        if y.is_nan() {
            return QuantizedSymbol::Erased;
        }
        // First cell whose upper edge is >= y; y on the edge stays in it.
        let j = self.cells.partition_point(|c| c.hi < y);
        if j >= self.cells.len() {
            return QuantizedSymbol::Erased;
        }
        if y > self.cells[j].lo {
            QuantizedSymbol::Level(j as u16)
        } else {
            QuantizedSymbol::Erased
        }
    }

    /// Serializable `{b, pairs, representatives, eta, e}` document.
    pub fn to_document(&self, eta: f64, excursion: u32) -> QuantizerDocument {
        QuantizerDocument {
            b: self.bits(),
            pairs: self.cells.iter().map(|c| (Bound(c.lo), Bound(c.hi))).collect(),
            representatives: self.cells.iter().map(|c| c.rep).collect(),
            eta,
            e: excursion,
        }
    }
}

/// Finite or infinite bound, serialized as a number or `"-inf"` / `"inf"`
/// (JSON has no infinity literal).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound(pub f64);

impl Serialize for Bound {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0 == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Bound {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Bound(x)),
            Raw::Str(s) => match s.as_str() {
                "-inf" => Ok(Bound(f64::NEG_INFINITY)),
                "inf" => Ok(Bound(f64::INFINITY)),
                other => Err(D::Error::custom(format!("invalid bound '{other}'"))),
            },
        }
    }
}

/// Portable quantizer serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizerDocument {
    pub b: u32,
    pub pairs: Vec<(Bound, Bound)>,
    pub representatives: Vec<f64>,
    pub eta: f64,
    pub e: u32,
}

impl QuantizerDocument {
    pub fn to_quantizer(&self) -> Result<MultiLevelQuantizer, QuantizerError> {
        MultiLevelQuantizer::new(
            self.pairs.iter().map(|&(lo, hi)| (lo.0, hi.0)).collect(),
            self.representatives.clone(),
        )
    }
}
