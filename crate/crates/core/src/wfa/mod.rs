//! Exact gap-affine wavefront alignment (WFA).
//!
//! Offsets are furthest-reaching text positions `h` on diagonal `k = h - v`,
//! where `v` is the pattern position. Matches cost 0, mismatches cost `x`,
//! and a gap of length `L` costs `o + L * e`.

mod align;
mod backtrace;
mod cigar;
mod oracle;
mod wavefront;

use thiserror::Error;

use crate::arena::ArenaError;

pub use align::{align, align_with_stats, AlignStats};
pub use backtrace::{backtrace, OffsetLookup};
pub use cigar::{rescore_cigar, Cigar, CigarOp, InvalidCigar};
pub use oracle::{gotoh_oracle, OracleError, DEFAULT_ORACLE_CAP};
pub use wavefront::{
    wf_extend, wf_next, Component, WavefrontComponent, WavefrontHistory, WavefrontSet, NULL_OFFSET,
};

/// Largest accepted penalty value.
pub const MAX_PENALTY: u32 = 1 << 15;
/// Longest accepted sequence.
pub const MAX_SEQUENCE_LEN: usize = 1 << 20;

/// Gap-affine scoring parameters. Matches are free.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Penalties {
    pub mismatch: u32,
    pub gap_open: u32,
    pub gap_extend: u32,
}

impl Default for Penalties {
    fn default() -> Self {
        Self {
            mismatch: 4,
            gap_open: 6,
            gap_extend: 2,
        }
    }
}

impl Penalties {
    pub fn new(mismatch: u32, gap_open: u32, gap_extend: u32) -> Result<Self, InputError> {
        let p = Self {
            mismatch,
            gap_open,
            gap_extend,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), InputError> {
        if self.mismatch == 0 || self.gap_extend == 0 {
            return Err(InputError::Penalties(
                "mismatch and gap-extend penalties must be positive",
            ));
        }
        if self.mismatch > MAX_PENALTY || self.gap_open > MAX_PENALTY || self.gap_extend > MAX_PENALTY
        {
            return Err(InputError::Penalties("penalty exceeds 2^15"));
        }
        Ok(())
    }

    /// Cost of opening a gap of length one.
    #[inline]
    pub fn gap_first(&self) -> u32 {
        self.gap_open + self.gap_extend
    }
}

impl std::fmt::Display for Penalties {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{}", self.mismatch, self.gap_open, self.gap_extend)
    }
}

impl std::str::FromStr for Penalties {
    type Err = InputError;

    /// Parses `x,o,e`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(InputError::Penalties("expected three comma-separated values x,o,e"));
        }
        let mut v = [0u32; 3];
        for (slot, part) in v.iter_mut().zip(&parts) {
            *slot = part
                .parse()
                .map_err(|_| InputError::Penalties("penalty is not a non-negative integer"))?;
        }
        Penalties::new(v[0], v[1], v[2])
    }
}

/// A pattern (read) to be aligned end-to-end against a text.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SequencePair {
    pub pattern: Vec<u8>,
    pub text: Vec<u8>,
}

impl SequencePair {
    pub fn new(pattern: impl Into<Vec<u8>>, text: impl Into<Vec<u8>>) -> Result<Self, InputError> {
        let pair = Self {
            pattern: pattern.into(),
            text: text.into(),
        };
        pair.validate()?;
        Ok(pair)
    }

    pub fn validate(&self) -> Result<(), InputError> {
        for len in [self.pattern.len(), self.text.len()] {
            if len == 0 || len > MAX_SEQUENCE_LEN {
                return Err(InputError::SequenceLength(len));
            }
        }
        Ok(())
    }

    /// The diagonal on which an end-to-end alignment terminates.
    #[inline]
    pub fn final_diagonal(&self) -> i32 {
        self.text.len() as i32 - self.pattern.len() as i32
    }
}

/// Optional caps on the work done for one pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Limits {
    /// Give up once the score would exceed this value.
    pub max_score: Option<u32>,
}

/// Score and CIGAR of one optimal alignment.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Alignment {
    pub score: u32,
    pub cigar: Cigar,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InputError {
    #[error("invalid penalties: {0}")]
    Penalties(&'static str),
    #[error("sequence length {0} outside [1, 2^20]")]
    SequenceLength(usize),
}

#[derive(Debug, Error)]
pub enum AlignError {
    #[error(transparent)]
    Input(#[from] InputError),
    #[error("wavefront memory exhausted: {0}")]
    CapacityExceeded(#[source] ArenaError),
    #[error("arena transfer failed: {0}")]
    Memory(#[source] ArenaError),
    #[error("score limit {limit} reached before the alignment completed")]
    ScoreLimitExceeded { limit: u32 },
    #[error("backtrace found no predecessor at score {score}, diagonal {diagonal}, offset {offset}")]
    InternalInconsistency { score: u32, diagonal: i32, offset: i32 },
}

impl From<ArenaError> for AlignError {
    fn from(e: ArenaError) -> Self {
        match e {
            ArenaError::CapacityExceeded { .. } => AlignError::CapacityExceeded(e),
            other => AlignError::Memory(other),
        }
    }
}

/// Sequence lengths, used for the offset bounds of every wavefront cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Dims {
    pub pattern_len: i32,
    pub text_len: i32,
}

impl Dims {
    pub fn of(pair: &SequencePair) -> Self {
        Self {
            pattern_len: pair.pattern.len() as i32,
            text_len: pair.text.len() as i32,
        }
    }

    pub fn min_diagonal(&self) -> i32 {
        -self.pattern_len
    }

    pub fn max_diagonal(&self) -> i32 {
        self.text_len
    }

    pub fn max_width(&self) -> usize {
        (self.pattern_len + self.text_len + 1) as usize
    }

    /// `h` if it is a reachable position on diagonal `k`, NULL otherwise.
    #[inline]
    pub fn check(&self, k: i32, h: i32) -> i32 {
        if h == NULL_OFFSET || h > self.text_len || h - k > self.pattern_len {
            NULL_OFFSET
        } else {
            h
        }
    }
}
