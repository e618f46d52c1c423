use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::{Penalties, SequencePair};

/// Extended CIGAR operation. `I` consumes text only, `D` consumes pattern only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CigarOp {
    Match,
    Mismatch,
    Insertion,
    Deletion,
}

impl CigarOp {
    pub fn symbol(self) -> char {
        match self {
            CigarOp::Match => 'M',
            CigarOp::Mismatch => 'X',
            CigarOp::Insertion => 'I',
            CigarOp::Deletion => 'D',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        match c {
            'M' => Some(CigarOp::Match),
            'X' => Some(CigarOp::Mismatch),
            'I' => Some(CigarOp::Insertion),
            'D' => Some(CigarOp::Deletion),
            _ => None,
        }
    }

    fn consumes_pattern(self) -> bool {
        !matches!(self, CigarOp::Insertion)
    }

    fn consumes_text(self) -> bool {
        !matches!(self, CigarOp::Deletion)
    }
}

/// Run-length encoded alignment operations. Adjacent runs always differ.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Cigar {
    runs: Vec<(CigarOp, u32)>,
}

impl Cigar {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends `len` copies of `op`, merging with the last run.
    pub fn push(&mut self, op: CigarOp, len: u32) {
        if len == 0 {
            return;
        }
        match self.runs.last_mut() {
            Some((last, n)) if *last == op => *n += len,
            _ => self.runs.push((op, len)),
        }
    }

    pub fn runs(&self) -> &[(CigarOp, u32)] {
        &self.runs
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn pattern_len(&self) -> u64 {
        self.runs
            .iter()
            .filter(|(op, _)| op.consumes_pattern())
            .map(|&(_, n)| n as u64)
            .sum()
    }

    pub fn text_len(&self) -> u64 {
        self.runs
            .iter()
            .filter(|(op, _)| op.consumes_text())
            .map(|&(_, n)| n as u64)
            .sum()
    }

    /// Builds a CIGAR from single operations listed in alignment order.
    pub fn from_ops(ops: impl IntoIterator<Item = CigarOp>) -> Self {
        let mut cigar = Cigar::new();
        for op in ops {
            cigar.push(op, 1);
        }
        cigar
    }
}

impl fmt::Display for Cigar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &(op, n) in &self.runs {
            write!(f, "{}{}", n, op.symbol())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum InvalidCigar {
    #[error("malformed CIGAR string: {0}")]
    Syntax(String),
    #[error("CIGAR consumes {cigar} pattern bytes but the pattern has {actual}")]
    PatternLength { cigar: u64, actual: u64 },
    #[error("CIGAR consumes {cigar} text bytes but the text has {actual}")]
    TextLength { cigar: u64, actual: u64 },
    #[error("M over differing bytes at pattern {pattern_pos}, text {text_pos}")]
    MatchOverMismatch { pattern_pos: usize, text_pos: usize },
    #[error("X over equal bytes at pattern {pattern_pos}, text {text_pos}")]
    MismatchOverMatch { pattern_pos: usize, text_pos: usize },
}

impl FromStr for Cigar {
    type Err = InvalidCigar;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut cigar = Cigar::new();
        let mut len: Option<u32> = None;
        for c in s.chars() {
            if let Some(d) = c.to_digit(10) {
                let next = len
                    .unwrap_or(0)
                    .checked_mul(10)
                    .and_then(|v| v.checked_add(d))
                    .ok_or_else(|| InvalidCigar::Syntax(format!("run length overflow in {s:?}")))?;
                len = Some(next);
            } else {
                let op = CigarOp::from_symbol(c)
                    .ok_or_else(|| InvalidCigar::Syntax(format!("unknown operation {c:?}")))?;
                match len.take() {
                    Some(n) if n > 0 => cigar.push(op, n),
                    _ => {
                        return Err(InvalidCigar::Syntax(format!(
                            "operation {c:?} without a positive run length"
                        )))
                    }
                }
            }
        }
        if len.is_some() {
            return Err(InvalidCigar::Syntax("trailing run length".into()));
        }
        Ok(cigar)
    }
}

/// Recomputes the gap-affine cost of `cigar` on `pair`, checking that it
/// consumes both sequences exactly and that M/X runs agree with the bytes.
pub fn rescore_cigar(
    cigar: &Cigar,
    pair: &SequencePair,
    penalties: &Penalties,
) -> Result<u64, InvalidCigar> {
    let (plen, tlen) = (pair.pattern.len() as u64, pair.text.len() as u64);
    if cigar.pattern_len() != plen {
        return Err(InvalidCigar::PatternLength {
            cigar: cigar.pattern_len(),
            actual: plen,
        });
    }
    if cigar.text_len() != tlen {
        return Err(InvalidCigar::TextLength {
            cigar: cigar.text_len(),
            actual: tlen,
        });
    }

    let (mut v, mut h) = (0usize, 0usize);
    let mut score = 0u64;
    let mut prev: Option<CigarOp> = None;
    for &(op, n) in cigar.runs() {
        let n = n as usize;
        match op {
            CigarOp::Match | CigarOp::Mismatch => {
                for i in 0..n {
                    let equal = pair.pattern[v + i] == pair.text[h + i];
                    if op == CigarOp::Match && !equal {
                        return Err(InvalidCigar::MatchOverMismatch {
                            pattern_pos: v + i,
                            text_pos: h + i,
                        });
                    }
                    if op == CigarOp::Mismatch && equal {
                        return Err(InvalidCigar::MismatchOverMatch {
                            pattern_pos: v + i,
                            text_pos: h + i,
                        });
                    }
                }
                if op == CigarOp::Mismatch {
                    score += n as u64 * penalties.mismatch as u64;
                }
                v += n;
                h += n;
            }
            CigarOp::Insertion | CigarOp::Deletion => {
                // Runs are maximal, but a hand-written CIGAR may repeat an op.
                if prev != Some(op) {
                    score += penalties.gap_open as u64;
                }
                score += n as u64 * penalties.gap_extend as u64;
                if op == CigarOp::Insertion {
                    h += n;
                } else {
                    v += n;
                }
            }
        }
        prev = Some(op);
    }
    Ok(score)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(p: &str, t: &str) -> SequencePair {
        SequencePair::new(p, t).unwrap()
    }

    #[test]
    fn display_and_parse() {
        let c: Cigar = "98M1X1M".parse().unwrap();
        assert_eq!(c.to_string(), "98M1X1M");
        assert_eq!(c.pattern_len(), 100);
        assert!("M".parse::<Cigar>().is_err());
        assert!("0M".parse::<Cigar>().is_err());
        assert!("3".parse::<Cigar>().is_err());
        assert!("3Q".parse::<Cigar>().is_err());
        assert_eq!("2M3M".parse::<Cigar>().unwrap().to_string(), "5M");
    }

    #[test]
    fn rescore_examples() {
        let pen = Penalties::default();
        let c: Cigar = "7M".parse().unwrap();
        assert_eq!(rescore_cigar(&c, &pair("GATTACA", "GATTACA"), &pen), Ok(0));
        let c: Cigar = "2M1X4M".parse().unwrap();
        assert_eq!(rescore_cigar(&c, &pair("GATTACA", "GACTACA"), &pen), Ok(4));
        let c: Cigar = "3M".parse().unwrap();
        assert!(matches!(
            rescore_cigar(&c, &pair("GAT", "GAC"), &pen),
            Err(InvalidCigar::MatchOverMismatch { pattern_pos: 2, .. })
        ));
    }

    #[test]
    fn rescore_gaps_and_errors() {
        let pen = Penalties::default();
        let c: Cigar = "4M1I".parse().unwrap();
        assert_eq!(rescore_cigar(&c, &pair("AAAA", "AAAAA"), &pen), Ok(8));
        let c: Cigar = "1M2D1M".parse().unwrap();
        assert_eq!(rescore_cigar(&c, &pair("ACGT", "AT"), &pen), Ok(10));
        let c: Cigar = "1M1I1D".parse().unwrap();
        assert_eq!(rescore_cigar(&c, &pair("AC", "AG"), &pen), Ok(16));
        let c: Cigar = "1X".parse().unwrap();
        assert!(matches!(
            rescore_cigar(&c, &pair("A", "A"), &pen),
            Err(InvalidCigar::MismatchOverMatch { .. })
        ));
        let c: Cigar = "2M".parse().unwrap();
        assert!(matches!(
            rescore_cigar(&c, &pair("AA", "AAA"), &pen),
            Err(InvalidCigar::TextLength { .. })
        ));
        assert!(matches!(
            rescore_cigar(&c, &pair("AAA", "AA"), &pen),
            Err(InvalidCigar::PatternLength { .. })
        ));
    }
}
