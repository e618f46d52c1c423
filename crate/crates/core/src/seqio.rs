//! Pair files, result files and the synthetic dataset generator.
//!
//! Pair file: two lines per pair, `>PATTERN` then `<TEXT`, uppercase `ACGT`.
//! Result file: one line per pair, `score<TAB>CIGAR`.

use std::io::{self, BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::wfa::{Alignment, Cigar, SequencePair};

pub const ALPHABET: &[u8; 4] = b"ACGT";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn syntax(line: usize, reason: impl Into<String>) -> FormatError {
    FormatError::Syntax {
        line,
        reason: reason.into(),
    }
}

fn sequence(line_no: usize, line: &str, marker: char) -> Result<Vec<u8>, FormatError> {
    let body = line
        .strip_prefix(marker)
        .ok_or_else(|| syntax(line_no, format!("expected a line starting with '{marker}'")))?;
    if body.is_empty() {
        return Err(syntax(line_no, "empty sequence"));
    }
    if let Some(c) = body.chars().find(|c| !ALPHABET.contains(&(*c as u8)) || !c.is_ascii()) {
        return Err(syntax(line_no, format!("invalid base {c:?}")));
    }
    Ok(body.as_bytes().to_vec())
}

pub fn parse_pairs(input: impl BufRead) -> Result<Vec<SequencePair>, FormatError> {
    let mut pairs = Vec::new();
    let mut pattern: Option<Vec<u8>> = None;
    let mut line_no = 0;
    for line in input.lines() {
        let line = line?;
        line_no += 1;
        match pattern.take() {
            None => pattern = Some(sequence(line_no, &line, '>')?),
            Some(p) => {
                let t = sequence(line_no, &line, '<')?;
                let pair =
                    SequencePair::new(p, t).map_err(|e| syntax(line_no, e.to_string()))?;
                pairs.push(pair);
            }
        }
    }
    if pattern.is_some() {
        return Err(syntax(line_no, "pattern line without a text line"));
    }
    Ok(pairs)
}

pub fn write_pairs(pairs: &[SequencePair], mut out: impl Write) -> io::Result<()> {
    for p in pairs {
        out.write_all(b">")?;
        out.write_all(&p.pattern)?;
        out.write_all(b"\n<")?;
        out.write_all(&p.text)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn write_results(alignments: &[Alignment], mut out: impl Write) -> io::Result<()> {
    for a in alignments {
        writeln!(out, "{}\t{}", a.score, a.cigar)?;
    }
    out.flush()
}

pub fn parse_results(input: impl BufRead) -> Result<Vec<Alignment>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let (score, cigar) = line
            .split_once('\t')
            .ok_or_else(|| syntax(line_no, "expected score<TAB>CIGAR"))?;
        if score.is_empty() || !score.bytes().all(|b| b.is_ascii_digit()) {
            return Err(syntax(line_no, format!("invalid score {score:?}")));
        }
        let score = score
            .parse()
            .map_err(|e| syntax(line_no, format!("invalid score: {e}")))?;
        let cigar: Cigar = cigar
            .parse()
            .map_err(|e| syntax(line_no, format!("invalid CIGAR: {e}")))?;
        out.push(Alignment { score, cigar });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetSpec {
    pub pair_count: usize,
    pub read_length: usize,
    /// Edits per pair as a fraction of the read length.
    pub error_threshold: f64,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            pair_count: 1000,
            read_length: 100,
            error_threshold: 0.02,
            seed: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SpecError {
    #[error("error threshold {0} outside [0, 0.5]")]
    Threshold(f64),
    #[error("read length {0} outside 1..={max}", max = crate::wfa::MAX_SEQUENCE_LEN)]
    ReadLength(usize),
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<(), SpecError> {
        if !(0.0..=0.5).contains(&self.error_threshold) {
            return Err(SpecError::Threshold(self.error_threshold));
        }
        // An insertion-only mutation must still fit the sequence limit.
        let longest = self.read_length + self.edits();
        if self.read_length == 0 || longest > crate::wfa::MAX_SEQUENCE_LEN {
            return Err(SpecError::ReadLength(self.read_length));
        }
        Ok(())
    }

    /// Edits applied to every pair: floor(E * read_length).
    pub fn edits(&self) -> usize {
        // The epsilon keeps products such as 0.07 * 100 from flooring to 6.
        (self.error_threshold * self.read_length as f64 + 1e-9).floor() as usize
    }
}

fn random_base(rng: &mut ChaCha8Rng) -> u8 {
    ALPHABET[rng.gen_range(0..4)]
}

fn generate_pair(spec: &DatasetSpec, index: u64) -> SequencePair {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index);
    let read: Vec<u8> = (0..spec.read_length).map(|_| random_base(&mut rng)).collect();
    let mut text = read.clone();
    for _ in 0..spec.edits() {
        match rng.gen_range(0..3) {
            0 if !text.is_empty() => {
                let at = rng.gen_range(0..text.len());
                let shift = rng.gen_range(1..4);
                let base = ALPHABET.iter().position(|&b| b == text[at]).unwrap();
                text[at] = ALPHABET[(base + shift) % 4];
            }
            1 => {
                let at = rng.gen_range(0..=text.len());
                let base = random_base(&mut rng);
                text.insert(at, base);
            }
            _ if text.len() > 1 => {
                let at = rng.gen_range(0..text.len());
                text.remove(at);
            }
            // Deleting the last base would leave an empty text.
            _ => {
                let base = random_base(&mut rng);
                text.push(base);
            }
        }
    }
    SequencePair { pattern: read, text }
}

/// Generates `spec.pair_count` (read, mutated copy) pairs. Pair `i` draws
/// from its own stream of the seeded generator, so the output does not depend
/// on generation order.
pub fn generate(spec: &DatasetSpec) -> Result<Vec<SequencePair>, SpecError> {
    spec.validate()?;
    Ok((0..spec.pair_count as u64)
        .map(|i| generate_pair(spec, i))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wfa::CigarOp;

    fn levenshtein(a: &[u8], b: &[u8]) -> usize {
        let mut prev: Vec<usize> = (0..=b.len()).collect();
        for (i, &ca) in a.iter().enumerate() {
            let mut cur = vec![i + 1; b.len() + 1];
            for (j, &cb) in b.iter().enumerate() {
                cur[j + 1] = (prev[j] + usize::from(ca != cb))
                    .min(prev[j + 1] + 1)
                    .min(cur[j] + 1);
            }
            prev = cur;
        }
        prev[b.len()]
    }

    #[test]
    fn parse_one_pair() {
        let pairs = parse_pairs(&b">GAT\n<GAC\n"[..]).unwrap();
        assert_eq!(pairs, vec![SequencePair::new("GAT", "GAC").unwrap()]);
        assert!(parse_pairs(&b""[..]).unwrap().is_empty());
    }

    #[test]
    fn parse_errors_name_the_line() {
        let line = |input: &[u8]| match parse_pairs(input) {
            Err(FormatError::Syntax { line, .. }) => line,
            other => panic!("unexpected {other:?}"),
        };
        assert_eq!(line(b"<GAC\n>GAT\n"), 1);
        assert_eq!(line(b">GAT\n<GAN\n"), 2);
        assert_eq!(line(b">GAT\n<GAC\n>GA\n"), 3);
        assert_eq!(line(b">gat\n<GAC\n"), 1);
        assert_eq!(line(b">\n<GAC\n"), 1);
    }

    #[test]
    fn pairs_round_trip() {
        let pairs = generate(&DatasetSpec {
            pair_count: 20,
            read_length: 30,
            error_threshold: 0.1,
            seed: 3,
        })
        .unwrap();
        let mut buf = Vec::new();
        write_pairs(&pairs, &mut buf).unwrap();
        assert_eq!(parse_pairs(&buf[..]).unwrap(), pairs);
    }

    #[test]
    fn result_lines() {
        let a = |score, ops: &[(CigarOp, usize)]| Alignment {
            score,
            cigar: Cigar::from_ops(ops.iter().flat_map(|&(op, n)| std::iter::repeat_n(op, n))),
        };
        let results = vec![
            a(0, &[(CigarOp::Match, 7)]),
            a(4, &[(CigarOp::Match, 2), (CigarOp::Mismatch, 1), (CigarOp::Match, 4)]),
        ];
        let mut buf = Vec::new();
        write_results(&results, &mut buf).unwrap();
        assert_eq!(buf, b"0\t7M\n4\t2M1X4M\n");
        assert_eq!(parse_results(&buf[..]).unwrap(), results);
        assert!(parse_results(&b"x\t7M\n"[..]).is_err());
        assert!(parse_results(&b"-1\t7M\n"[..]).is_err());
        assert!(parse_results(&b"3 7M\n"[..]).is_err());
    }

    #[test]
    fn generator_applies_bounded_edits() {
        let spec = DatasetSpec {
            pair_count: 200,
            read_length: 100,
            error_threshold: 0.02,
            seed: 11,
        };
        assert_eq!(spec.edits(), 2);
        for p in generate(&spec).unwrap() {
            assert_eq!(p.pattern.len(), 100);
            assert!(levenshtein(&p.pattern, &p.text) <= 2);
        }
        assert_eq!(DatasetSpec { error_threshold: 0.07, ..spec }.edits(), 7);
    }

    #[test]
    fn zero_threshold_gives_identical_pairs() {
        let spec = DatasetSpec {
            error_threshold: 0.0,
            ..Default::default()
        };
        assert!(generate(&spec).unwrap().iter().all(|p| p.pattern == p.text));
    }

    #[test]
    fn generator_is_deterministic() {
        let spec = DatasetSpec {
            pair_count: 50,
            seed: 99,
            ..Default::default()
        };
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = DatasetSpec { seed: 100, ..spec };
        assert_ne!(generate(&spec).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn spec_limits() {
        let bad = DatasetSpec {
            error_threshold: 0.6,
            ..Default::default()
        };
        assert_eq!(bad.validate(), Err(SpecError::Threshold(0.6)));
        let bad = DatasetSpec {
            read_length: 0,
            ..Default::default()
        };
        assert_eq!(bad.validate(), Err(SpecError::ReadLength(0)));
    }
}
