use thiserror::Error;

use super::{Penalties, SequencePair};

/// Default bound on `|pattern| * |text|` for the quadratic oracle.
pub const DEFAULT_ORACLE_CAP: u64 = 1 << 22;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("oracle matrix of {cells} cells exceeds the cap of {cap}")]
pub struct OracleError {
    pub cells: u64,
    pub cap: u64,
}

const INF: u64 = u64::MAX / 4;

/// Minimum gap-affine cost by full three-matrix dynamic programming (Gotoh).
///
/// Rows follow the pattern, columns the text. `ins` ends in a gap consuming
/// text, `del` ends in a gap consuming pattern, `best` is the overall minimum.
pub fn gotoh_oracle(pair: &SequencePair, penalties: &Penalties, cap: u64) -> Result<u64, OracleError> {
    let (p, t) = (&pair.pattern, &pair.text);
    let cells = p.len() as u64 * t.len() as u64;
    if cells > cap {
        return Err(OracleError { cells, cap });
    }
    let x = penalties.mismatch as u64;
    let o = penalties.gap_open as u64;
    let e = penalties.gap_extend as u64;
    let n = t.len();

    let mut best_prev: Vec<u64> = (0..=n).map(|j| if j == 0 { 0 } else { o + j as u64 * e }).collect();
    let mut del_prev: Vec<u64> = vec![INF; n + 1];
    let mut best_cur = vec![INF; n + 1];
    let mut del_cur = vec![INF; n + 1];

    for i in 1..=p.len() {
        best_cur[0] = o + i as u64 * e;
        del_cur[0] = best_cur[0];
        let mut ins = INF;
        for j in 1..=n {
            ins = (best_cur[j - 1] + o + e).min(ins + e);
            del_cur[j] = (best_prev[j] + o + e).min(del_prev[j] + e);
            let diag = best_prev[j - 1] + if p[i - 1] == t[j - 1] { 0 } else { x };
            best_cur[j] = diag.min(ins).min(del_cur[j]);
        }
        std::mem::swap(&mut best_prev, &mut best_cur);
        std::mem::swap(&mut del_prev, &mut del_cur);
    }
    Ok(best_prev[n])
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Minimum over every path through the edit graph, tracking the previous
    /// operation so that gap openings are charged once per run.
    fn enumerate(p: &[u8], t: &[u8], pen: &Penalties) -> u64 {
        #[derive(Clone, Copy, PartialEq)]
        enum Last {
            Diag,
            Ins,
            Del,
        }
        fn walk(p: &[u8], t: &[u8], pen: &Penalties, last: Last, cost: u64, best: &mut u64) {
            if cost >= *best {
                return;
            }
            if p.is_empty() && t.is_empty() {
                *best = cost;
                return;
            }
            if !p.is_empty() && !t.is_empty() {
                let c = if p[0] == t[0] { 0 } else { pen.mismatch as u64 };
                walk(&p[1..], &t[1..], pen, Last::Diag, cost + c, best);
            }
            if !t.is_empty() {
                let open = if last == Last::Ins { 0 } else { pen.gap_open as u64 };
                walk(p, &t[1..], pen, Last::Ins, cost + open + pen.gap_extend as u64, best);
            }
            if !p.is_empty() {
                let open = if last == Last::Del { 0 } else { pen.gap_open as u64 };
                walk(&p[1..], t, pen, Last::Del, cost + open + pen.gap_extend as u64, best);
            }
        }
        let mut best = u64::MAX;
        walk(p, t, pen, Last::Diag, 0, &mut best);
        best
    }

    fn all_strings(max_len: usize) -> Vec<Vec<u8>> {
        let mut out = Vec::new();
        for len in 1..=max_len {
            for bits in 0..(1u32 << len) {
                out.push((0..len).map(|i| if bits >> i & 1 == 1 { b'C' } else { b'A' }).collect());
            }
        }
        out
    }

    #[test]
    fn trivial_examples() {
        let pen = Penalties::default();
        let p = SequencePair::new("GATTACA", "GATTACA").unwrap();
        assert_eq!(gotoh_oracle(&p, &pen, DEFAULT_ORACLE_CAP), Ok(0));
        let p = SequencePair::new("A", "C").unwrap();
        assert_eq!(gotoh_oracle(&p, &pen, DEFAULT_ORACLE_CAP), Ok(4));
        let p = SequencePair::new("AAAA", "AAAAA").unwrap();
        assert_eq!(gotoh_oracle(&p, &pen, DEFAULT_ORACLE_CAP), Ok(8));
        let p = SequencePair::new("GATTACA", "GACTACA").unwrap();
        assert_eq!(gotoh_oracle(&p, &pen, DEFAULT_ORACLE_CAP), Ok(4));
    }

    #[test]
    fn cap_is_enforced() {
        let p = SequencePair::new(vec![b'A'; 100], vec![b'A'; 100]).unwrap();
        assert_eq!(
            gotoh_oracle(&p, &Penalties::default(), 9_999),
            Err(OracleError { cells: 10_000, cap: 9_999 })
        );
    }

    #[test]
    fn matches_exhaustive_enumeration_over_binary_alphabet() {
        let strings = all_strings(6);
        for pen in [Penalties::default(), Penalties::new(1, 0, 1).unwrap(), Penalties::new(7, 1, 3).unwrap()] {
            for p in &strings {
                for t in &strings {
                    let pair = SequencePair::new(p.clone(), t.clone()).unwrap();
                    assert_eq!(
                        gotoh_oracle(&pair, &pen, DEFAULT_ORACLE_CAP).unwrap(),
                        enumerate(p, t, &pen),
                        "{:?} vs {:?} under {pen}",
                        std::str::from_utf8(p).unwrap(),
                        std::str::from_utf8(t).unwrap(),
                    );
                }
            }
        }
    }
}
