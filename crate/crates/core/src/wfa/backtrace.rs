use super::wavefront::{Component, PredecessorScores, NULL_OFFSET};
use super::{AlignError, Cigar, CigarOp, Dims, Penalties, SequencePair};

/// Random access to the offsets of a finished wavefront history.
///
/// Returns [`NULL_OFFSET`] for absent sets, absent components and diagonals
/// outside a component's range.
pub trait OffsetLookup {
    fn offset(&mut self, score: u32, component: Component, k: i32) -> Result<i32, AlignError>;
}

fn get<L: OffsetLookup + ?Sized>(
    history: &mut L,
    score: Option<u32>,
    c: Component,
    k: i32,
) -> Result<i32, AlignError> {
    match score {
        Some(s) => history.offset(s, c, k),
        None => Ok(NULL_OFFSET),
    }
}

#[inline]
fn advance(h: i32) -> i32 {
    if h == NULL_OFFSET {
        NULL_OFFSET
    } else {
        h + 1
    }
}

/// Walks from the end of the alignment back to the origin and returns the
/// CIGAR of the optimal path ending at `M[score][k_end]`.
///
/// Ties between predecessors are broken mismatch, then insertion, then
/// deletion; for gap states, opening beats extending.
pub fn backtrace<L: OffsetLookup + ?Sized>(
    history: &mut L,
    pair: &SequencePair,
    penalties: &Penalties,
    score: u32,
) -> Result<Cigar, AlignError> {
    let dims = Dims::of(pair);
    let mut ops: Vec<CigarOp> = Vec::with_capacity(pair.pattern.len() + pair.text.len());
    let mut state = Component::M;
    let mut s = score;
    let mut k = pair.final_diagonal();
    let mut h = history.offset(s, Component::M, k)?;
    if h != dims.text_len {
        return Err(AlignError::InternalInconsistency {
            score: s,
            diagonal: k,
            offset: h,
        });
    }

    loop {
        let inconsistent = AlignError::InternalInconsistency {
            score: s,
            diagonal: k,
            offset: h,
        };
        let pred = PredecessorScores::of(s, penalties);
        match state {
            Component::M => {
                if s == 0 {
                    if k != 0 || h < 0 {
                        return Err(inconsistent);
                    }
                    ops.extend(std::iter::repeat_n(CigarOp::Match, h as usize));
                    break;
                }
                let mis = dims.check(k, advance(get(history, pred.mismatch, Component::M, k)?));
                let ins = dims.check(k, history.offset(s, Component::I, k)?);
                let del = dims.check(k, history.offset(s, Component::D, k)?);
                let base = mis.max(ins).max(del);
                if base == NULL_OFFSET || base > h {
                    return Err(inconsistent);
                }
                ops.extend(std::iter::repeat_n(CigarOp::Match, (h - base) as usize));
                h = base;
                if mis == base {
                    ops.push(CigarOp::Mismatch);
                    s = pred.mismatch.expect("mismatch source exists");
                    h -= 1;
                } else if ins == base {
                    state = Component::I;
                } else {
                    state = Component::D;
                }
            }
            Component::I => {
                let from_m = advance(get(history, pred.open, Component::M, k - 1)?);
                let from_i = advance(get(history, pred.extend, Component::I, k - 1)?);
                ops.push(CigarOp::Insertion);
                if from_m == h {
                    state = Component::M;
                    s = pred.open.expect("open source exists");
                } else if from_i == h {
                    s = pred.extend.expect("extend source exists");
                } else {
                    return Err(inconsistent);
                }
                k -= 1;
                h -= 1;
            }
            Component::D => {
                let from_m = get(history, pred.open, Component::M, k + 1)?;
                let from_d = get(history, pred.extend, Component::D, k + 1)?;
                ops.push(CigarOp::Deletion);
                if from_m == h {
                    state = Component::M;
                    s = pred.open.expect("open source exists");
                } else if from_d == h {
                    s = pred.extend.expect("extend source exists");
                } else {
                    return Err(inconsistent);
                }
                k += 1;
            }
        }
    }

    Ok(Cigar::from_ops(ops.into_iter().rev()))
}
