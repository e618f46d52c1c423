//! Wavefront components, the successor recurrence and exact-match extension.
//!
//! The per-diagonal kernels here work on plain slices so that the in-memory
//! history and the arena-backed driver share one implementation.

use super::backtrace::OffsetLookup;
use super::{AlignError, Dims, Limits, Penalties, SequencePair};

/// Marker for "no path reaches this diagonal". Loses every `max`.
pub const NULL_OFFSET: i32 = i32::MIN;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    M,
    I,
    D,
}

/// Furthest-reaching offsets over diagonals `lo..=hi`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WavefrontComponent {
    pub lo: i32,
    pub hi: i32,
    pub offsets: Vec<i32>,
}

impl WavefrontComponent {
    pub fn null(lo: i32, hi: i32) -> Self {
        assert!(lo <= hi, "empty diagonal range {lo}..={hi}");
        Self {
            lo,
            hi,
            offsets: vec![NULL_OFFSET; (hi - lo + 1) as usize],
        }
    }

    #[inline]
    pub fn get(&self, k: i32) -> i32 {
        if k < self.lo || k > self.hi {
            NULL_OFFSET
        } else {
            self.offsets[(k - self.lo) as usize]
        }
    }

    pub fn set(&mut self, k: i32, h: i32) {
        assert!(self.lo <= k && k <= self.hi, "diagonal {k} outside {}..={}", self.lo, self.hi);
        self.offsets[(k - self.lo) as usize] = h;
    }

    pub(crate) fn window(&self) -> Window<'_> {
        Window {
            lo: self.lo,
            offsets: &self.offsets,
        }
    }

    /// Diagonals holding a reachable offset.
    pub fn reachable(&self) -> impl Iterator<Item = (i32, i32)> + '_ {
        (self.lo..=self.hi)
            .zip(self.offsets.iter().copied())
            .filter(|&(_, h)| h != NULL_OFFSET)
    }
}

/// The M/I/D components for one score. Absent components are `None`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WavefrontSet {
    pub score: u32,
    pub m: Option<WavefrontComponent>,
    pub i: Option<WavefrontComponent>,
    pub d: Option<WavefrontComponent>,
}

impl WavefrontSet {
    /// The score-0 set: `M` on diagonal 0 at offset 0, not yet extended.
    pub fn initial() -> Self {
        let mut m = WavefrontComponent::null(0, 0);
        m.set(0, 0);
        Self {
            score: 0,
            m: Some(m),
            i: None,
            d: None,
        }
    }

    pub fn absent(score: u32) -> Self {
        Self {
            score,
            m: None,
            i: None,
            d: None,
        }
    }

    pub fn is_absent(&self) -> bool {
        self.m.is_none() && self.i.is_none() && self.d.is_none()
    }

    pub fn component(&self, c: Component) -> Option<&WavefrontComponent> {
        match c {
            Component::M => self.m.as_ref(),
            Component::I => self.i.as_ref(),
            Component::D => self.d.as_ref(),
        }
    }
}

/// Borrowed view of offsets starting at diagonal `lo`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Window<'a> {
    pub lo: i32,
    pub offsets: &'a [i32],
}

impl Window<'_> {
    #[inline]
    fn get(&self, k: i32) -> i32 {
        let idx = k as i64 - self.lo as i64;
        if idx < 0 || idx >= self.offsets.len() as i64 {
            NULL_OFFSET
        } else {
            self.offsets[idx as usize]
        }
    }
}

/// Predecessor components feeding the set at score `s`.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Sources<'a> {
    /// `M[s - x]`
    pub mismatch: Option<Window<'a>>,
    /// `M[s - o - e]`
    pub open: Option<Window<'a>>,
    /// `I[s - e]`
    pub ins_extend: Option<Window<'a>>,
    /// `D[s - e]`
    pub del_extend: Option<Window<'a>>,
}

/// Which components of the next set exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Presence {
    pub m: bool,
    pub i: bool,
    pub d: bool,
}

impl Presence {
    pub fn of(mismatch: bool, open: bool, ins_extend: bool, del_extend: bool) -> Self {
        let i = open || ins_extend;
        let d = open || del_extend;
        Self {
            m: mismatch || i || d,
            i,
            d,
        }
    }

    pub fn count(&self) -> u64 {
        self.m as u64 + self.i as u64 + self.d as u64
    }
}

/// Score indices of the predecessors of `score`, if non-negative.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PredecessorScores {
    pub mismatch: Option<u32>,
    pub open: Option<u32>,
    pub extend: Option<u32>,
}

impl PredecessorScores {
    pub fn of(score: u32, p: &Penalties) -> Self {
        Self {
            mismatch: score.checked_sub(p.mismatch),
            open: score.checked_sub(p.gap_first()),
            extend: score.checked_sub(p.gap_extend),
        }
    }
}

/// Diagonal range of the next set: one wider than its sources on each side,
/// clipped to the diagonals that exist in the DP matrix.
pub(crate) fn next_range(
    sources: impl IntoIterator<Item = (i32, i32)>,
    dims: Dims,
) -> Option<(i32, i32)> {
    let mut range: Option<(i32, i32)> = None;
    for (lo, hi) in sources {
        range = Some(match range {
            None => (lo, hi),
            Some((l, h)) => (l.min(lo), h.max(hi)),
        });
    }
    range.map(|(lo, hi)| {
        (
            (lo - 1).max(dims.min_diagonal()),
            (hi + 1).min(dims.max_diagonal()),
        )
    })
}

#[inline]
fn advance(h: i32) -> i32 {
    if h == NULL_OFFSET {
        NULL_OFFSET
    } else {
        h + 1
    }
}

#[inline]
fn source(w: &Option<Window<'_>>, k: i32) -> i32 {
    match w {
        Some(w) => w.get(k),
        None => NULL_OFFSET,
    }
}

/// Applies the successor recurrence to the diagonals starting at `first_k`.
/// All three output slices must have the same length.
pub(crate) fn compute_cells(
    src: &Sources<'_>,
    first_k: i32,
    dims: Dims,
    m: &mut [i32],
    i: &mut [i32],
    d: &mut [i32],
) {
    debug_assert!(m.len() == i.len() && i.len() == d.len());
    for (idx, ((m, i), d)) in m.iter_mut().zip(i.iter_mut()).zip(d.iter_mut()).enumerate() {
        let k = first_k + idx as i32;
        let ins = dims.check(
            k,
            advance(source(&src.open, k - 1)).max(advance(source(&src.ins_extend, k - 1))),
        );
        let del = dims.check(
            k,
            source(&src.open, k + 1).max(source(&src.del_extend, k + 1)),
        );
        let mis = dims.check(k, advance(source(&src.mismatch, k)));
        *i = ins;
        *d = del;
        *m = mis.max(ins).max(del);
    }
}

/// Slides every reachable offset along its diagonal over matching bytes.
/// Returns the number of byte comparisons performed.
pub(crate) fn extend_cells(first_k: i32, offsets: &mut [i32], pattern: &[u8], text: &[u8]) -> u64 {
    let mut comparisons = 0u64;
    for (idx, h) in offsets.iter_mut().enumerate() {
        if *h == NULL_OFFSET {
            continue;
        }
        let k = first_k + idx as i32;
        let mut t = *h as usize;
        let mut v = (*h - k) as usize;
        while v < pattern.len() && t < text.len() {
            comparisons += 1;
            if pattern[v] != text[t] {
                break;
            }
            v += 1;
            t += 1;
        }
        *h = t as i32;
    }
    comparisons
}

/// Extends `component` in place. Returns the number of byte comparisons.
pub fn wf_extend(component: &mut WavefrontComponent, pair: &SequencePair) -> u64 {
    extend_cells(component.lo, &mut component.offsets, &pair.pattern, &pair.text)
}

fn lookup(history: &[Option<WavefrontSet>], score: Option<u32>, c: Component) -> Option<&WavefrontComponent> {
    history
        .get(score? as usize)?
        .as_ref()?
        .component(c)
}

/// Computes the set at `score` from the (already extended) sets in `history`,
/// which is indexed by score.
pub fn wf_next(
    history: &[Option<WavefrontSet>],
    score: u32,
    penalties: &Penalties,
    pair: &SequencePair,
) -> WavefrontSet {
    let dims = Dims::of(pair);
    let pred = PredecessorScores::of(score, penalties);
    let mismatch = lookup(history, pred.mismatch, Component::M);
    let open = lookup(history, pred.open, Component::M);
    let ins_extend = lookup(history, pred.extend, Component::I);
    let del_extend = lookup(history, pred.extend, Component::D);

    let present = [mismatch, open, ins_extend, del_extend];
    let Some((lo, hi)) = next_range(present.iter().flatten().map(|c| (c.lo, c.hi)), dims) else {
        return WavefrontSet::absent(score);
    };
    let presence = Presence::of(
        mismatch.is_some(),
        open.is_some(),
        ins_extend.is_some(),
        del_extend.is_some(),
    );
    let sources = Sources {
        mismatch: mismatch.map(WavefrontComponent::window),
        open: open.map(WavefrontComponent::window),
        ins_extend: ins_extend.map(WavefrontComponent::window),
        del_extend: del_extend.map(WavefrontComponent::window),
    };

    let mut m = WavefrontComponent::null(lo, hi);
    let mut i = WavefrontComponent::null(lo, hi);
    let mut d = WavefrontComponent::null(lo, hi);
    compute_cells(&sources, lo, dims, &mut m.offsets, &mut i.offsets, &mut d.offsets);
    WavefrontSet {
        score,
        m: presence.m.then_some(m),
        i: presence.i.then_some(i),
        d: presence.d.then_some(d),
    }
}

/// Every wavefront set of one alignment, kept in ordinary heap memory.
///
/// This is the straightforward driver over [`wf_next`] and [`wf_extend`]; the
/// arena-backed aligner must agree with it cell for cell.
#[derive(Debug, Clone)]
pub struct WavefrontHistory {
    sets: Vec<Option<WavefrontSet>>,
    final_score: u32,
}

impl WavefrontHistory {
    pub fn compute(
        pair: &SequencePair,
        penalties: &Penalties,
        limits: Limits,
    ) -> Result<Self, AlignError> {
        pair.validate()?;
        penalties.validate()?;
        let k_end = pair.final_diagonal();
        let text_len = pair.text.len() as i32;
        let mut sets: Vec<Option<WavefrontSet>> = Vec::new();
        let mut score = 0u32;
        loop {
            if let Some(limit) = limits.max_score {
                if score > limit {
                    return Err(AlignError::ScoreLimitExceeded { limit });
                }
            }
            let mut set = if score == 0 {
                WavefrontSet::initial()
            } else {
                wf_next(&sets, score, penalties, pair)
            };
            let done = match set.m.as_mut() {
                Some(m) => {
                    wf_extend(m, pair);
                    m.get(k_end) >= text_len
                }
                None => false,
            };
            sets.push((!set.is_absent()).then_some(set));
            if done {
                return Ok(Self {
                    sets,
                    final_score: score,
                });
            }
            score += 1;
        }
    }

    pub fn sets(&self) -> &[Option<WavefrontSet>] {
        &self.sets
    }

    pub fn final_score(&self) -> u32 {
        self.final_score
    }
}

impl OffsetLookup for WavefrontHistory {
    fn offset(&mut self, score: u32, c: Component, k: i32) -> Result<i32, AlignError> {
        Ok(lookup(&self.sets, Some(score), c).map_or(NULL_OFFSET, |w| w.get(k)))
    }
}

impl OffsetLookup for &[Option<WavefrontSet>] {
    fn offset(&mut self, score: u32, c: Component, k: i32) -> Result<i32, AlignError> {
        Ok(lookup(self, Some(score), c).map_or(NULL_OFFSET, |w| w.get(k)))
    }
}
