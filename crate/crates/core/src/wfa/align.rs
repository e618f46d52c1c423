//! Arena-backed WFA driver.
//!
//! Each wavefront component gets a home block in the arena (WRAM while the
//! budget lasts, MRAM after that). Computation happens on a small WRAM
//! working set: four source slots (`M[s-x]`, `M[s-o-e]`, `I[s-e]`, `D[s-e]`)
//! and three output slots (`M[s]`, `I[s]`, `D[s]`). Components whose home is
//! in MRAM are staged through these slots a tile of diagonals at a time, so a
//! component wider than the working set is streamed rather than rejected.

use crate::arena::{round_up, Arena, ArenaMemory, Region, Tier, TierHint};

use super::backtrace::{backtrace, OffsetLookup};
use super::wavefront::{
    compute_cells, extend_cells, next_range, Component, PredecessorScores, Presence, Sources,
    Window, NULL_OFFSET,
};
use super::{AlignError, Alignment, Dims, Limits, Penalties, SequencePair};

/// Work counters for one alignment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AlignStats {
    /// Cells written by the successor recurrence, summed over present components.
    pub cells_computed: u64,
    /// Byte comparisons made while extending.
    pub extend_comparisons: u64,
}

/// Aligns `pair` end-to-end, allocating all wavefront memory from `arena`.
pub fn align<M: ArenaMemory>(
    pair: &SequencePair,
    penalties: &Penalties,
    arena: &mut Arena<M>,
    limits: Limits,
) -> Result<Alignment, AlignError> {
    align_with_stats(pair, penalties, arena, limits).map(|(a, _)| a)
}

pub fn align_with_stats<M: ArenaMemory>(
    pair: &SequencePair,
    penalties: &Penalties,
    arena: &mut Arena<M>,
    limits: Limits,
) -> Result<(Alignment, AlignStats), AlignError> {
    pair.validate()?;
    penalties.validate()?;
    let mut driver = Driver::new(arena, pair, penalties)?;
    let score = driver.run(limits)?;
    let cigar = backtrace(&mut driver, pair, penalties, score)?;
    Ok((Alignment { score, cigar }, driver.stats))
}

/// A component's diagonal range and home block (`i32` per diagonal, LE).
#[derive(Debug, Clone, Copy)]
struct Stored {
    lo: i32,
    hi: i32,
    home: Region,
}

#[derive(Debug, Clone, Copy, Default)]
struct StoredSet {
    m: Option<Stored>,
    i: Option<Stored>,
    d: Option<Stored>,
}

impl StoredSet {
    fn get(&self, c: Component) -> Option<Stored> {
        match c {
            Component::M => self.m,
            Component::I => self.i,
            Component::D => self.d,
        }
    }
}

/// WRAM working set. `tile` diagonals are processed per pass; source slots
/// hold the one-diagonal halo on each side plus one entry of alignment slack.
struct Slots {
    tile: usize,
    sources: [Region; 4],
    outputs: [Region; 3],
    word: Region,
}

const SRC_MISMATCH: usize = 0;
const SRC_OPEN: usize = 1;
const SRC_INS: usize = 2;
const SRC_DEL: usize = 3;

impl Slots {
    fn bytes_for(tile: usize) -> usize {
        4 * 4 * (tile + 4) + 3 * 4 * tile + 8
    }

    fn allocate<M: ArenaMemory>(arena: &mut Arena<M>, dims: Dims) -> Result<Self, AlignError> {
        let widest = dims.max_width().next_multiple_of(2);
        let fit = (arena.wram_remaining().saturating_sub(Self::bytes_for(0)) / 28) & !1;
        let tile = widest.min(fit).max(2);
        let mut src = || arena.alloc(4 * (tile + 4), TierHint::Wram);
        let sources = [src()?, src()?, src()?, src()?];
        let mut out = || arena.alloc(4 * tile, TierHint::Wram);
        let outputs = [out()?, out()?, out()?];
        let word = arena.alloc(8, TierHint::Wram)?;
        Ok(Self {
            tile,
            sources,
            outputs,
            word,
        })
    }
}

struct Driver<'a, M> {
    arena: &'a mut Arena<M>,
    pair: &'a SequencePair,
    penalties: &'a Penalties,
    dims: Dims,
    slots: Slots,
    sets: Vec<Option<StoredSet>>,
    windows: [Vec<i32>; 4],
    tiles: [Vec<i32>; 3],
    stats: AlignStats,
}

impl<'a, M: ArenaMemory> Driver<'a, M> {
    fn new(
        arena: &'a mut Arena<M>,
        pair: &'a SequencePair,
        penalties: &'a Penalties,
    ) -> Result<Self, AlignError> {
        let dims = Dims::of(pair);
        let slots = Slots::allocate(arena, dims)?;
        Ok(Self {
            arena,
            pair,
            penalties,
            dims,
            slots,
            sets: Vec::new(),
            windows: Default::default(),
            tiles: Default::default(),
            stats: AlignStats::default(),
        })
    }

    fn lookup(&self, score: Option<u32>, c: Component) -> Option<Stored> {
        self.sets.get(score? as usize)?.as_ref()?.get(c)
    }

    fn alloc_component(&mut self, lo: i32, hi: i32) -> Result<Stored, AlignError> {
        let home = self
            .arena
            .alloc(4 * (hi - lo + 1) as usize, TierHint::Auto)?;
        Ok(Stored { lo, hi, home })
    }

    /// Runs the score loop and returns the optimal score.
    fn run(&mut self, limits: Limits) -> Result<u32, AlignError> {
        let k_end = self.pair.final_diagonal();
        let text_len = self.dims.text_len;

        let m0 = self.alloc_component(0, 0)?;
        let mut origin = [0i32];
        self.stats.extend_comparisons +=
            extend_cells(0, &mut origin, &self.pair.pattern, &self.pair.text);
        write_tile(self.arena, &m0, 0, &origin, self.slots.outputs[0])?;
        self.sets.push(Some(StoredSet {
            m: Some(m0),
            ..Default::default()
        }));
        if k_end == 0 && origin[0] >= text_len {
            return Ok(0);
        }

        let mut score = 0u32;
        loop {
            score += 1;
            if let Some(limit) = limits.max_score {
                if score > limit {
                    return Err(AlignError::ScoreLimitExceeded { limit });
                }
            }
            let (set, done) = self.next(score)?;
            self.sets.push(set);
            if done {
                return Ok(score);
            }
        }
    }

    /// Computes, extends and stores the set at `score`. Returns whether its
    /// `M` component reached the end of both sequences.
    fn next(&mut self, score: u32) -> Result<(Option<StoredSet>, bool), AlignError> {
        let pred = PredecessorScores::of(score, self.penalties);
        let sources = [
            self.lookup(pred.mismatch, Component::M),
            self.lookup(pred.open, Component::M),
            self.lookup(pred.extend, Component::I),
            self.lookup(pred.extend, Component::D),
        ];
        let Some((lo, hi)) = next_range(sources.iter().flatten().map(|s| (s.lo, s.hi)), self.dims)
        else {
            return Ok((None, false));
        };
        let presence = Presence::of(
            sources[SRC_MISMATCH].is_some(),
            sources[SRC_OPEN].is_some(),
            sources[SRC_INS].is_some(),
            sources[SRC_DEL].is_some(),
        );
        let set = StoredSet {
            m: Some(self.alloc_component(lo, hi)?),
            i: presence.i.then(|| self.alloc_component(lo, hi)).transpose()?,
            d: presence.d.then(|| self.alloc_component(lo, hi)).transpose()?,
        };

        let k_end = self.pair.final_diagonal();
        let mut done = false;
        let tile = self.slots.tile;
        let mut a = lo;
        while a <= hi {
            let b = (a + tile as i32 - 1).min(hi);
            let count = (b - a + 1) as usize;
            for (idx, src) in sources.iter().enumerate() {
                if let Some(src) = src {
                    read_window(
                        self.arena,
                        src,
                        a - 1,
                        b + 1,
                        self.slots.sources[idx],
                        &mut self.windows[idx],
                    )?;
                }
            }
            let window = |idx: usize| {
                sources[idx].map(|_| Window {
                    lo: a - 1,
                    offsets: &self.windows[idx],
                })
            };
            let view = Sources {
                mismatch: window(SRC_MISMATCH),
                open: window(SRC_OPEN),
                ins_extend: window(SRC_INS),
                del_extend: window(SRC_DEL),
            };
            let [m, i, d] = &mut self.tiles;
            for t in [&mut *m, &mut *i, &mut *d] {
                t.clear();
                t.resize(count, NULL_OFFSET);
            }
            compute_cells(&view, a, self.dims, m, i, d);
            self.stats.extend_comparisons +=
                extend_cells(a, m, &self.pair.pattern, &self.pair.text);
            if (a..=b).contains(&k_end) && m[(k_end - a) as usize] >= self.dims.text_len {
                done = true;
            }

            let outputs = [set.m, set.i, set.d];
            for (slot, (stored, values)) in outputs.iter().zip(self.tiles.iter()).enumerate() {
                if let Some(stored) = stored {
                    write_tile(self.arena, stored, a, values, self.slots.outputs[slot])?;
                }
            }
            a = b + 1;
        }
        self.stats.cells_computed += presence.count() * (hi - lo + 1) as u64;
        Ok((Some(set), done))
    }
}

/// Loads diagonals `a..=b` of `c` into `out`, NULL outside the component.
/// MRAM-resident data is staged through `slot` in 8-byte aligned chunks.
fn read_window<M: ArenaMemory>(
    arena: &mut Arena<M>,
    c: &Stored,
    a: i32,
    b: i32,
    slot: Region,
    out: &mut Vec<i32>,
) -> Result<(), AlignError> {
    out.clear();
    out.resize((b - a + 1) as usize, NULL_OFFSET);
    let (ca, cb) = (a.max(c.lo), b.min(c.hi));
    if ca > cb {
        return Ok(());
    }
    let first = (ca - c.lo) as usize;
    let count = (cb - ca + 1) as usize;
    let dest = &mut out[(ca - a) as usize..][..count];
    match c.home.tier {
        Tier::Wram => arena.load_i32s(c.home.offset + 4 * first, dest)?,
        Tier::Mram => {
            let start = (4 * first) & !7;
            let end = round_up(4 * (first + count));
            arena.stage_in(c.home.sub(start, end - start), slot.sub(0, end - start))?;
            arena.load_i32s(slot.offset + 4 * first - start, dest)?;
        }
    }
    Ok(())
}

/// Stores `values` as diagonals starting at `a`. `a - c.lo` must be even so
/// that the tile starts on an 8-byte boundary of the home block.
fn write_tile<M: ArenaMemory>(
    arena: &mut Arena<M>,
    c: &Stored,
    a: i32,
    values: &[i32],
    slot: Region,
) -> Result<(), AlignError> {
    let first = (a - c.lo) as usize;
    debug_assert!(first.is_multiple_of(2));
    match c.home.tier {
        Tier::Wram => arena.store_i32s(c.home.offset + 4 * first, values)?,
        Tier::Mram => {
            arena.store_i32s(slot.offset, values)?;
            if values.len() % 2 == 1 {
                arena.store_i32s(slot.offset + 4 * values.len(), &[NULL_OFFSET])?;
            }
            let size = round_up(4 * values.len());
            arena.stage_out(slot.sub(0, size), c.home.sub(4 * first, size))?;
        }
    }
    Ok(())
}

impl<M: ArenaMemory> OffsetLookup for Driver<'_, M> {
    fn offset(&mut self, score: u32, c: Component, k: i32) -> Result<i32, AlignError> {
        let Some(stored) = self.lookup(Some(score), c) else {
            return Ok(NULL_OFFSET);
        };
        let mut buf = std::mem::take(&mut self.windows[0]);
        let res = read_window(self.arena, &stored, k, k, self.slots.word, &mut buf);
        let h = buf[0];
        self.windows[0] = buf;
        res.map(|_| h)
    }
}
