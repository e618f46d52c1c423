//! Two-tier bump allocator for per-tasklet wavefront memory.
//!
//! Allocations are carved from a small WRAM budget first and spill to a larger
//! MRAM heap once the budget is used up. There is no `free`: the whole arena is
//! reset between pairs. Every region is 8-byte aligned and a multiple of 8
//! bytes long, so any region (or aligned sub-range of one) can be moved
//! between tiers with DMA.
//!
//! The arena only does bookkeeping. Bytes live behind an [`ArenaMemory`],
//! which is plain host memory for the CPU baseline and a tasklet's WRAM window
//! and MRAM heap when running on the machine model.

use std::error::Error;
use std::fmt;

use thiserror::Error;

pub const ALIGNMENT: usize = 8;

#[inline]
pub fn round_up(size: usize) -> usize {
    size.div_ceil(ALIGNMENT) * ALIGNMENT
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tier {
    Wram,
    Mram,
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tier::Wram => "WRAM",
            Tier::Mram => "MRAM",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TierHint {
    Wram,
    Mram,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Region {
    pub tier: Tier,
    pub offset: usize,
    pub size: usize,
}

impl Region {
    pub fn end(&self) -> usize {
        self.offset + self.size
    }

    /// `len` bytes starting `at` bytes into this region.
    pub fn sub(&self, at: usize, len: usize) -> Region {
        debug_assert!(at + len <= self.size, "sub-region {at}+{len} exceeds {}", self.size);
        Region {
            tier: self.tier,
            offset: self.offset + at,
            size: len,
        }
    }

    pub fn overlaps(&self, other: &Region) -> bool {
        self.tier == other.tier && self.offset < other.end() && other.offset < self.end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArenaConfig {
    pub wram_budget: usize,
    pub mram_heap_capacity: usize,
}

impl ArenaConfig {
    pub const MIN_WRAM_BUDGET: usize = 256;

    pub fn new(wram_budget: usize, mram_heap_capacity: usize) -> Result<Self, ArenaError> {
        if wram_budget < Self::MIN_WRAM_BUDGET || mram_heap_capacity < wram_budget {
            return Err(ArenaError::InvalidConfig {
                wram_budget,
                mram_heap_capacity,
            });
        }
        Ok(Self {
            wram_budget,
            mram_heap_capacity,
        })
    }

    /// Effectively unbounded single-tier memory, used by the CPU baseline.
    pub fn unbounded() -> Self {
        Self {
            wram_budget: usize::MAX / 4,
            mram_heap_capacity: usize::MAX / 4,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ArenaStats {
    pub wram_peak: usize,
    pub mram_peak: usize,
    pub alloc_count: u64,
    pub spill_count: u64,
    pub staged_bytes: u64,
}

impl ArenaStats {
    /// Combines stats of arenas that ran one after another or side by side.
    pub fn merge(&mut self, other: &ArenaStats) {
        self.wram_peak = self.wram_peak.max(other.wram_peak);
        self.mram_peak = self.mram_peak.max(other.mram_peak);
        self.alloc_count += other.alloc_count;
        self.spill_count += other.spill_count;
        self.staged_bytes += other.staged_bytes;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceOp {
    Alloc,
    StageIn,
    StageOut,
    Reset,
}

/// One line of the optional allocation trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEvent {
    pub op: TraceOp,
    pub tier: Option<Tier>,
    pub offset: usize,
    pub size: usize,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.op {
            TraceOp::Alloc => "alloc",
            TraceOp::StageIn => "stage_in",
            TraceOp::StageOut => "stage_out",
            TraceOp::Reset => "reset",
        };
        match self.tier {
            Some(tier) => write!(f, "{op} {tier} {} {}", self.offset, self.size),
            None => write!(f, "{op} - 0 0"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ArenaError {
    #[error("arena config invalid: wram_budget={wram_budget}, mram_heap_capacity={mram_heap_capacity}")]
    InvalidConfig {
        wram_budget: usize,
        mram_heap_capacity: usize,
    },
    #[error("cannot allocate {requested} bytes ({tier:?}): {available} bytes left")]
    CapacityExceeded {
        tier: TierHint,
        requested: usize,
        available: usize,
    },
    #[error("zero-sized allocation")]
    ZeroSize,
    #[error("region {region:?} is not 8-byte aligned")]
    AlignmentViolation { region: Region },
    #[error("buffer of {buffer} bytes cannot hold region of {region} bytes")]
    SizeMismatch { region: usize, buffer: usize },
    #[error("expected a {expected} region, got {region:?}")]
    WrongTier { expected: Tier, region: Region },
    #[error("backing memory: {0}")]
    Backend(#[source] Box<dyn Error + Send + Sync>),
}

/// Byte storage behind an arena. Offsets are relative to the tier's heap.
pub trait ArenaMemory {
    fn wram_load(&mut self, offset: usize, buf: &mut [u8]) -> Result<(), ArenaError>;
    fn wram_store(&mut self, offset: usize, data: &[u8]) -> Result<(), ArenaError>;
    fn mram_to_wram(&mut self, mram: usize, wram: usize, size: usize) -> Result<(), ArenaError>;
    fn wram_to_mram(&mut self, wram: usize, mram: usize, size: usize) -> Result<(), ArenaError>;
    /// Called before a tier's bump cursor moves past `end`.
    fn reserve(&mut self, _tier: Tier, _end: usize) {}
}

/// Growable host buffers standing in for both tiers.
#[derive(Debug, Default, Clone)]
pub struct HostMemory {
    wram: Vec<u8>,
    mram: Vec<u8>,
}

impl HostMemory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn mram(&self) -> &[u8] {
        &self.mram
    }

    fn check(buf: &[u8], offset: usize, len: usize) -> Result<(), ArenaError> {
        if offset + len > buf.len() {
            return Err(ArenaError::Backend(
                format!("access {offset}+{len} beyond {} reserved bytes", buf.len()).into(),
            ));
        }
        Ok(())
    }
}

impl ArenaMemory for HostMemory {
    fn wram_load(&mut self, offset: usize, buf: &mut [u8]) -> Result<(), ArenaError> {
        Self::check(&self.wram, offset, buf.len())?;
        buf.copy_from_slice(&self.wram[offset..offset + buf.len()]);
        Ok(())
    }

    fn wram_store(&mut self, offset: usize, data: &[u8]) -> Result<(), ArenaError> {
        Self::check(&self.wram, offset, data.len())?;
        self.wram[offset..offset + data.len()].copy_from_slice(data);
        Ok(())
    }

    fn mram_to_wram(&mut self, mram: usize, wram: usize, size: usize) -> Result<(), ArenaError> {
        Self::check(&self.mram, mram, size)?;
        Self::check(&self.wram, wram, size)?;
        self.wram[wram..wram + size].copy_from_slice(&self.mram[mram..mram + size]);
        Ok(())
    }

    fn wram_to_mram(&mut self, wram: usize, mram: usize, size: usize) -> Result<(), ArenaError> {
        Self::check(&self.mram, mram, size)?;
        Self::check(&self.wram, wram, size)?;
        self.mram[mram..mram + size].copy_from_slice(&self.wram[wram..wram + size]);
        Ok(())
    }

    fn reserve(&mut self, tier: Tier, end: usize) {
        let buf = match tier {
            Tier::Wram => &mut self.wram,
            Tier::Mram => &mut self.mram,
        };
        if buf.len() < end {
            buf.resize(end, 0);
        }
    }
}

pub struct Arena<M> {
    config: ArenaConfig,
    memory: M,
    wram_cursor: usize,
    mram_cursor: usize,
    stats: ArenaStats,
    trace: Option<Vec<TraceEvent>>,
    scratch: Vec<u8>,
}

impl<M: ArenaMemory> Arena<M> {
    pub fn new(config: ArenaConfig, memory: M) -> Self {
        Self::with_stats(config, memory, ArenaStats::default())
    }

    /// An arena whose peaks and counters continue from `stats`.
    pub fn with_stats(config: ArenaConfig, memory: M, stats: ArenaStats) -> Self {
        Self {
            config,
            memory,
            wram_cursor: 0,
            mram_cursor: 0,
            stats,
            trace: None,
            scratch: Vec::new(),
        }
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn trace(&self) -> &[TraceEvent] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn config(&self) -> &ArenaConfig {
        &self.config
    }

    pub fn stats(&self) -> ArenaStats {
        self.stats
    }

    pub fn memory(&self) -> &M {
        &self.memory
    }

    pub fn memory_mut(&mut self) -> &mut M {
        &mut self.memory
    }

    pub fn into_memory(self) -> M {
        self.memory
    }

    pub fn wram_remaining(&self) -> usize {
        self.config.wram_budget - self.wram_cursor
    }

    pub fn mram_remaining(&self) -> usize {
        self.config.mram_heap_capacity - self.mram_cursor
    }

    fn record(&mut self, op: TraceOp, tier: Option<Tier>, offset: usize, size: usize) {
        if let Some(trace) = self.trace.as_mut() {
            trace.push(TraceEvent {
                op,
                tier,
                offset,
                size,
            });
        }
    }

    fn bump(&mut self, tier: Tier, size: usize) -> Region {
        let cursor = match tier {
            Tier::Wram => &mut self.wram_cursor,
            Tier::Mram => &mut self.mram_cursor,
        };
        let region = Region {
            tier,
            offset: *cursor,
            size,
        };
        *cursor += size;
        let end = *cursor;
        match tier {
            Tier::Wram => self.stats.wram_peak = self.stats.wram_peak.max(end),
            Tier::Mram => self.stats.mram_peak = self.stats.mram_peak.max(end),
        }
        self.memory.reserve(tier, end);
        self.stats.alloc_count += 1;
        self.record(TraceOp::Alloc, Some(tier), region.offset, size);
        region
    }

    pub fn alloc(&mut self, size: usize, hint: TierHint) -> Result<Region, ArenaError> {
        if size == 0 {
            return Err(ArenaError::ZeroSize);
        }
        let rounded = size
            .checked_next_multiple_of(ALIGNMENT)
            .ok_or(ArenaError::CapacityExceeded {
                tier: hint,
                requested: size,
                available: 0,
            })?;
        let fits_wram = rounded <= self.wram_remaining();
        let fits_mram = rounded <= self.mram_remaining();
        match hint {
            TierHint::Wram if fits_wram => Ok(self.bump(Tier::Wram, rounded)),
            TierHint::Mram if fits_mram => Ok(self.bump(Tier::Mram, rounded)),
            TierHint::Auto if fits_wram => Ok(self.bump(Tier::Wram, rounded)),
            TierHint::Auto if fits_mram => {
                self.stats.spill_count += 1;
                Ok(self.bump(Tier::Mram, rounded))
            }
            _ => Err(ArenaError::CapacityExceeded {
                tier: hint,
                requested: rounded,
                available: match hint {
                    TierHint::Wram => self.wram_remaining(),
                    TierHint::Mram => self.mram_remaining(),
                    TierHint::Auto => self.wram_remaining().max(self.mram_remaining()),
                },
            }),
        }
    }

    /// Rewinds both tiers. Earlier regions become invalid; peaks are kept.
    pub fn reset(&mut self) {
        self.wram_cursor = 0;
        self.mram_cursor = 0;
        self.record(TraceOp::Reset, None, 0, 0);
    }

    fn check_transfer(&self, mram: &Region, wram: &Region) -> Result<(), ArenaError> {
        if mram.tier != Tier::Mram {
            return Err(ArenaError::WrongTier {
                expected: Tier::Mram,
                region: *mram,
            });
        }
        if wram.tier != Tier::Wram {
            return Err(ArenaError::WrongTier {
                expected: Tier::Wram,
                region: *wram,
            });
        }
        for r in [mram, wram] {
            if r.offset % ALIGNMENT != 0 || r.size % ALIGNMENT != 0 {
                return Err(ArenaError::AlignmentViolation { region: *r });
            }
        }
        if wram.size < mram.size {
            return Err(ArenaError::SizeMismatch {
                region: mram.size,
                buffer: wram.size,
            });
        }
        Ok(())
    }

    /// Copies an MRAM region into the front of a WRAM buffer.
    pub fn stage_in(&mut self, region: Region, buffer: Region) -> Result<(), ArenaError> {
        self.check_transfer(&region, &buffer)?;
        self.memory
            .mram_to_wram(region.offset, buffer.offset, region.size)?;
        self.stats.staged_bytes += region.size as u64;
        self.record(TraceOp::StageIn, Some(Tier::Mram), region.offset, region.size);
        Ok(())
    }

    /// Copies the front of a WRAM buffer out to an MRAM region.
    pub fn stage_out(&mut self, buffer: Region, region: Region) -> Result<(), ArenaError> {
        self.check_transfer(&region, &buffer)?;
        self.memory
            .wram_to_mram(buffer.offset, region.offset, region.size)?;
        self.stats.staged_bytes += region.size as u64;
        self.record(TraceOp::StageOut, Some(Tier::Mram), region.offset, region.size);
        Ok(())
    }

    pub fn load_bytes(&mut self, offset: usize, buf: &mut [u8]) -> Result<(), ArenaError> {
        self.memory.wram_load(offset, buf)
    }

    pub fn store_bytes(&mut self, offset: usize, data: &[u8]) -> Result<(), ArenaError> {
        self.memory.wram_store(offset, data)
    }

    /// Loads little-endian `i32`s from WRAM at byte `offset`.
    pub fn load_i32s(&mut self, offset: usize, out: &mut [i32]) -> Result<(), ArenaError> {
        let mut bytes = std::mem::take(&mut self.scratch);
        bytes.resize(out.len() * 4, 0);
        let res = self.memory.wram_load(offset, &mut bytes);
        if res.is_ok() {
            for (v, b) in out.iter_mut().zip(bytes.chunks_exact(4)) {
                *v = i32::from_le_bytes([b[0], b[1], b[2], b[3]]);
            }
        }
        self.scratch = bytes;
        res
    }

    /// Stores little-endian `i32`s to WRAM at byte `offset`.
    pub fn store_i32s(&mut self, offset: usize, values: &[i32]) -> Result<(), ArenaError> {
        let mut bytes = std::mem::take(&mut self.scratch);
        bytes.clear();
        bytes.extend(values.iter().flat_map(|v| v.to_le_bytes()));
        let res = self.memory.wram_store(offset, &bytes);
        self.scratch = bytes;
        res
    }
}

impl Arena<HostMemory> {
    pub fn host(config: ArenaConfig) -> Self {
        Self::new(config, HostMemory::new())
    }

    /// Single-tier arena with no practical limit, for the CPU baseline.
    pub fn unbounded() -> Self {
        Self::host(ArenaConfig::unbounded())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arena(wram: usize, mram: usize) -> Arena<HostMemory> {
        Arena::host(ArenaConfig::new(wram, mram).unwrap())
    }

    #[test]
    fn config_invariants() {
        assert!(ArenaConfig::new(255, 1024).is_err());
        assert!(ArenaConfig::new(512, 256).is_err());
        assert!(ArenaConfig::new(256, 256).is_ok());
    }

    #[test]
    fn rounding_and_bump() {
        let mut a = arena(1024, 4096);
        assert_eq!(
            a.alloc(13, TierHint::Wram).unwrap(),
            Region { tier: Tier::Wram, offset: 0, size: 16 }
        );
        assert_eq!(
            a.alloc(1, TierHint::Wram).unwrap(),
            Region { tier: Tier::Wram, offset: 16, size: 8 }
        );
        assert!(matches!(a.alloc(0, TierHint::Wram), Err(ArenaError::ZeroSize)));
    }

    #[test]
    fn small_budget_spills_after_exact_fill() {
        // Below the validated minimum, so the config is built directly.
        let config = ArenaConfig {
            wram_budget: 64,
            mram_heap_capacity: 1024,
        };
        let mut a = Arena::host(config);
        assert_eq!(a.alloc(64, TierHint::Auto).unwrap().tier, Tier::Wram);
        let r = a.alloc(8, TierHint::Auto).unwrap();
        assert_eq!(r, Region { tier: Tier::Mram, offset: 0, size: 8 });
        assert_eq!(a.stats().spill_count, 1);
    }

    #[test]
    fn auto_spills_when_budget_is_short() {
        let mut a = arena(256, 4096);
        a.alloc(192, TierHint::Auto).unwrap();
        a.alloc(64, TierHint::Auto).unwrap();
        assert_eq!(a.wram_remaining(), 0);
        let r = a.alloc(8, TierHint::Auto).unwrap();
        assert_eq!(r.tier, Tier::Mram);
        assert_eq!(r.offset, 0);
        assert_eq!(a.stats().spill_count, 1);
        assert!(matches!(
            a.alloc(8, TierHint::Wram),
            Err(ArenaError::CapacityExceeded { tier: TierHint::Wram, .. })
        ));
        assert!(matches!(
            a.alloc(8192, TierHint::Auto),
            Err(ArenaError::CapacityExceeded { .. })
        ));
    }

    #[test]
    fn reset_keeps_peaks() {
        let mut a = arena(1024, 4096);
        a.reset();
        assert_eq!(a.stats(), ArenaStats::default());
        a.alloc(100, TierHint::Wram).unwrap();
        a.alloc(40, TierHint::Mram).unwrap();
        let before = a.stats();
        a.reset();
        assert_eq!(a.stats(), before);
        assert_eq!(a.alloc(8, TierHint::Wram).unwrap().offset, 0);
        assert_eq!(a.stats().wram_peak, 104);
    }

    #[test]
    fn stage_round_trip() {
        let mut a = arena(1024, 4096);
        let buf = a.alloc(24, TierHint::Wram).unwrap();
        let home = a.alloc(24, TierHint::Mram).unwrap();
        let data: Vec<u8> = (0..24).collect();
        a.store_bytes(buf.offset, &data).unwrap();
        a.stage_out(buf, home).unwrap();
        a.store_bytes(buf.offset, &[0; 24]).unwrap();
        a.stage_in(home, buf).unwrap();
        let mut back = vec![0; 24];
        a.load_bytes(buf.offset, &mut back).unwrap();
        assert_eq!(back, data);
        assert_eq!(a.stats().staged_bytes, 48);
    }

    #[test]
    fn stage_rejects_bad_regions() {
        let mut a = arena(1024, 4096);
        let buf = a.alloc(16, TierHint::Wram).unwrap();
        let home = a.alloc(32, TierHint::Mram).unwrap();
        let unaligned = Region { offset: 12, ..home.sub(0, 16) };
        assert!(matches!(
            a.stage_in(unaligned, buf),
            Err(ArenaError::AlignmentViolation { .. })
        ));
        assert!(matches!(a.stage_in(home, buf), Err(ArenaError::SizeMismatch { .. })));
        assert!(matches!(a.stage_in(buf, home), Err(ArenaError::WrongTier { .. })));
    }

    #[test]
    fn trace_lines() {
        let mut a = arena(1024, 4096);
        a.enable_trace();
        a.alloc(13, TierHint::Wram).unwrap();
        a.reset();
        let lines: Vec<String> = a.trace().iter().map(ToString::to_string).collect();
        assert_eq!(lines, ["alloc WRAM 0 16", "reset - 0 0"]);
    }
}
