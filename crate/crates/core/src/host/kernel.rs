//! The WFA kernel run by every DPU tasklet.
//!
//! Tasklet `t` handles pairs `t, t + T, t + 2T, ...` of its DPU's batch. For
//! each pair it fetches the descriptor and both sequences into its WRAM
//! window, aligns them with an arena over that window and its MRAM heap, and
//! DMAs the encoded result into the pair's slot. Tasklets never touch each
//! other's pairs, heaps or windows, so no synchronization is needed.

use std::ops::Range;

use thiserror::Error;

use crate::arena::{round_up, Arena, ArenaConfig, ArenaError, ArenaMemory, ArenaStats, TierHint};
use crate::machine::{DmaDirection, DpuKernel, KernelError, MachineError, Step, TaskletCtx};
use crate::wfa::{align_with_stats, Limits, Penalties, SequencePair};

use super::layout::{
    decode_header, encode_result, BatchLayout, PairDescriptor, DESCRIPTOR_BYTES, HEADER_BYTES,
};

/// A pair that could not be processed, by index within its DPU's batch.
#[derive(Debug, Error)]
#[error("pair {index}: {source}")]
pub struct PairFailure {
    pub index: usize,
    #[source]
    pub source: KernelError,
}

/// Arena memory backed by a tasklet's WRAM window and MRAM heap.
pub struct TaskletMemory<'c, 'd> {
    ctx: &'c mut TaskletCtx<'d>,
    wram_base: usize,
    mram_base: usize,
}

fn backend(e: MachineError) -> ArenaError {
    ArenaError::Backend(Box::new(e))
}

impl TaskletMemory<'_, '_> {
    /// Copies batch data at absolute MRAM `mram` into arena WRAM offset `wram`.
    fn fetch(&mut self, mram: usize, wram: usize, size: usize) -> Result<(), MachineError> {
        self.ctx
            .dma_chunked(DmaDirection::MramToWram, mram, self.wram_base + wram, size)
    }

    /// Copies arena WRAM offset `wram` out to absolute MRAM `mram`.
    fn publish(&mut self, wram: usize, mram: usize, size: usize) -> Result<(), MachineError> {
        self.ctx
            .dma_chunked(DmaDirection::WramToMram, mram, self.wram_base + wram, size)
    }
}

impl ArenaMemory for TaskletMemory<'_, '_> {
    fn wram_load(&mut self, offset: usize, buf: &mut [u8]) -> Result<(), ArenaError> {
        self.ctx.wram_read(self.wram_base + offset, buf).map_err(backend)
    }

    fn wram_store(&mut self, offset: usize, data: &[u8]) -> Result<(), ArenaError> {
        self.ctx.wram_write(self.wram_base + offset, data).map_err(backend)
    }

    fn mram_to_wram(&mut self, mram: usize, wram: usize, size: usize) -> Result<(), ArenaError> {
        self.ctx
            .dma_chunked(
                DmaDirection::MramToWram,
                self.mram_base + mram,
                self.wram_base + wram,
                size,
            )
            .map_err(backend)
    }

    fn wram_to_mram(&mut self, wram: usize, mram: usize, size: usize) -> Result<(), ArenaError> {
        self.ctx
            .dma_chunked(
                DmaDirection::WramToMram,
                self.mram_base + mram,
                self.wram_base + wram,
                size,
            )
            .map_err(backend)
    }
}

pub struct WfaKernel {
    pub penalties: Penalties,
    pub limits: Limits,
}

pub struct WfaTasklet {
    layout: BatchLayout,
    next: usize,
    heap: Range<usize>,
    arena_stats: ArenaStats,
}

impl WfaTasklet {
    pub fn arena_stats(&self) -> ArenaStats {
        self.arena_stats
    }
}

impl WfaKernel {
    fn process(
        &self,
        state: &mut WfaTasklet,
        ctx: &mut TaskletCtx<'_>,
        index: usize,
    ) -> Result<(), KernelError> {
        let window = ctx.window();
        let config = ArenaConfig::new(window.len(), state.heap.len())?;
        let memory = TaskletMemory {
            wram_base: window.start,
            mram_base: state.heap.start,
            ctx: &mut *ctx,
        };
        let mut arena = Arena::with_stats(config, memory, state.arena_stats);

        let d = arena.alloc(DESCRIPTOR_BYTES, TierHint::Wram)?;
        arena
            .memory_mut()
            .fetch(state.layout.descriptor_offset(index), d.offset, DESCRIPTOR_BYTES)?;
        let mut raw = [0u8; DESCRIPTOR_BYTES];
        arena.load_bytes(d.offset, &mut raw)?;
        let desc = PairDescriptor::decode(&raw);

        let mut read = |offset: u32, len: u32| -> Result<Vec<u8>, KernelError> {
            let (offset, len) = (offset as usize, len as usize);
            let buf = arena.alloc(len.max(1), TierHint::Wram)?;
            arena
                .memory_mut()
                .fetch(offset, buf.offset, round_up(len))?;
            let mut seq = vec![0u8; len];
            arena.load_bytes(buf.offset, &mut seq)?;
            Ok(seq)
        };
        let pattern = read(desc.pattern_offset, desc.pattern_len)?;
        let text = read(desc.text_offset, desc.text_len)?;
        let pair = SequencePair::new(pattern, text)?;

        let (alignment, stats) = align_with_stats(&pair, &self.penalties, &mut arena, self.limits)?;

        arena.reset();
        let encoded = encode_result(&alignment, state.layout.cigar_capacity)?;
        let out = arena.alloc(encoded.len(), TierHint::Wram)?;
        arena.store_bytes(out.offset, &encoded)?;
        arena
            .memory_mut()
            .publish(out.offset, state.layout.result_slot(index), encoded.len())?;

        state.arena_stats = arena.stats();
        drop(arena);
        let c = ctx.counters();
        c.cells_computed += stats.cells_computed;
        c.extend_comparisons += stats.extend_comparisons;
        c.pairs_completed += 1;
        Ok(())
    }
}

impl DpuKernel for WfaKernel {
    type Tasklet = WfaTasklet;

    fn start(&self, ctx: &mut TaskletCtx<'_>) -> Result<WfaTasklet, KernelError> {
        let scratch = ctx.window().start;
        ctx.dma(DmaDirection::MramToWram, 0, scratch, HEADER_BYTES)?;
        let mut header = [0u8; HEADER_BYTES];
        ctx.wram_read(scratch, &mut header)?;
        let (count, capacity) = decode_header(&header);
        let (count, capacity) = (count as usize, capacity as usize);

        let sequences_end = if count == 0 {
            HEADER_BYTES
        } else {
            let last = HEADER_BYTES + DESCRIPTOR_BYTES * (count - 1);
            ctx.dma(DmaDirection::MramToWram, last, scratch, DESCRIPTOR_BYTES)?;
            let mut raw = [0u8; DESCRIPTOR_BYTES];
            ctx.wram_read(scratch, &mut raw)?;
            PairDescriptor::decode(&raw).sequences_end()
        };
        let layout = BatchLayout::from_parts(count, capacity, sequences_end);

        let heap_start = round_up(layout.image_end());
        let total = ctx.config().mram_bytes.saturating_sub(heap_start);
        let share = total / ctx.tasklets() / 8 * 8;
        let start = heap_start + ctx.tasklet() * share;
        Ok(WfaTasklet {
            layout,
            next: ctx.tasklet(),
            heap: start..start + share,
            arena_stats: ArenaStats::default(),
        })
    }

    fn step(&self, state: &mut WfaTasklet, ctx: &mut TaskletCtx<'_>) -> Result<Step, KernelError> {
        let index = state.next;
        if index >= state.layout.pair_count {
            return Ok(Step::Done);
        }
        self.process(state, ctx, index)
            .map_err(|source| Box::new(PairFailure { index, source }) as KernelError)?;
        state.next += ctx.tasklets();
        Ok(if state.next >= state.layout.pair_count {
            Step::Done
        } else {
            Step::Continue
        })
    }
}
