//! Gap-affine wavefront alignment on a software model of a
//! processing-in-memory machine.
//!
//! * [`wfa`]: the exact aligner, CIGAR utilities and a quadratic oracle.
//! * [`arena`]: the two-tier (WRAM/MRAM) bump allocator the aligner runs on.
//! * [`machine`]: DPUs with MRAM banks, WRAM scratchpads, tasklets and DMA.
//! * [`host`]: batch layout, the DPU kernel, and the PIM and CPU drivers.
//! * [`seqio`]: pair and result files and the synthetic dataset generator.
//! * [`bench`]: benchmark records and the commands behind the `pimwfa` CLI.

pub mod arena;
pub mod bench;
pub mod host;
pub mod machine;
pub mod seqio;
pub mod wfa;
