//! Host-side orchestration for both venues.
//!
//! The PIM path partitions pairs into contiguous, evenly sized DPU batches,
//! scatters the serialized batches to MRAM in parallel, launches the WFA
//! kernel and gathers the result slots back. The CPU baseline splits pairs
//! among worker threads that run the same aligner on host memory.

mod kernel;
pub mod layout;

use std::error::Error;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::arena::Arena;
use crate::machine::{
    tasklet_windows, AuditRecord, DpuMetrics, LaunchOptions, MachineConfig, MachineError,
    MetricCounters, PimMachine,
};
use crate::wfa::{align_with_stats, AlignError, Alignment, Limits, Penalties, SequencePair};

pub use kernel::{PairFailure, TaskletMemory, WfaKernel, WfaTasklet};
pub use layout::{
    deserialize_batch, deserialize_results, serialize_batch, BatchImage, BatchLayout, LayoutConfig,
    LayoutError,
};

#[derive(Debug, Error)]
pub enum HostError {
    #[error(transparent)]
    Machine(#[from] MachineError),
    #[error("DPU {dpu}: {source}")]
    Layout {
        dpu: usize,
        #[source]
        source: LayoutError,
    },
    #[error("pair {index}: {source}")]
    Pair {
        index: usize,
        #[source]
        source: Box<dyn Error + Send + Sync>,
    },
    #[error("at least one worker thread is required")]
    NoThreads,
}

/// Splits `pair_count` into `parts` counts that differ by at most one; the
/// first `pair_count % parts` parts get the extra pair.
pub fn partition(pair_count: usize, parts: usize) -> Vec<usize> {
    assert!(parts >= 1, "partition needs at least one part");
    let (base, extra) = (pair_count / parts, pair_count % parts);
    (0..parts).map(|i| base + usize::from(i < extra)).collect()
}

/// Start index of each part of a partition, plus the total at the end.
fn boundaries(counts: &[usize]) -> Vec<usize> {
    let mut starts = Vec::with_capacity(counts.len() + 1);
    let mut acc = 0;
    starts.push(0);
    for c in counts {
        acc += c;
        starts.push(acc);
    }
    starts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Venue {
    Cpu { threads: usize },
    Pim { dpus: usize, tasklets: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub venue: Venue,
    pub penalties: Penalties,
    /// Pairs per DPU (PIM) or per worker thread (CPU).
    pub pair_counts: Vec<usize>,
    pub metrics: MetricCounters,
    pub transfer_in_bytes: u64,
    pub transfer_out_bytes: u64,
    /// Informational only; excluded from every determinism check.
    pub wall: Duration,
    pub seed: Option<u64>,
}

impl RunReport {
    pub fn total_pairs(&self) -> usize {
        self.pair_counts.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PimOptions {
    pub launch: LaunchOptions,
    pub cigar_capacity: Option<usize>,
    pub limits: Limits,
    /// Record every transfer in an audit log.
    pub audit: bool,
}

/// Everything a PIM run leaves behind.
#[derive(Debug)]
pub struct PimRun {
    pub alignments: Vec<Alignment>,
    pub report: RunReport,
    /// Raw result area gathered from each DPU.
    pub result_regions: Vec<Vec<u8>>,
    pub dpu_metrics: Vec<DpuMetrics>,
    pub audit: Vec<AuditRecord>,
}

fn pair_error(index: usize, source: Box<dyn Error + Send + Sync>) -> HostError {
    HostError::Pair { index, source }
}

pub fn run_pim(
    pairs: &[SequencePair],
    penalties: &Penalties,
    config: &MachineConfig,
    options: &PimOptions,
) -> Result<(Vec<Alignment>, RunReport), HostError> {
    run_pim_detailed(pairs, penalties, config, options).map(|r| (r.alignments, r.report))
}

pub fn run_pim_detailed(
    pairs: &[SequencePair],
    penalties: &Penalties,
    config: &MachineConfig,
    options: &PimOptions,
) -> Result<PimRun, HostError> {
    let started = Instant::now();
    config.validate()?;
    penalties
        .validate()
        .map_err(|e| pair_error(0, Box::new(AlignError::from(e))))?;
    for (i, p) in pairs.iter().enumerate() {
        p.validate().map_err(|e| pair_error(i, Box::new(e)))?;
    }

    let counts = partition(pairs.len(), config.num_dpus);
    let starts = boundaries(&counts);
    let windows = tasklet_windows(config, options.launch.wram_reserved)?;
    let heap_floor = windows.first().map_or(0, |w| w.len()) * config.tasklets_per_dpu;
    let layout_config = LayoutConfig {
        mram_bytes: config.mram_bytes.saturating_sub(heap_floor),
        cigar_capacity: options.cigar_capacity,
    };

    let images: Vec<BatchImage> = (0..config.num_dpus)
        .into_par_iter()
        .map(|dpu| {
            serialize_batch(&pairs[starts[dpu]..starts[dpu + 1]], &layout_config)
                .map_err(|source| HostError::Layout { dpu, source })
        })
        .collect::<Result<_, _>>()?;

    let mut machine = if options.audit {
        PimMachine::with_audit(*config)?
    } else {
        PimMachine::new(*config)?
    };

    machine
        .dpus_mut()
        .par_iter_mut()
        .zip(&images)
        .try_for_each(|(dpu, image)| dpu.host_write_mram(0, &image.bytes))?;

    let kernel = WfaKernel {
        penalties: *penalties,
        limits: options.limits,
    };
    machine.launch(&kernel, options.launch).map_err(|e| match e {
        MachineError::Kernel { dpu, tasklet, source } => match source.downcast::<PairFailure>() {
            Ok(failure) => pair_error(starts[dpu] + failure.index, failure.source),
            Err(source) => HostError::Machine(MachineError::Kernel { dpu, tasklet, source }),
        },
        other => HostError::Machine(other),
    })?;

    let result_regions: Vec<Vec<u8>> = machine
        .dpus_mut()
        .par_iter_mut()
        .zip(&images)
        .map(|(dpu, image)| {
            let l = &image.layout;
            if l.pair_count == 0 {
                Ok(Vec::new())
            } else {
                dpu.host_read_mram(l.result_offset, l.result_bytes())
            }
        })
        .collect::<Result<_, _>>()?;

    let mut alignments = Vec::with_capacity(pairs.len());
    for (dpu, (image, area)) in images.iter().zip(&result_regions).enumerate() {
        let decoded = deserialize_results(&image.layout, area)
            .map_err(|source| HostError::Layout { dpu, source })?;
        alignments.extend(decoded);
    }

    let metrics = machine.totals();
    let report = RunReport {
        venue: Venue::Pim {
            dpus: config.num_dpus,
            tasklets: config.tasklets_per_dpu,
        },
        penalties: *penalties,
        pair_counts: counts,
        metrics,
        transfer_in_bytes: metrics.host_to_mram_bytes,
        transfer_out_bytes: metrics.mram_to_host_bytes,
        wall: started.elapsed(),
        seed: None,
    };
    Ok(PimRun {
        alignments,
        report,
        result_regions,
        dpu_metrics: machine.dpus().iter().map(|d| d.metrics().clone()).collect(),
        audit: machine.audit_log().copied().collect(),
    })
}

/// Scalar multi-threaded baseline. Each worker owns a contiguous slice of
/// the input and an unbounded host arena.
pub fn run_cpu_baseline(
    pairs: &[SequencePair],
    penalties: &Penalties,
    threads: usize,
    limits: Limits,
) -> Result<(Vec<Alignment>, RunReport), HostError> {
    if threads == 0 {
        return Err(HostError::NoThreads);
    }
    let started = Instant::now();
    let counts = partition(pairs.len(), threads);
    let starts = boundaries(&counts);

    type WorkerOutput = Result<(Vec<Alignment>, MetricCounters), HostError>;
    let outputs: Vec<WorkerOutput> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|w| {
                let (lo, hi) = (starts[w], starts[w + 1]);
                scope.spawn(move || -> WorkerOutput {
                    let mut arena = Arena::unbounded();
                    let mut counters = MetricCounters::default();
                    let mut out = Vec::with_capacity(hi - lo);
                    for (i, pair) in pairs[lo..hi].iter().enumerate() {
                        arena.reset();
                        let (a, stats) = align_with_stats(pair, penalties, &mut arena, limits)
                            .map_err(|e| pair_error(lo + i, Box::new(e)))?;
                        counters.cells_computed += stats.cells_computed;
                        counters.extend_comparisons += stats.extend_comparisons;
                        counters.pairs_completed += 1;
                        out.push(a);
                    }
                    Ok((out, counters))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("baseline worker panicked"))
            .collect()
    });

    let mut alignments = Vec::with_capacity(pairs.len());
    let mut metrics = MetricCounters::default();
    for output in outputs {
        let (out, counters) = output?;
        alignments.extend(out);
        metrics += &counters;
    }
    Ok((
        alignments,
        RunReport {
            venue: Venue::Cpu { threads },
            penalties: *penalties,
            pair_counts: counts,
            metrics,
            transfer_in_bytes: 0,
            transfer_out_bytes: 0,
            wall: started.elapsed(),
            seed: None,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_examples() {
        assert_eq!(partition(10, 4), vec![3, 3, 2, 2]);
        assert_eq!(partition(0, 4), vec![0, 0, 0, 0]);
        let big = partition(5_000_000, 2560);
        assert_eq!(big.iter().filter(|&&c| c == 1954).count(), 320);
        assert_eq!(big.iter().filter(|&&c| c == 1953).count(), 2240);
        assert_eq!(big.iter().sum::<usize>(), 5_000_000);
    }

    #[test]
    fn empty_baseline() {
        let (a, r) = run_cpu_baseline(&[], &Penalties::default(), 4, Limits::default()).unwrap();
        assert!(a.is_empty());
        assert_eq!(r.metrics, MetricCounters::default());
        assert!(matches!(
            run_cpu_baseline(&[], &Penalties::default(), 0, Limits::default()),
            Err(HostError::NoThreads)
        ));
    }
}
