//! Software model of a processing-in-memory system.
//!
//! A machine is a set of isolated DPUs. Each DPU owns a 64 MiB MRAM bank and a
//! 64 KiB WRAM scratchpad shared by up to 24 tasklets. The host can only move
//! data in and out of MRAM; tasklets compute on WRAM and move data between the
//! two with DMA. Every host transfer and DMA must be 8-byte aligned.
//!
//! Tasklets are scheduled cooperatively in a fixed order. Kernels must not
//! depend on the order: the tests run every kernel under both schedules.

mod audit;
mod mram;

use std::error::Error;
use std::ops::{AddAssign, Range};

use rayon::prelude::*;
use thiserror::Error;

pub use audit::{write_log, AuditRecord, TransferKind};
pub use mram::SparseMemory;

pub const MAX_TASKLETS: usize = 24;
pub const ACCESS_ALIGNMENT: usize = 8;

pub type KernelError = Box<dyn Error + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MachineConfig {
    pub num_dpus: usize,
    pub tasklets_per_dpu: usize,
    pub mram_bytes: usize,
    pub wram_bytes: usize,
    pub dma_max_bytes: usize,
}

impl Default for MachineConfig {
    fn default() -> Self {
        Self {
            num_dpus: 2560,
            tasklets_per_dpu: 16,
            mram_bytes: 64 << 20,
            wram_bytes: 64 << 10,
            dma_max_bytes: 2048,
        }
    }
}

impl MachineConfig {
    pub fn with_shape(num_dpus: usize, tasklets_per_dpu: usize) -> Self {
        Self {
            num_dpus,
            tasklets_per_dpu,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), MachineError> {
        let bad = |msg: &str| Err(MachineError::InvalidConfig(msg.to_string()));
        if self.num_dpus == 0 {
            return bad("at least one DPU is required");
        }
        if !(1..=MAX_TASKLETS).contains(&self.tasklets_per_dpu) {
            return bad("tasklets per DPU must be in 1..=24");
        }
        if !self.mram_bytes.is_multiple_of(ACCESS_ALIGNMENT) || !self.wram_bytes.is_multiple_of(ACCESS_ALIGNMENT) {
            return bad("memory sizes must be multiples of 8");
        }
        if self.dma_max_bytes < ACCESS_ALIGNMENT || !self.dma_max_bytes.is_multiple_of(ACCESS_ALIGNMENT) {
            return bad("DMA cap must be a positive multiple of 8");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum MachineError {
    #[error("invalid machine config: {0}")]
    InvalidConfig(String),
    #[error("no DPU with id {0}")]
    NoSuchDpu(usize),
    #[error("{what} {value} is not a multiple of 8")]
    AlignmentViolation { what: &'static str, value: usize },
    #[error("MRAM range {offset}+{len} exceeds the {capacity}-byte bank")]
    MramOutOfRange {
        offset: usize,
        len: usize,
        capacity: usize,
    },
    #[error("DMA of {size} bytes outside [8, {max}] or not a multiple of 8")]
    SizeViolation { size: usize, max: usize },
    #[error("WRAM range {offset}+{len} exceeds the {capacity}-byte scratchpad")]
    WramOutOfRange {
        offset: usize,
        len: usize,
        capacity: usize,
    },
    #[error("tasklet {tasklet} wrote WRAM {offset}+{len} outside its window {window:?}")]
    WramViolation {
        tasklet: usize,
        offset: usize,
        len: usize,
        window: Range<usize>,
    },
    #[error("tasklet WRAM layout does not fit: {0}")]
    WramLayout(String),
    #[error("DPU {dpu}, tasklet {tasklet}: {source}")]
    Kernel {
        dpu: usize,
        tasklet: usize,
        #[source]
        source: KernelError,
    },
}

/// Work and traffic counters. Host fields are zero in per-tasklet counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MetricCounters {
    pub host_to_mram_bytes: u64,
    pub mram_to_host_bytes: u64,
    pub dma_count: u64,
    pub dma_bytes: u64,
    pub cells_computed: u64,
    pub extend_comparisons: u64,
    pub pairs_completed: u64,
}

impl AddAssign<&MetricCounters> for MetricCounters {
    fn add_assign(&mut self, o: &MetricCounters) {
        self.host_to_mram_bytes += o.host_to_mram_bytes;
        self.mram_to_host_bytes += o.mram_to_host_bytes;
        self.dma_count += o.dma_count;
        self.dma_bytes += o.dma_bytes;
        self.cells_computed += o.cells_computed;
        self.extend_comparisons += o.extend_comparisons;
        self.pairs_completed += o.pairs_completed;
    }
}

impl MetricCounters {
    pub fn fields(&self) -> [(&'static str, u64); 7] {
        [
            ("host_to_mram_bytes", self.host_to_mram_bytes),
            ("mram_to_host_bytes", self.mram_to_host_bytes),
            ("dma_count", self.dma_count),
            ("dma_bytes", self.dma_bytes),
            ("cells_computed", self.cells_computed),
            ("extend_comparisons", self.extend_comparisons),
            ("pairs_completed", self.pairs_completed),
        ]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DpuMetrics {
    pub host_to_mram_bytes: u64,
    pub mram_to_host_bytes: u64,
    pub tasklets: Vec<MetricCounters>,
}

impl DpuMetrics {
    pub fn total(&self) -> MetricCounters {
        let mut total = MetricCounters {
            host_to_mram_bytes: self.host_to_mram_bytes,
            mram_to_host_bytes: self.mram_to_host_bytes,
            ..Default::default()
        };
        for t in &self.tasklets {
            total += t;
        }
        total
    }

    /// Flat `key=value` record, one per DPU.
    pub fn export(&self, dpu: usize) -> String {
        let mut line = format!("dpu={dpu}");
        for (k, v) in self.total().fields() {
            line.push_str(&format!(" {k}={v}"));
        }
        line
    }
}

fn check_aligned(what: &'static str, value: usize) -> Result<(), MachineError> {
    if !value.is_multiple_of(ACCESS_ALIGNMENT) {
        return Err(MachineError::AlignmentViolation { what, value });
    }
    Ok(())
}

fn check_mram(offset: usize, len: usize, capacity: usize) -> Result<(), MachineError> {
    if offset.checked_add(len).is_none_or(|end| end > capacity) {
        return Err(MachineError::MramOutOfRange {
            offset,
            len,
            capacity,
        });
    }
    Ok(())
}

fn check_wram(offset: usize, len: usize, capacity: usize) -> Result<(), MachineError> {
    if offset.checked_add(len).is_none_or(|end| end > capacity) {
        return Err(MachineError::WramOutOfRange {
            offset,
            len,
            capacity,
        });
    }
    Ok(())
}

/// Memory images and counters of one DPU.
#[derive(Debug, Clone)]
pub struct DpuState {
    id: usize,
    config: MachineConfig,
    mram: SparseMemory,
    wram: Vec<u8>,
    metrics: DpuMetrics,
    audit: Option<Vec<AuditRecord>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DmaDirection {
    MramToWram,
    WramToMram,
}

impl DpuState {
    fn new(id: usize, config: MachineConfig, audit: bool) -> Self {
        Self {
            id,
            config,
            mram: SparseMemory::new(config.mram_bytes),
            wram: vec![0; config.wram_bytes],
            metrics: DpuMetrics {
                tasklets: vec![MetricCounters::default(); config.tasklets_per_dpu],
                ..Default::default()
            },
            audit: audit.then(Vec::new),
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn metrics(&self) -> &DpuMetrics {
        &self.metrics
    }

    pub fn audit_log(&self) -> &[AuditRecord] {
        self.audit.as_deref().unwrap_or(&[])
    }

    pub fn wram(&self) -> &[u8] {
        &self.wram
    }

    /// Reads MRAM without counting it as a host transfer.
    pub fn peek_mram(&self, offset: usize, len: usize) -> Vec<u8> {
        let mut buf = vec![0; len];
        self.mram.read(offset, &mut buf);
        buf
    }

    pub fn mram_resident_bytes(&self) -> usize {
        self.mram.resident_bytes()
    }

    fn log(&mut self, record: AuditRecord) {
        if let Some(log) = self.audit.as_mut() {
            log.push(record);
        }
    }

    pub fn host_write_mram(&mut self, offset: usize, data: &[u8]) -> Result<(), MachineError> {
        self.log(AuditRecord {
            kind: TransferKind::HostToMram,
            dpu: self.id,
            tasklet: None,
            mram_offset: offset,
            wram_offset: None,
            size: data.len(),
        });
        check_aligned("MRAM offset", offset)?;
        check_aligned("transfer length", data.len())?;
        check_mram(offset, data.len(), self.config.mram_bytes)?;
        self.mram.write(offset, data);
        self.metrics.host_to_mram_bytes += data.len() as u64;
        Ok(())
    }

    pub fn host_read_mram(&mut self, offset: usize, len: usize) -> Result<Vec<u8>, MachineError> {
        self.log(AuditRecord {
            kind: TransferKind::MramToHost,
            dpu: self.id,
            tasklet: None,
            mram_offset: offset,
            wram_offset: None,
            size: len,
        });
        check_aligned("MRAM offset", offset)?;
        check_aligned("transfer length", len)?;
        check_mram(offset, len, self.config.mram_bytes)?;
        self.metrics.mram_to_host_bytes += len as u64;
        Ok(self.peek_mram(offset, len))
    }

    /// One DMA transfer. `writable` restricts the WRAM bytes a tasklet may
    /// overwrite; `None` means the whole scratchpad.
    fn dma(
        &mut self,
        tasklet: Option<usize>,
        writable: Option<&Range<usize>>,
        direction: DmaDirection,
        mram_offset: usize,
        wram_offset: usize,
        size: usize,
    ) -> Result<(), MachineError> {
        self.log(AuditRecord {
            kind: match direction {
                DmaDirection::MramToWram => TransferKind::MramToWram,
                DmaDirection::WramToMram => TransferKind::WramToMram,
            },
            dpu: self.id,
            tasklet,
            mram_offset,
            wram_offset: Some(wram_offset),
            size,
        });
        check_aligned("MRAM offset", mram_offset)?;
        check_aligned("WRAM offset", wram_offset)?;
        if size < ACCESS_ALIGNMENT || size > self.config.dma_max_bytes || !size.is_multiple_of(ACCESS_ALIGNMENT)
        {
            return Err(MachineError::SizeViolation {
                size,
                max: self.config.dma_max_bytes,
            });
        }
        check_mram(mram_offset, size, self.config.mram_bytes)?;
        check_wram(wram_offset, size, self.config.wram_bytes)?;
        match direction {
            DmaDirection::MramToWram => {
                if let (Some(window), Some(t)) = (writable, tasklet) {
                    check_window(t, window, wram_offset, size)?;
                }
                self.mram
                    .read(mram_offset, &mut self.wram[wram_offset..wram_offset + size]);
            }
            DmaDirection::WramToMram => {
                self.mram
                    .write(mram_offset, &self.wram[wram_offset..wram_offset + size]);
            }
        }
        if let Some(t) = tasklet {
            let c = &mut self.metrics.tasklets[t];
            c.dma_count += 1;
            c.dma_bytes += size as u64;
        }
        Ok(())
    }
}

fn check_window(
    tasklet: usize,
    window: &Range<usize>,
    offset: usize,
    len: usize,
) -> Result<(), MachineError> {
    if offset < window.start || offset + len > window.end {
        return Err(MachineError::WramViolation {
            tasklet,
            offset,
            len,
            window: window.clone(),
        });
    }
    Ok(())
}

/// A tasklet's view of its DPU during a kernel step.
pub struct TaskletCtx<'a> {
    dpu: &'a mut DpuState,
    tasklet: usize,
    window: Range<usize>,
}

impl TaskletCtx<'_> {
    pub fn tasklet(&self) -> usize {
        self.tasklet
    }

    pub fn tasklets(&self) -> usize {
        self.dpu.config.tasklets_per_dpu
    }

    pub fn dpu(&self) -> usize {
        self.dpu.id
    }

    pub fn config(&self) -> &MachineConfig {
        &self.dpu.config
    }

    /// WRAM bytes this tasklet may write.
    pub fn window(&self) -> Range<usize> {
        self.window.clone()
    }

    pub fn wram_read(&self, offset: usize, buf: &mut [u8]) -> Result<(), MachineError> {
        check_wram(offset, buf.len(), self.dpu.config.wram_bytes)?;
        buf.copy_from_slice(&self.dpu.wram[offset..offset + buf.len()]);
        Ok(())
    }

    pub fn wram_write(&mut self, offset: usize, data: &[u8]) -> Result<(), MachineError> {
        check_wram(offset, data.len(), self.dpu.config.wram_bytes)?;
        check_window(self.tasklet, &self.window, offset, data.len())?;
        self.dpu.wram[offset..offset + data.len()].copy_from_slice(data);
        Ok(())
    }

    pub fn dma(
        &mut self,
        direction: DmaDirection,
        mram_offset: usize,
        wram_offset: usize,
        size: usize,
    ) -> Result<(), MachineError> {
        self.dpu.dma(
            Some(self.tasklet),
            Some(&self.window),
            direction,
            mram_offset,
            wram_offset,
            size,
        )
    }

    /// Splits a transfer of any multiple of 8 into DMAs no larger than the cap.
    pub fn dma_chunked(
        &mut self,
        direction: DmaDirection,
        mram_offset: usize,
        wram_offset: usize,
        size: usize,
    ) -> Result<(), MachineError> {
        let max = self.dpu.config.dma_max_bytes;
        let mut done = 0;
        while done < size {
            let n = (size - done).min(max);
            self.dma(direction, mram_offset + done, wram_offset + done, n)?;
            done += n;
        }
        Ok(())
    }

    pub fn counters(&mut self) -> &mut MetricCounters {
        &mut self.dpu.metrics.tasklets[self.tasklet]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Continue,
    Done,
}

/// Code run by every tasklet of every DPU.
///
/// Per-tasklet state lives in `Tasklet`; anything shared must be read-only.
pub trait DpuKernel: Sync {
    type Tasklet: Send;

    fn start(&self, ctx: &mut TaskletCtx<'_>) -> Result<Self::Tasklet, KernelError>;

    fn step(&self, state: &mut Self::Tasklet, ctx: &mut TaskletCtx<'_>) -> Result<Step, KernelError>;
}

/// Order in which a DPU's tasklets take turns.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Schedule {
    /// Each tasklet runs to completion before the next one starts.
    Sequential,
    /// Tasklets take one step each in turn.
    #[default]
    RoundRobin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LaunchOptions {
    pub schedule: Schedule,
    /// WRAM bytes kept for stacks and globals before the tasklet windows.
    pub wram_reserved: usize,
}

impl Default for LaunchOptions {
    fn default() -> Self {
        Self {
            schedule: Schedule::RoundRobin,
            wram_reserved: 8 << 10,
        }
    }
}

/// WRAM window of each tasklet: an equal share of what is not reserved.
pub fn tasklet_windows(
    config: &MachineConfig,
    reserved: usize,
) -> Result<Vec<Range<usize>>, MachineError> {
    let share = config
        .wram_bytes
        .checked_sub(reserved)
        .map(|free| free / config.tasklets_per_dpu / ACCESS_ALIGNMENT * ACCESS_ALIGNMENT)
        .filter(|&s| s > 0)
        .ok_or_else(|| {
            MachineError::WramLayout(format!(
                "{} bytes reserved of {} leaves nothing for {} tasklets",
                reserved, config.wram_bytes, config.tasklets_per_dpu
            ))
        })?;
    let base = reserved.next_multiple_of(ACCESS_ALIGNMENT);
    Ok((0..config.tasklets_per_dpu)
        .map(|t| base + t * share..base + (t + 1) * share)
        .filter(|w| w.end <= config.wram_bytes)
        .collect())
}

pub struct PimMachine {
    config: MachineConfig,
    dpus: Vec<DpuState>,
}

impl PimMachine {
    pub fn new(config: MachineConfig) -> Result<Self, MachineError> {
        Self::build(config, false)
    }

    /// A machine that logs every host transfer and DMA.
    pub fn with_audit(config: MachineConfig) -> Result<Self, MachineError> {
        Self::build(config, true)
    }

    fn build(config: MachineConfig, audit: bool) -> Result<Self, MachineError> {
        config.validate()?;
        let dpus = (0..config.num_dpus)
            .map(|id| DpuState::new(id, config, audit))
            .collect();
        Ok(Self { config, dpus })
    }

    pub fn config(&self) -> &MachineConfig {
        &self.config
    }

    pub fn dpus(&self) -> &[DpuState] {
        &self.dpus
    }

    /// Mutable access for parallel host transfers; DPU states are disjoint.
    pub fn dpus_mut(&mut self) -> &mut [DpuState] {
        &mut self.dpus
    }

    fn dpu_mut(&mut self, dpu: usize) -> Result<&mut DpuState, MachineError> {
        self.dpus.get_mut(dpu).ok_or(MachineError::NoSuchDpu(dpu))
    }

    pub fn host_write_mram(&mut self, dpu: usize, offset: usize, data: &[u8]) -> Result<(), MachineError> {
        self.dpu_mut(dpu)?.host_write_mram(offset, data)
    }

    pub fn host_read_mram(&mut self, dpu: usize, offset: usize, len: usize) -> Result<Vec<u8>, MachineError> {
        self.dpu_mut(dpu)?.host_read_mram(offset, len)
    }

    /// A DMA issued outside any tasklet, e.g. by a test harness.
    pub fn dma(
        &mut self,
        dpu: usize,
        direction: DmaDirection,
        mram_offset: usize,
        wram_offset: usize,
        size: usize,
    ) -> Result<(), MachineError> {
        self.dpu_mut(dpu)?
            .dma(None, None, direction, mram_offset, wram_offset, size)
    }

    pub fn audit_log(&self) -> impl Iterator<Item = &AuditRecord> {
        self.dpus.iter().flat_map(|d| d.audit_log())
    }

    /// Counters summed over all DPUs.
    pub fn totals(&self) -> MetricCounters {
        let mut total = MetricCounters::default();
        for d in &self.dpus {
            total += &d.metrics.total();
        }
        total
    }

    /// Runs `kernel` on every DPU until all tasklets report [`Step::Done`].
    /// DPUs are simulated in parallel. Returns each DPU's counter totals.
    pub fn launch<K: DpuKernel>(
        &mut self,
        kernel: &K,
        options: LaunchOptions,
    ) -> Result<Vec<MetricCounters>, MachineError> {
        let windows = tasklet_windows(&self.config, options.wram_reserved)?;
        if windows.len() != self.config.tasklets_per_dpu {
            return Err(MachineError::WramLayout("tasklet windows overflow WRAM".into()));
        }
        self.dpus
            .par_iter_mut()
            .map(|dpu| run_dpu(dpu, kernel, &windows, options.schedule))
            .collect::<Vec<_>>()
            .into_iter()
            .collect::<Result<(), _>>()?;
        Ok(self.dpus.iter().map(|d| d.metrics.total()).collect())
    }
}

fn run_dpu<K: DpuKernel>(
    dpu: &mut DpuState,
    kernel: &K,
    windows: &[Range<usize>],
    schedule: Schedule,
) -> Result<(), MachineError> {
    let id = dpu.id;
    let wrap = |tasklet: usize| move |source: KernelError| MachineError::Kernel { dpu: id, tasklet, source };
    let mut states = Vec::with_capacity(windows.len());
    for (t, window) in windows.iter().enumerate() {
        let mut ctx = TaskletCtx {
            dpu: &mut *dpu,
            tasklet: t,
            window: window.clone(),
        };
        states.push(Some(kernel.start(&mut ctx).map_err(wrap(t))?));
    }

    let step = |t: usize, state: &mut K::Tasklet, dpu: &mut DpuState| -> Result<Step, MachineError> {
        let mut ctx = TaskletCtx {
            dpu,
            tasklet: t,
            window: windows[t].clone(),
        };
        kernel.step(state, &mut ctx).map_err(wrap(t))
    };

    match schedule {
        Schedule::Sequential => {
            for (t, state) in states.iter_mut().enumerate() {
                let state = state.as_mut().expect("tasklet started");
                while step(t, state, dpu)? == Step::Continue {}
            }
        }
        Schedule::RoundRobin => {
            let mut live = states.len();
            while live > 0 {
                for (t, slot) in states.iter_mut().enumerate() {
                    if let Some(state) = slot.as_mut() {
                        if step(t, state, dpu)? == Step::Done {
                            *slot = None;
                            live -= 1;
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(num_dpus: usize, tasklets: usize) -> MachineConfig {
        MachineConfig {
            num_dpus,
            tasklets_per_dpu: tasklets,
            mram_bytes: 1 << 20,
            wram_bytes: 64 << 10,
            dma_max_bytes: 2048,
        }
    }

    #[test]
    fn config_rules() {
        assert!(MachineConfig::default().validate().is_ok());
        assert!(small(0, 4).validate().is_err());
        assert!(small(1, 25).validate().is_err());
        assert!(small(1, 0).validate().is_err());
        assert!(small(1, 24).validate().is_ok());
    }

    #[test]
    fn host_transfers() {
        let mut m = PimMachine::new(MachineConfig::with_shape(1, 1)).unwrap();
        let data: Vec<u8> = (0..16).collect();
        m.host_write_mram(0, 0, &data).unwrap();
        assert_eq!(m.host_read_mram(0, 0, 16).unwrap(), data);
        assert!(matches!(
            m.host_write_mram(0, 12, &data),
            Err(MachineError::AlignmentViolation { .. })
        ));
        assert!(matches!(
            m.host_write_mram(0, 64 << 20, &data),
            Err(MachineError::MramOutOfRange { .. })
        ));
        assert!(matches!(
            m.host_write_mram(0, 0, &data[..12]),
            Err(MachineError::AlignmentViolation { .. })
        ));
        assert!(matches!(m.host_write_mram(1, 0, &data), Err(MachineError::NoSuchDpu(1))));
        let t = m.totals();
        assert_eq!((t.host_to_mram_bytes, t.mram_to_host_bytes), (16, 16));
    }

    #[test]
    fn dma_rules() {
        let mut m = PimMachine::new(small(1, 1)).unwrap();
        let data = [7u8; 8];
        m.host_write_mram(0, 64, &data).unwrap();
        m.dma(0, DmaDirection::MramToWram, 64, 0, 8).unwrap();
        m.dma(0, DmaDirection::WramToMram, 64, 0, 8).unwrap();
        assert_eq!(m.host_read_mram(0, 64, 8).unwrap(), data);
        assert_eq!(&m.dpus()[0].wram()[..8], &data);
        assert!(matches!(
            m.dma(0, DmaDirection::MramToWram, 0, 0, 12),
            Err(MachineError::SizeViolation { size: 12, .. })
        ));
        assert!(matches!(
            m.dma(0, DmaDirection::MramToWram, 0, 0, 4096),
            Err(MachineError::SizeViolation { size: 4096, max: 2048 })
        ));
        assert!(matches!(
            m.dma(0, DmaDirection::MramToWram, 0, 0, 0),
            Err(MachineError::SizeViolation { .. })
        ));
        assert!(matches!(
            m.dma(0, DmaDirection::MramToWram, 4, 0, 8),
            Err(MachineError::AlignmentViolation { .. })
        ));
        assert!(matches!(
            m.dma(0, DmaDirection::MramToWram, 0, (64 << 10) - 8, 16),
            Err(MachineError::WramOutOfRange { .. })
        ));
        assert!(matches!(
            m.dma(0, DmaDirection::WramToMram, (1 << 20) - 8, 0, 16),
            Err(MachineError::MramOutOfRange { .. })
        ));
    }

    #[test]
    fn windows_split_free_wram() {
        let w = tasklet_windows(&MachineConfig::default(), 8 << 10).unwrap();
        assert_eq!(w.len(), 16);
        assert_eq!(w[0], 8192..8192 + 3584);
        assert_eq!(w[15].end, 64 << 10);
        assert!(tasklet_windows(&MachineConfig::default(), 64 << 10).is_err());
    }

    struct Noop;

    impl DpuKernel for Noop {
        type Tasklet = ();
        fn start(&self, _: &mut TaskletCtx<'_>) -> Result<(), KernelError> {
            Ok(())
        }
        fn step(&self, _: &mut (), _: &mut TaskletCtx<'_>) -> Result<Step, KernelError> {
            Ok(Step::Done)
        }
    }

    #[test]
    fn noop_launch_counts_nothing() {
        let mut m = PimMachine::new(small(4, 16)).unwrap();
        let per_dpu = m.launch(&Noop, LaunchOptions::default()).unwrap();
        assert_eq!(per_dpu, vec![MetricCounters::default(); 4]);
    }

    /// Writes one byte past its window on DPU 2, tasklet 5.
    struct Trespass;

    impl DpuKernel for Trespass {
        type Tasklet = ();
        fn start(&self, _: &mut TaskletCtx<'_>) -> Result<(), KernelError> {
            Ok(())
        }
        fn step(&self, _: &mut (), ctx: &mut TaskletCtx<'_>) -> Result<Step, KernelError> {
            if ctx.dpu() == 2 && ctx.tasklet() == 5 {
                let end = ctx.window().end;
                ctx.wram_write(end, &[1])?;
            }
            Ok(Step::Done)
        }
    }

    #[test]
    fn window_violation_names_dpu_and_tasklet() {
        let mut m = PimMachine::new(small(4, 8)).unwrap();
        let err = m.launch(&Trespass, LaunchOptions::default()).unwrap_err();
        match err {
            MachineError::Kernel { dpu, tasklet, source } => {
                assert_eq!((dpu, tasklet), (2, 5));
                assert!(source.downcast_ref::<MachineError>().is_some());
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn metrics_export_is_flat() {
        let mut m = PimMachine::new(small(1, 2)).unwrap();
        m.host_write_mram(0, 0, &[0; 8]).unwrap();
        let line = m.dpus()[0].metrics().export(0);
        assert!(line.starts_with("dpu=0 host_to_mram_bytes=8 "));
        assert!(line.ends_with("pairs_completed=0"));
    }
}
