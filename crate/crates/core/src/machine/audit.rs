use std::fmt;
use std::io::{self, Write};

/// Kind of data movement recorded in the audit log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransferKind {
    HostToMram,
    MramToHost,
    MramToWram,
    WramToMram,
}

impl TransferKind {
    pub fn name(self) -> &'static str {
        match self {
            TransferKind::HostToMram => "host-to-mram",
            TransferKind::MramToHost => "mram-to-host",
            TransferKind::MramToWram => "mram-to-wram",
            TransferKind::WramToMram => "wram-to-mram",
        }
    }

    pub fn is_dma(self) -> bool {
        matches!(self, TransferKind::MramToWram | TransferKind::WramToMram)
    }
}

/// One attempted transfer. Attempts are logged before they are validated, so
/// a rejected transfer still shows up when the log is scanned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuditRecord {
    pub kind: TransferKind,
    pub dpu: usize,
    pub tasklet: Option<usize>,
    pub mram_offset: usize,
    pub wram_offset: Option<usize>,
    pub size: usize,
}

impl fmt::Display for AuditRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} dpu={}", self.kind.name(), self.dpu)?;
        if let Some(t) = self.tasklet {
            write!(f, " tasklet={t}")?;
        }
        write!(f, " mram={}", self.mram_offset)?;
        if let Some(w) = self.wram_offset {
            write!(f, " wram={w}")?;
        }
        write!(f, " size={}", self.size)
    }
}

pub fn write_log<'a>(
    out: &mut impl Write,
    records: impl IntoIterator<Item = &'a AuditRecord>,
) -> io::Result<()> {
    for r in records {
        writeln!(out, "{r}")?;
    }
    Ok(())
}
