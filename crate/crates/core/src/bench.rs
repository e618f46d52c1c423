//! Benchmark records and the commands behind the `pimwfa` binary.
//!
//! Work is reported in machine units rather than seconds:
//!
//! * `kernel_metric = kernel_cells + kernel_dma_bytes / 8`
//! * `total_metric = kernel_metric + (transfer_in_bytes + transfer_out_bytes) / 8`
//!
//! so a CPU record, which moves nothing over the host link, has
//! `total_metric == kernel_metric`.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::host::{run_cpu_baseline, run_pim, HostError, PimOptions, RunReport};
use crate::machine::MachineConfig;
use crate::seqio::{self, DatasetSpec, FormatError};
use crate::wfa::{gotoh_oracle, rescore_cigar, Limits, Penalties, DEFAULT_ORACLE_CAP};

/// Mismatching pair indices listed by `verify`.
const LISTED_MISMATCHES: usize = 10;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    /// 1 for failed alignments or verification, 2 for usage, 3 for I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io {
        path: path.to_owned(),
        message: e.to_string(),
    }
}

fn format_error(path: &Path, e: FormatError) -> CliError {
    match e {
        FormatError::Io(e) => io_error(path, e),
        syntax => CliError::Usage(format!("{}: {syntax}", path.display())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Cpu,
    Pim,
}

/// One `align` run, as stored in the report CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub mode: Mode,
    /// Thread count for cpu, `DPUSxTASKLETS` for pim.
    pub workers: String,
    pub error: Option<f64>,
    pub pair_count: u64,
    pub read_length: u64,
    pub penalties: String,
    pub transfer_in_bytes: u64,
    pub kernel_cells: u64,
    pub kernel_dma_bytes: u64,
    pub transfer_out_bytes: u64,
    /// Informational; never compared.
    pub wall_ms: u64,
    pub seed: Option<u64>,
}

impl BenchRecord {
    pub fn kernel_metric(&self) -> u64 {
        self.kernel_cells + self.kernel_dma_bytes / 8
    }

    pub fn total_metric(&self) -> u64 {
        self.kernel_metric() + (self.transfer_in_bytes + self.transfer_out_bytes) / 8
    }
}

/// A record with the derived metric columns appended.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub record: BenchRecord,
    pub kernel_metric: u64,
    pub total_metric: u64,
}

impl From<BenchRecord> for ReportRow {
    fn from(record: BenchRecord) -> Self {
        Self {
            kernel_metric: record.kernel_metric(),
            total_metric: record.total_metric(),
            record,
        }
    }
}

pub fn append_record(path: &Path, record: &BenchRecord) -> Result<(), CliError> {
    let fresh = fs::metadata(path).map_or(true, |m| m.len() == 0);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_error(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    w.serialize(record).map_err(|e| io_error(path, e))?;
    w.flush().map_err(|e| io_error(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<BenchRecord>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_error(path, e))?;
    r.deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| io_error(path, e))
}

/// Writes report rows as CSV, one column per [`REPORT_COLUMNS`] entry.
pub fn write_report(rows: &[ReportRow], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_COLUMNS)?;
    for row in rows {
        let r = &row.record;
        let opt = |v: Option<String>| v.unwrap_or_default();
        w.write_record([
            match r.mode {
                Mode::Cpu => "cpu".to_string(),
                Mode::Pim => "pim".to_string(),
            },
            r.workers.clone(),
            opt(r.error.map(|e| e.to_string())),
            r.pair_count.to_string(),
            r.read_length.to_string(),
            r.penalties.clone(),
            r.transfer_in_bytes.to_string(),
            r.kernel_cells.to_string(),
            r.kernel_dma_bytes.to_string(),
            r.transfer_out_bytes.to_string(),
            r.wall_ms.to_string(),
            opt(r.seed.map(|s| s.to_string())),
            row.kernel_metric.to_string(),
            row.total_metric.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const REPORT_COLUMNS: [&str; 14] = [
    "mode",
    "workers",
    "error",
    "pair_count",
    "read_length",
    "penalties",
    "transfer_in_bytes",
    "kernel_cells",
    "kernel_dma_bytes",
    "transfer_out_bytes",
    "wall_ms",
    "seed",
    "kernel_metric",
    "total_metric",
];

/// Path of the dataset description written next to a generated pair file.
pub fn sidecar_path(pairs: &Path) -> PathBuf {
    let mut name = pairs.as_os_str().to_owned();
    name.push(".spec");
    PathBuf::from(name)
}

pub fn write_sidecar(path: &Path, spec: &DatasetSpec) -> io::Result<()> {
    fs::write(
        path,
        format!(
            "pairs={}\nlen={}\nerror={}\nseed={}\n",
            spec.pair_count, spec.read_length, spec.error_threshold, spec.seed
        ),
    )
}

/// Reads a sidecar written by [`write_sidecar`]; `None` if it is missing or
/// malformed.
pub fn read_sidecar(path: &Path) -> Option<DatasetSpec> {
    let text = fs::read_to_string(path).ok()?;
    let mut spec = DatasetSpec::default();
    let mut seen = 0;
    for line in text.lines() {
        let (key, value) = line.split_once('=')?;
        match key {
            "pairs" => spec.pair_count = value.parse().ok()?,
            "len" => spec.read_length = value.parse().ok()?,
            "error" => spec.error_threshold = value.parse().ok()?,
            "seed" => spec.seed = value.parse().ok()?,
            _ => return None,
        }
        seen += 1;
    }
    (seen == 4).then_some(spec)
}

#[derive(Debug, Parser)]
#[command(name = "pimwfa", version, about = "Gap-affine WFA on a simulated PIM machine")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic read-pair file (plus a `.spec` sidecar).
    Generate(GenerateArgs),
    /// Align a pair file on the CPU baseline or the simulated PIM machine.
    Align(AlignArgs),
    /// Re-score results and compare them with the quadratic oracle.
    Verify(VerifyArgs),
    /// Turn recorded runs into a CSV with derived metric columns.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 1000)]
    pub pairs: usize,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub len: u64,
    /// Edits per pair as a fraction of the read length, in [0, 0.5].
    #[arg(long, default_value_t = 0.02)]
    pub error: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Result file: one `score<TAB>CIGAR` line per pair.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Pim)]
    pub mode: Mode,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: u64,
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(1..))]
    pub dpus: u64,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..=24))]
    pub tasklets: u64,
    /// Mismatch, gap-open and gap-extend penalties.
    #[arg(long, default_value_t = Penalties::default())]
    pub penalties: Penalties,
    /// CSV file the run's record is appended to.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long, default_value_t = Penalties::default())]
    pub penalties: Penalties,
}

#[derive(Debug, Args)]
#[command(after_help = "\
Columns: mode, workers, error, pair_count, read_length, penalties,
transfer_in_bytes, kernel_cells, kernel_dma_bytes, transfer_out_bytes,
wall_ms, seed, then the derived
  kernel_metric = kernel_cells + kernel_dma_bytes / 8
  total_metric  = kernel_metric + (transfer_in_bytes + transfer_out_bytes) / 8")]
pub struct ReportArgs {
    /// CSV of records appended by `align --report`.
    #[arg(long)]
    pub report: PathBuf,
    /// Destination CSV; standard output if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(a) => cmd_generate(&a, out),
        Command::Align(a) => cmd_align(&a, out),
        Command::Verify(a) => cmd_verify(&a, out),
        Command::Report(a) => cmd_report(&a, out),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_error(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| io_error(path, e))
}

fn say(out: &mut dyn Write, line: String) -> Result<(), CliError> {
    writeln!(out, "{line}").map_err(|e| io_error(Path::new("<stdout>"), e))
}

pub fn cmd_generate(args: &GenerateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let spec = DatasetSpec {
        pair_count: args.pairs,
        read_length: args.len as usize,
        error_threshold: args.error,
        seed: args.seed,
    };
    let pairs = seqio::generate(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut w = create(&args.out)?;
    seqio::write_pairs(&pairs, &mut w).map_err(|e| io_error(&args.out, e))?;
    let sidecar = sidecar_path(&args.out);
    write_sidecar(&sidecar, &spec).map_err(|e| io_error(&sidecar, e))?;
    say(
        out,
        format!(
            "wrote {} pairs ({} edits each) to {}",
            pairs.len(),
            spec.edits(),
            args.out.display()
        ),
    )
}

fn host_failure(e: HostError) -> CliError {
    match e {
        HostError::NoThreads => CliError::Usage(e.to_string()),
        other => CliError::Failed(other.to_string()),
    }
}

pub fn cmd_align(args: &AlignArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let started = Instant::now();
    let pairs = seqio::parse_pairs(open(&args.input)?).map_err(|e| format_error(&args.input, e))?;
    let (alignments, report, workers): (_, RunReport, _) = match args.mode {
        Mode::Cpu => {
            let (a, r) = run_cpu_baseline(
                &pairs,
                &args.penalties,
                args.threads as usize,
                Limits::default(),
            )
            .map_err(host_failure)?;
            (a, r, args.threads.to_string())
        }
        Mode::Pim => {
            let config = MachineConfig::with_shape(args.dpus as usize, args.tasklets as usize);
            let (a, r) = run_pim(&pairs, &args.penalties, &config, &PimOptions::default())
                .map_err(host_failure)?;
            (a, r, format!("{}x{}", args.dpus, args.tasklets))
        }
    };

    let mut w = create(&args.out)?;
    seqio::write_results(&alignments, &mut w).map_err(|e| io_error(&args.out, e))?;

    let sidecar = read_sidecar(&sidecar_path(&args.input));
    let record = BenchRecord {
        mode: args.mode,
        workers,
        error: sidecar.map(|s| s.error_threshold),
        pair_count: pairs.len() as u64,
        read_length: sidecar.map_or_else(
            || pairs.iter().map(|p| p.pattern.len()).max().unwrap_or(0) as u64,
            |s| s.read_length as u64,
        ),
        penalties: args.penalties.to_string(),
        transfer_in_bytes: report.transfer_in_bytes,
        kernel_cells: report.metrics.cells_computed,
        kernel_dma_bytes: report.metrics.dma_bytes,
        transfer_out_bytes: report.transfer_out_bytes,
        wall_ms: started.elapsed().as_millis() as u64,
        seed: sidecar.map(|s| s.seed),
    };
    if let Some(path) = &args.report {
        append_record(path, &record)?;
    }
    say(
        out,
        format!(
            "aligned {} pairs ({} cells, kernel_metric {}, total_metric {})",
            record.pair_count,
            record.kernel_cells,
            record.kernel_metric(),
            record.total_metric()
        ),
    )
}

/// Why a result line disagrees with the oracle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mismatch {
    Cigar(String),
    Rescored { reported: u32, rescored: u64 },
    Oracle { reported: u32, oracle: u64 },
}

/// Checks every result against its pair; returns `(index, reason)` for each
/// disagreement in ascending index order.
pub fn verify_results(
    pairs: &[crate::wfa::SequencePair],
    results: &[crate::wfa::Alignment],
    penalties: &Penalties,
) -> Result<Vec<(usize, Mismatch)>, CliError> {
    pairs
        .par_iter()
        .zip(results)
        .enumerate()
        .map(|(i, (pair, result))| {
            let rescored = match rescore_cigar(&result.cigar, pair, penalties) {
                Ok(s) => s,
                Err(e) => return Ok(Some((i, Mismatch::Cigar(e.to_string())))),
            };
            if rescored != u64::from(result.score) {
                return Ok(Some((
                    i,
                    Mismatch::Rescored {
                        reported: result.score,
                        rescored,
                    },
                )));
            }
            let oracle = gotoh_oracle(pair, penalties, DEFAULT_ORACLE_CAP)
                .map_err(|e| CliError::Usage(format!("pair {i}: {e}")))?;
            Ok((oracle != rescored).then_some((
                i,
                Mismatch::Oracle {
                    reported: result.score,
                    oracle,
                },
            )))
        })
        .filter_map(Result::transpose)
        .collect()
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let pairs = seqio::parse_pairs(open(&args.input)?).map_err(|e| format_error(&args.input, e))?;
    let results =
        seqio::parse_results(open(&args.results)?).map_err(|e| format_error(&args.results, e))?;
    if pairs.len() != results.len() {
        return Err(CliError::Usage(format!(
            "{} pairs but {} results",
            pairs.len(),
            results.len()
        )));
    }
    let mismatches = verify_results(&pairs, &results, &args.penalties)?;
    say(out, format!("{} mismatches in {} pairs", mismatches.len(), pairs.len()))?;
    if mismatches.is_empty() {
        return Ok(());
    }
    for (i, m) in mismatches.iter().take(LISTED_MISMATCHES) {
        say(out, format!("pair {i}: {m:?}"))?;
    }
    let listed: Vec<String> = mismatches
        .iter()
        .take(LISTED_MISMATCHES)
        .map(|(i, _)| i.to_string())
        .collect();
    Err(CliError::Failed(format!(
        "{} mismatches; first at pairs {}",
        mismatches.len(),
        listed.join(", ")
    )))
}

pub fn cmd_report(args: &ReportArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let rows: Vec<ReportRow> = read_records(&args.report)?
        .into_iter()
        .map(ReportRow::from)
        .collect();
    match &args.out {
        Some(path) => write_report(&rows, create(path)?).map_err(|e| io_error(path, e)),
        None => write_report(&rows, out).map_err(|e| io_error(Path::new("<stdout>"), e)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(mode: Mode) -> BenchRecord {
        BenchRecord {
            mode,
            workers: "8".into(),
            error: Some(0.02),
            pair_count: 10,
            read_length: 100,
            penalties: "4,6,2".into(),
            transfer_in_bytes: 0,
            kernel_cells: 1000,
            kernel_dma_bytes: 0,
            transfer_out_bytes: 0,
            wall_ms: 5,
            seed: Some(7),
        }
    }

    #[test]
    fn cpu_total_equals_kernel() {
        let r = record(Mode::Cpu);
        assert_eq!(r.kernel_metric(), 1000);
        assert_eq!(r.total_metric(), r.kernel_metric());
    }

    #[test]
    fn pim_metrics() {
        let r = BenchRecord {
            transfer_in_bytes: 800,
            kernel_dma_bytes: 160,
            transfer_out_bytes: 80,
            ..record(Mode::Pim)
        };
        assert_eq!(r.kernel_metric(), 1020);
        assert_eq!(r.total_metric(), 1130);
    }

    #[test]
    fn records_round_trip_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("runs.csv");
        let a = record(Mode::Cpu);
        let b = BenchRecord {
            error: None,
            seed: None,
            ..record(Mode::Pim)
        };
        append_record(&path, &a).unwrap();
        append_record(&path, &b).unwrap();
        assert_eq!(read_records(&path).unwrap(), vec![a.clone(), b]);

        let mut csv = Vec::new();
        write_report(&[ReportRow::from(a)], &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), REPORT_COLUMNS.join(","));
        assert_eq!(
            lines.next().unwrap(),
            "cpu,8,0.02,10,100,\"4,6,2\",0,1000,0,0,5,7,1000,1000"
        );
    }

    #[test]
    fn sidecar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.pairs.spec");
        let spec = DatasetSpec {
            pair_count: 5,
            read_length: 50,
            error_threshold: 0.04,
            seed: 9,
        };
        write_sidecar(&path, &spec).unwrap();
        assert_eq!(read_sidecar(&path), Some(spec));
        assert_eq!(sidecar_path(Path::new("a/b.txt")), PathBuf::from("a/b.txt.spec"));
        fs::write(&path, "pairs=5\n").unwrap();
        assert_eq!(read_sidecar(&path), None);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Failed(String::new()).exit_code(), 1);
        assert_eq!(CliError::Usage(String::new()).exit_code(), 2);
        assert_eq!(io_error(Path::new("x"), "gone").exit_code(), 3);
    }
}
