//! MRAM image of one DPU's batch.
//!
//! ```text
//! 0                 header: pair_count u32, cigar_capacity u32
//! 8                 descriptor table, 16 bytes per pair:
//!                   pattern_len u32, text_len u32, pattern_off u32, text_off u32
//! 8 + 16n           sequences: pattern then text per pair, each padded to 8
//! result_offset     result slots, one per pair:
//!                   score u32, cigar_len u32, CIGAR text padded to 8
//! image_end         free MRAM, split into per-tasklet heaps
//! ```
//!
//! All integers are little-endian and every field starts on an 8-byte boundary.

use thiserror::Error;

use crate::arena::round_up;
use crate::wfa::{Alignment, Cigar, SequencePair};

pub const HEADER_BYTES: usize = 8;
pub const DESCRIPTOR_BYTES: usize = 16;
pub const RESULT_HEADER_BYTES: usize = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LayoutError {
    #[error("batch image of {needed} bytes does not fit in {available} bytes of MRAM")]
    ImageOverflow { needed: usize, available: usize },
    #[error("CIGAR of {len} bytes exceeds the per-pair capacity of {capacity}")]
    CigarCapacityExceeded { len: usize, capacity: usize },
    #[error("corrupt batch image: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairDescriptor {
    pub pattern_len: u32,
    pub text_len: u32,
    pub pattern_offset: u32,
    pub text_offset: u32,
}

impl PairDescriptor {
    pub fn encode(&self) -> [u8; DESCRIPTOR_BYTES] {
        let mut out = [0u8; DESCRIPTOR_BYTES];
        for (chunk, v) in out.chunks_exact_mut(4).zip([
            self.pattern_len,
            self.text_len,
            self.pattern_offset,
            self.text_offset,
        ]) {
            chunk.copy_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Self {
        let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap());
        Self {
            pattern_len: word(0),
            text_len: word(1),
            pattern_offset: word(2),
            text_offset: word(3),
        }
    }

    /// First byte after this pair's sequences.
    pub fn sequences_end(&self) -> usize {
        self.text_offset as usize + round_up(self.text_len as usize)
    }
}

pub fn encode_header(pair_count: u32, cigar_capacity: u32) -> [u8; HEADER_BYTES] {
    let mut h = [0u8; HEADER_BYTES];
    h[..4].copy_from_slice(&pair_count.to_le_bytes());
    h[4..].copy_from_slice(&cigar_capacity.to_le_bytes());
    h
}

pub fn decode_header(bytes: &[u8]) -> (u32, u32) {
    (
        u32::from_le_bytes(bytes[..4].try_into().unwrap()),
        u32::from_le_bytes(bytes[4..8].try_into().unwrap()),
    )
}

/// Where everything lives in one DPU's MRAM.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchLayout {
    pub pair_count: usize,
    pub cigar_capacity: usize,
    pub sequence_offset: usize,
    pub result_offset: usize,
    pub slot_bytes: usize,
}

impl BatchLayout {
    /// Rebuilds the layout from what a DPU can read back: the header and the
    /// end of the sequence area.
    pub fn from_parts(pair_count: usize, cigar_capacity: usize, sequences_end: usize) -> Self {
        let sequence_offset = HEADER_BYTES + DESCRIPTOR_BYTES * pair_count;
        Self {
            pair_count,
            cigar_capacity,
            sequence_offset,
            result_offset: sequences_end.max(sequence_offset),
            slot_bytes: RESULT_HEADER_BYTES + round_up(cigar_capacity),
        }
    }

    pub fn descriptor_offset(&self, index: usize) -> usize {
        HEADER_BYTES + DESCRIPTOR_BYTES * index
    }

    pub fn result_slot(&self, index: usize) -> usize {
        self.result_offset + self.slot_bytes * index
    }

    pub fn result_bytes(&self) -> usize {
        self.slot_bytes * self.pair_count
    }

    /// Bytes the host transfers in: header, table and sequences.
    pub fn input_bytes(&self) -> usize {
        self.result_offset
    }

    /// First byte after the result area.
    pub fn image_end(&self) -> usize {
        self.result_offset + self.result_bytes()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayoutConfig {
    /// Bytes of MRAM the image (inputs and results) may occupy.
    pub mram_bytes: usize,
    /// Per-pair CIGAR bytes; `None` means 4 * the longest sequence in the batch.
    pub cigar_capacity: Option<usize>,
}

/// Default CIGAR capacity: every operation is at least two characters and
/// covers at least one base of one sequence, so 4 * max length always fits.
pub fn default_cigar_capacity(pairs: &[SequencePair]) -> usize {
    pairs
        .iter()
        .map(|p| 4 * p.pattern.len().max(p.text.len()))
        .max()
        .unwrap_or(0)
}

/// Serialized inputs for one DPU.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchImage {
    pub layout: BatchLayout,
    /// Header, table and sequences: `layout.input_bytes()` long.
    pub bytes: Vec<u8>,
}

pub fn serialize_batch(pairs: &[SequencePair], config: &LayoutConfig) -> Result<BatchImage, LayoutError> {
    let capacity = config
        .cigar_capacity
        .unwrap_or_else(|| default_cigar_capacity(pairs));
    let mut offset = HEADER_BYTES + DESCRIPTOR_BYTES * pairs.len();
    let mut descriptors = Vec::with_capacity(pairs.len());
    for p in pairs {
        let pattern_offset = offset;
        offset += round_up(p.pattern.len());
        let text_offset = offset;
        offset += round_up(p.text.len());
        descriptors.push(PairDescriptor {
            pattern_len: p.pattern.len() as u32,
            text_len: p.text.len() as u32,
            pattern_offset: pattern_offset as u32,
            text_offset: text_offset as u32,
        });
    }
    let layout = BatchLayout::from_parts(pairs.len(), capacity, offset);
    if layout.image_end() > config.mram_bytes || layout.image_end() > u32::MAX as usize {
        return Err(LayoutError::ImageOverflow {
            needed: layout.image_end(),
            available: config.mram_bytes,
        });
    }

    let mut bytes = vec![0u8; layout.input_bytes()];
    bytes[..HEADER_BYTES].copy_from_slice(&encode_header(pairs.len() as u32, capacity as u32));
    for (i, (p, d)) in pairs.iter().zip(&descriptors).enumerate() {
        let at = layout.descriptor_offset(i);
        bytes[at..at + DESCRIPTOR_BYTES].copy_from_slice(&d.encode());
        let po = d.pattern_offset as usize;
        bytes[po..po + p.pattern.len()].copy_from_slice(&p.pattern);
        let to = d.text_offset as usize;
        bytes[to..to + p.text.len()].copy_from_slice(&p.text);
    }
    Ok(BatchImage { layout, bytes })
}

/// Reads the pairs back out of a serialized image.
pub fn deserialize_batch(bytes: &[u8]) -> Result<Vec<SequencePair>, LayoutError> {
    let corrupt = |m: &str| LayoutError::Corrupt(m.to_string());
    if bytes.len() < HEADER_BYTES {
        return Err(corrupt("missing header"));
    }
    let (count, _) = decode_header(bytes);
    let count = count as usize;
    let mut pairs = Vec::with_capacity(count);
    for i in 0..count {
        let at = HEADER_BYTES + DESCRIPTOR_BYTES * i;
        let d = PairDescriptor::decode(
            bytes
                .get(at..at + DESCRIPTOR_BYTES)
                .ok_or_else(|| corrupt("truncated descriptor table"))?,
        );
        let seq = |off: u32, len: u32| {
            bytes
                .get(off as usize..off as usize + len as usize)
                .map(<[u8]>::to_vec)
                .ok_or_else(|| corrupt("sequence outside image"))
        };
        pairs.push(SequencePair {
            pattern: seq(d.pattern_offset, d.pattern_len)?,
            text: seq(d.text_offset, d.text_len)?,
        });
    }
    Ok(pairs)
}

/// Encodes one result slot, padded to a multiple of 8 bytes.
pub fn encode_result(alignment: &Alignment, capacity: usize) -> Result<Vec<u8>, LayoutError> {
    let cigar = alignment.cigar.to_string();
    if cigar.len() > capacity {
        return Err(LayoutError::CigarCapacityExceeded {
            len: cigar.len(),
            capacity,
        });
    }
    let mut out = Vec::with_capacity(round_up(RESULT_HEADER_BYTES + cigar.len()));
    out.extend_from_slice(&alignment.score.to_le_bytes());
    out.extend_from_slice(&(cigar.len() as u32).to_le_bytes());
    out.extend_from_slice(cigar.as_bytes());
    out.resize(round_up(out.len()), 0);
    Ok(out)
}

/// Decodes the result area gathered from a DPU.
pub fn deserialize_results(layout: &BatchLayout, area: &[u8]) -> Result<Vec<Alignment>, LayoutError> {
    if area.len() < layout.result_bytes() {
        return Err(LayoutError::Corrupt(format!(
            "result area has {} bytes, expected {}",
            area.len(),
            layout.result_bytes()
        )));
    }
    (0..layout.pair_count)
        .map(|i| {
            let slot = &area[i * layout.slot_bytes..(i + 1) * layout.slot_bytes];
            let score = u32::from_le_bytes(slot[..4].try_into().unwrap());
            let len = u32::from_le_bytes(slot[4..8].try_into().unwrap()) as usize;
            if len > layout.cigar_capacity {
                return Err(LayoutError::Corrupt(format!("slot {i}: CIGAR length {len}")));
            }
            let text = std::str::from_utf8(&slot[RESULT_HEADER_BYTES..RESULT_HEADER_BYTES + len])
                .map_err(|_| LayoutError::Corrupt(format!("slot {i}: CIGAR is not text")))?;
            let cigar: Cigar = text
                .parse()
                .map_err(|e| LayoutError::Corrupt(format!("slot {i}: {e}")))?;
            Ok(Alignment { score, cigar })
        })
        .collect()
}
