//! Helpers shared by the integration and acceptance tests. Everything here is
//! written against the public API only and re-derives its expectations
//! independently of the library code.
#![allow(dead_code)]

use pim_wfa::arena::{Arena, ArenaConfig, HostMemory, Region, Tier, TierHint};
use pim_wfa::machine::{AuditRecord, MachineConfig};
use pim_wfa::wfa::{Penalties, SequencePair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const BASES: &[u8] = b"ACGT";

/// Unit-cost edit distance by the textbook quadratic DP.
pub fn levenshtein(a: &[u8], b: &[u8]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, &ca) in a.iter().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, &cb) in b.iter().enumerate() {
            cur[j + 1] = (prev[j] + usize::from(ca != cb))
                .min(prev[j + 1] + 1)
                .min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

pub fn random_seq(rng: &mut impl Rng, len: usize) -> Vec<u8> {
    (0..len).map(|_| BASES[rng.gen_range(0..4)]).collect()
}

/// A random pair with lengths in `1..=max_len`. Half of the pairs are a
/// lightly mutated copy of the pattern so that both similar and unrelated
/// sequences are covered.
pub fn random_pair(rng: &mut impl Rng, max_len: usize) -> SequencePair {
    let len = rng.gen_range(1..=max_len);
    let pattern = random_seq(rng, len);
    let text = if rng.gen_bool(0.5) {
        let len = rng.gen_range(1..=max_len);
        random_seq(rng, len)
    } else {
        let mut t = pattern.clone();
        for _ in 0..rng.gen_range(0..=1 + t.len() / 10) {
            match rng.gen_range(0..3) {
                0 => {
                    let at = rng.gen_range(0..t.len());
                    t[at] = BASES[rng.gen_range(0..4)];
                }
                1 if t.len() < max_len => {
                    let at = rng.gen_range(0..=t.len());
                    t.insert(at, BASES[rng.gen_range(0..4)]);
                }
                2 if t.len() > 1 => {
                    let at = rng.gen_range(0..t.len());
                    t.remove(at);
                }
                _ => {}
            }
        }
        t
    };
    SequencePair::new(pattern, text).unwrap()
}

pub fn random_penalties(rng: &mut impl Rng) -> Penalties {
    Penalties::new(rng.gen_range(1..=8), rng.gen_range(0..=8), rng.gen_range(1..=4)).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn round8(n: usize) -> usize {
    n.div_ceil(8) * 8
}

/// Drives an arena with `ops` random operations and checks it against a
/// reference model of the bump-and-spill rule:
///
/// * WRAM use never exceeds the budget and MRAM use never exceeds the heap,
/// * live regions of the same tier never overlap,
/// * an `Auto` request lands in WRAM iff it fits there, spills iff it fits
///   only in MRAM, and fails otherwise,
/// * staging MRAM -> WRAM -> MRAM reproduces the bytes exactly.
pub fn check_arena_model(seed: u64, ops: usize) -> Result<(), String> {
    let mut rng = rng(seed);
    let wram_budget = 256 + 8 * rng.gen_range(0..512);
    let mram_heap = wram_budget + 8 * rng.gen_range(0..4096);
    let mut arena = Arena::host(ArenaConfig::new(wram_budget, mram_heap).unwrap());
    let (mut wram_used, mut mram_used, mut spills) = (0usize, 0usize, 0u64);
    let mut live: Vec<Region> = Vec::new();
    let (mut in_wram, mut round_trips, mut refused) = (0u64, 0u64, 0u64);

    for step in 0..ops {
        let fail = |msg: String| Err(format!("seed {seed} step {step}: {msg}"));
        match rng.gen_range(0..100) {
            0..=2 => {
                arena.reset();
                wram_used = 0;
                mram_used = 0;
                live.clear();
            }
            3..=10 => {
                // Stage round trip through a fresh MRAM region and WRAM buffer.
                let size = 8 * rng.gen_range(1..=16);
                if wram_used + size > wram_budget || mram_used + size > mram_heap {
                    continue;
                }
                let region = arena.alloc(size, TierHint::Mram).map_err(|e| e.to_string())?;
                let buffer = arena.alloc(size, TierHint::Wram).map_err(|e| e.to_string())?;
                mram_used += size;
                wram_used += size;
                let data: Vec<u8> = (0..size).map(|_| rng.gen()).collect();
                arena.store_bytes(buffer.offset, &data).map_err(|e| e.to_string())?;
                arena.stage_out(buffer, region).map_err(|e| e.to_string())?;
                arena
                    .store_bytes(buffer.offset, &vec![0u8; size])
                    .map_err(|e| e.to_string())?;
                arena.stage_in(region, buffer).map_err(|e| e.to_string())?;
                let mut back = vec![0u8; size];
                arena.load_bytes(buffer.offset, &mut back).map_err(|e| e.to_string())?;
                if back != data {
                    return fail("stage round trip changed the bytes".into());
                }
                round_trips += 1;
                live.push(region);
                live.push(buffer);
            }
            _ => {
                let size = rng.gen_range(1..=wram_budget / 3);
                let hint = match rng.gen_range(0..4) {
                    0 => TierHint::Wram,
                    1 => TierHint::Mram,
                    _ => TierHint::Auto,
                };
                let need = round8(size);
                let fits_w = wram_used + need <= wram_budget;
                let fits_m = mram_used + need <= mram_heap;
                let expected = match hint {
                    TierHint::Wram => fits_w.then_some(Tier::Wram),
                    TierHint::Mram => fits_m.then_some(Tier::Mram),
                    TierHint::Auto if fits_w => Some(Tier::Wram),
                    TierHint::Auto => fits_m.then_some(Tier::Mram),
                };
                match (arena.alloc(size, hint), expected) {
                    (Ok(r), Some(tier)) => {
                        let used = if tier == Tier::Wram { &mut wram_used } else { &mut mram_used };
                        if r.tier != tier || r.offset != *used || r.size != need {
                            return fail(format!("got {r:?}, model expected {tier:?} at {used}"));
                        }
                        if r.offset % 8 != 0 {
                            return fail(format!("misaligned {r:?}"));
                        }
                        *used += need;
                        in_wram += u64::from(tier == Tier::Wram);
                        if hint == TierHint::Auto && tier == Tier::Mram {
                            spills += 1;
                        }
                        if let Some(o) = live.iter().find(|o| o.tier == r.tier && overlap(o, &r)) {
                            return fail(format!("{r:?} overlaps {o:?}"));
                        }
                        live.push(r);
                    }
                    (Err(_), None) => refused += 1,
                    (got, want) => return fail(format!("alloc gave {got:?}, model {want:?}")),
                }
            }
        }
        if wram_used > wram_budget || mram_used > mram_heap {
            return fail("model exceeded capacity".into());
        }
        let s = arena.stats();
        if s.wram_peak > wram_budget || s.mram_peak > mram_heap {
            return fail(format!("peak over capacity: {s:?}"));
        }
        if arena.wram_remaining() != wram_budget - wram_used {
            return fail("WRAM remaining disagrees with the model".into());
        }
        if s.spill_count != spills {
            return fail(format!("spill count {} vs model {spills}", s.spill_count));
        }
    }
    // Long runs must exercise every branch of the rule.
    if ops >= 10_000 && (in_wram == 0 || spills == 0 || round_trips == 0 || refused == 0) {
        return Err(format!(
            "seed {seed}: weak coverage: {in_wram} WRAM, {spills} spills, \
             {round_trips} round trips, {refused} refusals"
        ));
    }
    Ok(())
}

fn overlap(a: &Region, b: &Region) -> bool {
    a.offset < b.offset + b.size && b.offset < a.offset + a.size
}

/// Per-tasklet WRAM windows, recomputed from the machine shape.
pub fn expected_windows(config: &MachineConfig, reserved: usize) -> Vec<(usize, usize)> {
    let share = (config.wram_bytes - reserved) / config.tasklets_per_dpu / 8 * 8;
    (0..config.tasklets_per_dpu)
        .map(|t| (reserved + t * share, reserved + (t + 1) * share))
        .collect()
}

/// Scans an audit log for alignment, size and range violations. Returns a
/// description of every offending record.
pub fn audit_violations(
    records: &[AuditRecord],
    config: &MachineConfig,
    reserved: usize,
) -> Vec<String> {
    let windows = expected_windows(config, reserved);
    let mut bad = Vec::new();
    for r in records {
        let mut why = Vec::new();
        if r.mram_offset % 8 != 0 {
            why.push("mram offset not 8-aligned");
        }
        if r.size % 8 != 0 {
            why.push("size not a multiple of 8");
        }
        if r.mram_offset + r.size > config.mram_bytes {
            why.push("MRAM range");
        }
        if r.dpu >= config.num_dpus {
            why.push("no such DPU");
        }
        if r.kind.is_dma() {
            if r.size < 8 || r.size > config.dma_max_bytes {
                why.push("DMA size outside [8, max]");
            }
            match (r.wram_offset, r.tasklet) {
                (Some(w), Some(t)) => {
                    if w % 8 != 0 {
                        why.push("wram offset not 8-aligned");
                    }
                    if w + r.size > config.wram_bytes {
                        why.push("WRAM range");
                    }
                    let (lo, hi) = windows[t];
                    if w < lo || w + r.size > hi {
                        why.push("outside the tasklet's WRAM window");
                    }
                }
                _ => why.push("DMA without tasklet or WRAM offset"),
            }
        }
        if !why.is_empty() {
            bad.push(format!("{r}: {}", why.join(", ")));
        }
    }
    bad
}

/// Arena over plain host memory, for tests that need a bounded budget.
pub fn bounded_arena(wram: usize, mram: usize) -> Arena<HostMemory> {
    Arena::host(ArenaConfig::new(wram, mram).unwrap())
}
