//! Deterministic per-run seeds.

/// Stream family a seed is drawn for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Mtfa = 1,
    Wadd = 2,
    ScoreId = 3,
    ScoreOod = 4,
    Reference = 5,
    Offset = 6,
    Discrepancy = 7,
    Timing = 8,
    Export = 9,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `run` in cell `cell` of stream family `purpose`.
pub fn run_seed(master: u64, purpose: Purpose, cell: u64, run: u64) -> u64 {
    let mut h = splitmix(master);
    for part in [purpose as u64, cell, run] {
        h = splitmix(h ^ part);
    }
    h
}
