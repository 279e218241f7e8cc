//! Sub-seed derivation. Every randomized phase draws its own labeled stream
//! from the master seed so that re-running a single phase in isolation
//! reproduces the exact bytes of a full run.

/// splitmix64 finalizer; full-period mixing of a 64-bit state.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derive a deterministic sub-seed for a labeled phase and index (task number,
/// restart number, ...).
pub fn sub_seed(master: u64, label: &str, index: u64) -> u64 {
    splitmix64(master ^ fnv1a(label.as_bytes()) ^ splitmix64(index))
}
