//! Stable seed derivation.
//!
//! Sub-seeds are derived from a run seed and a list of labels so that
//! independent pieces of work (bench cells, EM restarts per candidate) get
//! reproducible, non-overlapping random streams regardless of scheduling.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `base` with every part in order.
pub fn derive<I, S>(base: u64, parts: I) -> u64
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    let mut h = FNV_OFFSET ^ splitmix(base);
    for part in parts {
        for &b in part.as_ref() {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
        // separator so ["ab", "c"] and ["a", "bc"] differ
        h ^= 0xff;
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix(h)
}

pub fn derive_index(base: u64, index: u64) -> u64 {
    derive(base, [index.to_le_bytes()])
}
