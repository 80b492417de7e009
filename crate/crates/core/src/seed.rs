//! Sample-indexed seed derivation.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// One step of the splitmix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the `ordinal`-th sample ever drawn on `level`.
///
/// Depends only on the sample's identity, so any schedule that evaluates the
/// same samples produces the same values.
pub fn sample_seed(master: u64, level: usize, ordinal: u64) -> u64 {
    let h = splitmix64(master);
    let h = splitmix64(h ^ level as u64);
    splitmix64(h ^ ordinal)
}
