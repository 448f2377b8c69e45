//! Counter-based hashing. Every random draw of a medium is a pure function of
//! `(seed, stream, cell)` so evaluation order never matters.

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
pub(crate) fn hash3(seed: u64, stream: u64, cell: i64) -> u64 {
    let a = splitmix64(seed ^ stream.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    splitmix64(a ^ (cell as u64).wrapping_mul(0xA076_1D64_78BD_642F))
}

/// Uniform draw in `[0, 1)` with 53 random bits.
#[inline]
pub(crate) fn unit(seed: u64, stream: u64, cell: i64) -> f64 {
    (hash3(seed, stream, cell) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
