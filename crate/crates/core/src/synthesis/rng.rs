//! Counter-based random streams: every draw is addressed by `(seed, stream, index)`, so the
//! values never depend on how work is split between threads.

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Cells filled per generator instance.
pub(crate) const CHUNK: usize = 8192;

/// SplitMix64 finaliser, used to derive independent seeds (for replicates) from one root seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(0x632b_e59b_d9b4_e019);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator positioned at draw `index` of `stream`; each draw consumes two 64-bit words.
pub(crate) fn positioned(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(index as u128 * 4);
    rng
}

#[inline]
pub(crate) fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard complex Gaussian, `E|Z|^2 = 1`, from one draw (two words).
#[inline]
pub(crate) fn complex_normal(rng: &mut ChaCha8Rng) -> Complex64 {
    let u1 = open_unit(rng);
    let u2 = open_unit(rng);
    Complex64::from_polar((-u1.ln()).sqrt(), std::f64::consts::TAU * u2)
}

/// Two uniforms in `(0, 1)` from one draw.
#[inline]
pub(crate) fn uniform_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    (open_unit(rng), open_unit(rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positioned_streams_agree_with_sequential_draws() {
        let mut a = positioned(7, 3, 0);
        let seq: Vec<Complex64> = (0..100).map(|_| complex_normal(&mut a)).collect();
        let mut b = positioned(7, 3, 57);
        assert_eq!(complex_normal(&mut b), seq[57]);
    }

    #[test]
    fn complex_normal_has_unit_power() {
        let mut r = positioned(1, 0, 0);
        let n = 200_000;
        let p: f64 = (0..n).map(|_| complex_normal(&mut r).norm_sqr()).sum::<f64>() / n as f64;
        assert!((p - 1.0).abs() < 0.01, "{p}");
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
    }
}
