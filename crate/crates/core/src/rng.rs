//! Deterministic pseudo-randomness for everything in the bench.
//!
//! All randomized steps (partitioning, sampling, attacks) run on splitmix64
//! streams so that a run is reproducible bit-for-bit across platforms from a
//! single `u64` seed. Batch work derives one independent stream per item from
//! `(seed, index)`, which is what makes parallel generation order-independent.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 stream.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in 0..n via modulo reduction. The bias for n far below 2^64 is
    /// negligible and the construction is trivially portable.
    pub fn next_below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        self.next_u64() % n
    }
}

/// First output of a splitmix64 stream seeded with `x`. Used as the pinned
/// one-shot hash when deriving partition seeds and sub-streams.
pub fn splitmix64_mix(x: u64) -> u64 {
    SplitMix64::new(x).next_u64()
}

/// Independent stream for item `index` of a batch run under `seed`.
pub fn derive_stream(seed: u64, index: u64) -> SplitMix64 {
    SplitMix64::new(splitmix64_mix(seed ^ splitmix64_mix(index.wrapping_add(1))))
}

/// In-place Fisher-Yates shuffle driven by `rng`, iterating from the back.
pub fn fisher_yates<T>(items: &mut [T], rng: &mut SplitMix64) {
    for i in (1..items.len()).rev() {
        let j = rng.next_below(i as u64 + 1) as usize;
        items.swap(i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference outputs of the splitmix64 algorithm for seed 0.
    #[test]
    fn splitmix64_reference_vectors() {
        let mut rng = SplitMix64::new(0);
        assert_eq!(rng.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(rng.next_u64(), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(rng.next_u64(), 0x06C4_5D18_8009_454F);
        assert_eq!(rng.next_u64(), 0xF88B_B8A8_724C_81EC);
        assert_eq!(rng.next_u64(), 0x1B39_896A_51A8_749B);
    }

    #[test]
    fn splitmix64_seed42_vectors() {
        let mut rng = SplitMix64::new(42);
        assert_eq!(rng.next_u64(), 0xBDD7_3226_2FEB_6E95);
        assert_eq!(rng.next_u64(), 0x28EF_E333_B266_F103);
    }

    #[test]
    fn next_f64_in_unit_interval() {
        let mut rng = SplitMix64::new(7);
        for _ in 0..10_000 {
            let u = rng.next_f64();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn mix_matches_stream_head() {
        let mut rng = SplitMix64::new(0xDEAD_BEEF);
        assert_eq!(splitmix64_mix(0xDEAD_BEEF), rng.next_u64());
    }

    #[test]
    fn fisher_yates_pinned_vector() {
        let mut ids: Vec<u32> = (0..5).collect();
        let mut rng = SplitMix64::new(42);
        fisher_yates(&mut ids, &mut rng);
        assert_eq!(ids, vec![1, 2, 0, 4, 3]);
    }

    #[test]
    fn fisher_yates_is_permutation() {
        let mut ids: Vec<u32> = (0..257).collect();
        let mut rng = SplitMix64::new(99);
        fisher_yates(&mut ids, &mut rng);
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..257).collect::<Vec<_>>());
    }

    #[test]
    fn derived_streams_differ_and_reproduce() {
        let mut a = derive_stream(1, 0);
        let mut b = derive_stream(1, 1);
        let mut c = derive_stream(1, 0);
        let first_a = a.next_u64();
        assert_ne!(first_a, b.next_u64());
        assert_eq!(first_a, c.next_u64());
    }
}
