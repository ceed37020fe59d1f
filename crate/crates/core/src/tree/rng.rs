use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Routing generator: ChaCha8 seeded through `SeedableRng::seed_from_u64`
/// (a PCG32 stream expands the 64-bit seed into the 256-bit key). Uniforms
/// take the top 53 bits of one `next_u64` output, scaled by 2⁻⁵³.
#[derive(Debug, Clone)]
pub struct TreeRng(ChaCha8Rng);

impl TreeRng {
    pub fn new(seed: u64) -> Self {
        TreeRng(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Left with probability `p`; saturated gates consume no randomness.
    pub fn go_left(&mut self, p: f64) -> bool {
        if p >= 1.0 {
            true
        } else if p <= 0.0 {
            false
        } else {
            self.uniform() < p
        }
    }
}
