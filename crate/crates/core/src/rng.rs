//! Seed derivation.
//!
//! All randomness in a run flows from one root seed. Each stage derives its own
//! seed by mixing the parent seed with a stage label (and optionally an index)
//! through FNV-1a and SplitMix64, then draws from a ChaCha8 stream. A stage can
//! therefore be re-run in isolation as long as its label and parent are known:
//!
//! ```text
//! root ─┬─ "sample"/year      stratified customer sampling
//!       ├─ "features"/year    feature selection (forest + GA)
//!       ├─ "split"/year       holdout split
//!       ├─ "smote"/year       oversampling of the training split
//!       └─ "model"/kind       per-model seed, further mixed with the year
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used by every stochastic stage.
pub type StageRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    let mut hash = 0xCBF2_9CE4_8422_2325_u64;
    for byte in label.bytes() {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    hash
}

/// Child seed for a labelled stage.
pub fn derive_seed(parent: u64, label: &str) -> u64 {
    splitmix64(parent ^ splitmix64(fnv1a(label)))
}

/// Child seed for the `index`-th instance of a labelled stage.
pub fn derive_indexed(parent: u64, label: &str, index: u64) -> u64 {
    splitmix64(derive_seed(parent, label) ^ splitmix64(index.wrapping_add(1)))
}

pub fn rng_from_seed(seed: u64) -> StageRng {
    ChaCha8Rng::seed_from_u64(seed)
}
