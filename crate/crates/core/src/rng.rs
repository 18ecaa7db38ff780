//! Seeded random streams.
//!
//! Every random draw in the crate comes from ChaCha8 (`rand_chacha` 0.9)
//! seeded with `seed_from_u64(seed)` and then moved to a numbered stream.
//! Streams are independent, so a draw is identified by `(seed, stream)`
//! and never shifts when unrelated draws are added or removed.
//!
//! Stream numbering:
//!
//! | purpose                      | stream                        |
//! |------------------------------|-------------------------------|
//! | user `i` incoming edges      | `USER_BASE + 4*i + 0`         |
//! | user `i` stubbornness        | `USER_BASE + 4*i + 1`         |
//! | user `i` initial state       | `USER_BASE + 4*i + 2`         |
//! | corpus item `k` score        | `ITEM_BASE + 2*k + 0`         |
//! | corpus item `k` appearance   | `ITEM_BASE + 2*k + 1`         |

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const USER_BASE: u64 = 1 << 32;
const ITEM_BASE: u64 = 1 << 48;

pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn user_edges(seed: u64, user: usize) -> StreamRng {
    stream(seed, USER_BASE + 4 * user as u64)
}

pub(crate) fn user_stubbornness(seed: u64, user: usize) -> StreamRng {
    stream(seed, USER_BASE + 4 * user as u64 + 1)
}

pub(crate) fn user_initial_state(seed: u64, user: usize) -> StreamRng {
    stream(seed, USER_BASE + 4 * user as u64 + 2)
}

pub(crate) fn item_score(seed: u64, item: usize) -> StreamRng {
    stream(seed, ITEM_BASE + 2 * item as u64)
}

pub(crate) fn item_appearance(seed: u64, item: usize) -> StreamRng {
    stream(seed, ITEM_BASE + 2 * item as u64 + 1)
}

/// Derives an independent seed for a sub-task from a master seed (SplitMix64 finalizer).
pub fn derive_seed(master: u64, salt: u64) -> u64 {
    let mut z = master ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
