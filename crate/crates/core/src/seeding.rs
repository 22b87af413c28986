//! Per-replica random streams.
//!
//! Each `(master_seed, replica)` pair maps to its own ChaCha8 key/stream
//! combination: the master seed fills the key and the replica index selects
//! the stream, so two different pairs never share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const KEY_TAG: &[u8; 8] = b"densilab";

pub fn replica_rng(master_seed: u64, replica: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(KEY_TAG);
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(replica);
    rng
}
