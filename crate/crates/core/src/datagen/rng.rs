use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent randomness consumers within one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Generator = 0,
    Hedge = 1,
    Shuffle = 2,
    AdversaryScores = 3,
}

const PURPOSES: u64 = 8;

/// Substream for `(replication, purpose)` under `master_seed`. Streams never
/// overlap, so adding a consumer cannot perturb another's draws.
pub fn substream(master_seed: u64, replication: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replication * PURPOSES + purpose as u64);
    rng
}
