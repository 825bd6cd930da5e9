use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Identifies one reproducible random sequence.
///
/// The seed keys a ChaCha8 generator and the stream index selects one of its
/// 2^64 independent streams, so replications can be split across workers
/// without coordinating state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomStream {
    pub seed: u64,
    pub stream_index: u64,
}

impl RandomStream {
    pub const fn new(seed: u64, stream_index: u64) -> Self {
        Self { seed, stream_index }
    }

    /// Stream for replication `i` of a batch rooted at `self`.
    pub const fn substream(&self, i: u64) -> Self {
        Self {
            seed: self.seed,
            stream_index: self.stream_index.wrapping_add(i),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_index);
        rng
    }
}
