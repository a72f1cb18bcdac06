//! Named random streams.
//!
//! Every stochastic quantity of a drop comes from its own ChaCha stream keyed
//! by `(seed, purpose, indices)`. Changing, say, the number of UEs therefore
//! leaves the fading of the remaining links untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type DropRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    UePlacement,
    AccessFading { uav: usize, ue: usize },
    BackhaulFading { uav: usize },
    DataSymbols { ue: usize },
    SensingSymbols,
    Swarm { round: usize },
    ReceiveInit { uav: usize },
    Echo,
}

impl Stream {
    fn id(self) -> u64 {
        let (tag, a, b): (u64, usize, usize) = match self {
            Stream::UePlacement => (1, 0, 0),
            Stream::AccessFading { uav, ue } => (2, uav, ue),
            Stream::BackhaulFading { uav } => (3, uav, 0),
            Stream::DataSymbols { ue } => (4, ue, 0),
            Stream::SensingSymbols => (5, 0, 0),
            Stream::Swarm { round } => (6, round, 0),
            Stream::ReceiveInit { uav } => (7, uav, 0),
            Stream::Echo => (8, 0, 0),
        };
        (tag << 56) | ((a as u64 & 0x0fff_ffff) << 28) | (b as u64 & 0x0fff_ffff)
    }
}

/// Independent generator for one purpose within the drop identified by `seed`.
pub fn stream_rng(seed: u64, stream: Stream) -> DropRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}
