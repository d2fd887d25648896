//! Named, reproducible random streams.
//!
//! Every random draw in the pipeline comes from a [`Stream`] derived from a
//! master seed. A stream is a ChaCha8 generator keyed by the master seed with
//! its stream counter set to `trial * PURPOSES + purpose`, so the menu coins,
//! value realizations, adversary, and mechanism mixing of one trial never share
//! state and never depend on scheduling.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// What a stream is used for. The discriminant is part of the stream id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Purpose {
    Menu = 0,
    Realization = 1,
    Adversary = 2,
    MechanismMix = 3,
    Routing = 4,
    Auxiliary = 5,
}

const PURPOSES: u64 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamId {
    pub master_seed: u64,
    pub stream: u64,
}

#[derive(Clone, Debug)]
pub struct Stream {
    id: StreamId,
    rng: ChaCha8Rng,
}

impl Stream {
    pub fn new(master_seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream);
        Self {
            id: StreamId {
                master_seed,
                stream,
            },
            rng,
        }
    }

    pub fn for_trial(master_seed: u64, trial: u64, purpose: Purpose) -> Self {
        Self::new(master_seed, trial * PURPOSES + purpose as u64)
    }

    pub fn id(&self) -> StreamId {
        self.id
    }
}

impl RngCore for Stream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}
