//! Per-agent random streams.
//!
//! Every agent draws from its own ChaCha8 stream keyed by the base seed.
//! The 64-bit stream id packs `(block, replication, agent)` so distinct
//! triples never share a keystream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const BLOCK_BITS: u32 = 16;
const REPLICATION_BITS: u32 = 24;
const AGENT_BITS: u32 = 24;

pub const MAX_BLOCK: u64 = (1 << BLOCK_BITS) - 1;
pub const MAX_REPLICATION: u64 = (1 << REPLICATION_BITS) - 1;
pub const MAX_AGENT: u64 = (1 << AGENT_BITS) - 1;

/// Identifies one agent's stream inside an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamId {
    pub block: u64,
    pub replication: u64,
    pub agent: u64,
}

impl StreamId {
    pub fn new(block: u64, replication: u64, agent: u64) -> Result<Self> {
        if block > MAX_BLOCK {
            return Err(Error::invalid("seed block", format!("{block} exceeds {MAX_BLOCK}")));
        }
        if replication > MAX_REPLICATION {
            return Err(Error::invalid(
                "replication",
                format!("{replication} exceeds {MAX_REPLICATION}"),
            ));
        }
        if agent > MAX_AGENT {
            return Err(Error::invalid("agent", format!("{agent} exceeds {MAX_AGENT}")));
        }
        Ok(StreamId {
            block,
            replication,
            agent,
        })
    }

    pub fn packed(&self) -> u64 {
        (self.block << (REPLICATION_BITS + AGENT_BITS)) | (self.replication << AGENT_BITS) | self.agent
    }
}

pub fn stream_rng(base_seed: u64, id: StreamId) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(id.packed());
    rng
}
