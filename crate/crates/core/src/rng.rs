//! Deterministic counter-based random streams.
//!
//! Every random draw in a run comes from a ChaCha8 stream addressed by
//! (base seed, replica, role). The role is a particle index or one of the
//! reserved roles below. Streams are independent of scheduling order, so a
//! replica farm produces identical results at any parallelism level.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Role id reserved for initial-condition draws of a replica.
pub const ROLE_INIT: u32 = 0xFFFF;

const ROLE_BITS: u32 = 16;

/// Stream for one (replica, role) pair under a base seed.
///
/// Replica indices must fit in 48 bits; roles in 16.
pub fn stream(seed: u64, replica: u64, role: u32) -> ChaCha8Rng {
    assert!(replica < (1 << 48), "replica index too large");
    assert!(role < (1 << ROLE_BITS), "role id too large");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((replica << ROLE_BITS) | u64::from(role));
    rng
}

/// Stream feeding particle `particle` (0-based) of a replica.
pub fn particle_stream(seed: u64, replica: u64, particle: u32) -> ChaCha8Rng {
    stream(seed, replica, particle)
}

/// Stream feeding the initial-condition draw of a replica.
pub fn init_stream(seed: u64, replica: u64) -> ChaCha8Rng {
    stream(seed, replica, ROLE_INIT)
}

/// The stream id a (replica, role) pair maps to, for report provenance.
pub fn stream_id(replica: u64, role: u32) -> u64 {
    (replica << ROLE_BITS) | u64::from(role)
}
