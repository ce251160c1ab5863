use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random stream families. Each family re-keys the master seed so
/// that, e.g., Monte Carlo stratum 3 and simulator batch 3 never share bits.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub(crate) enum Family {
    CacheProfiles = 0x5a17_c0de_0000_0001,
    GeoTrials = 0x5a17_c0de_0000_0002,
    PhyTrials = 0x5a17_c0de_0000_0003,
}

/// Deterministic substream `index` of `family` under `seed`.
pub(crate) fn substream(seed: u64, family: Family, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ family as u64);
    rng.set_stream(index);
    rng
}
