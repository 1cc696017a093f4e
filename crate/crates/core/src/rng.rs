//! Reproducible random-number streams.
//!
//! Every stream is a ChaCha8 keystream: the key is expanded from the master
//! seed, the 64-bit nonce is the stream id, and the block counter walks the
//! output. A stream therefore yields a pure function of
//! `(master_seed, stream_id, counter)`, and sub-streams are derived by
//! hashing rather than by drawing from a parent, so the order in which
//! replications run never matters.
//!
//! Derivation scheme: `child(tag, index)` keeps the master seed and sets
//! `stream_id = first 8 bytes (LE) of SHA-256(parent_id_le || tag || 0x00 || index_le)`.
//!
//! Bulk inner loops that draw billions of numbers from one stream may use
//! [`RngStream::fast_rng`], a xoshiro256++ generator keyed by the first 32
//! bytes of the stream.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_xoshiro::Xoshiro256PlusPlus;
use sha2::{Digest, Sha256};

/// The generator type handed out by [`RngStream::rng`].
pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    /// Root stream for a named pipeline, e.g. a CLI subcommand.
    pub fn root(master_seed: u64, name: &str) -> Self {
        Self::new(master_seed, digest_u64(&[name.as_bytes()]))
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn child(&self, tag: &str, index: u64) -> Self {
        let id = digest_u64(&[
            &self.stream_id.to_le_bytes(),
            tag.as_bytes(),
            &[0u8],
            &index.to_le_bytes(),
        ]);
        Self::new(self.master_seed, id)
    }

    /// A fresh generator positioned at counter 0 of this stream.
    pub fn rng(&self) -> StreamRng {
        let mut key = [0u8; 32];
        let mut state = self.master_seed;
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream_id);
        rng
    }

    /// A xoshiro256++ generator seeded from this stream's first 32 bytes.
    pub fn fast_rng(&self) -> Xoshiro256PlusPlus {
        let mut seed = [0u8; 32];
        self.rng().fill_bytes(&mut seed);
        Xoshiro256PlusPlus::from_seed(seed)
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// First eight bytes (little endian) of the SHA-256 of the concatenated parts.
pub fn digest_u64(parts: &[&[u8]]) -> u64 {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part);
    }
    let out = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&out[..8]);
    u64::from_le_bytes(bytes)
}
