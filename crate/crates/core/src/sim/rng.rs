//! Per-link random streams.
//!
//! Every link owns a ChaCha8 generator keyed by SHA-256 over a fixed domain
//! tag, the scenario seed (big-endian) and the link id. Adding, removing or
//! reordering links therefore never shifts another link's draws. Both the
//! algorithm and the key derivation are part of the log format: changing
//! either changes every lossy log.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const DOMAIN: &[u8] = b"satdtn/link-loss/v1";

#[derive(Clone, Debug)]
pub struct LossStream {
    rng: ChaCha8Rng,
}

impl LossStream {
    pub fn for_link(seed: u64, link_id: &str) -> Self {
        let mut h = Sha256::new();
        h.update(DOMAIN);
        h.update(seed.to_be_bytes());
        h.update(link_id.as_bytes());
        LossStream {
            rng: ChaCha8Rng::from_seed(h.finalize().into()),
        }
    }

    /// One loss draw; see [`sample_loss`].
    pub fn sample(&mut self, p: f64) -> bool {
        sample_loss(&mut self.rng, p)
    }
}

/// True (lost) with probability `p`. Always consumes exactly one draw, so the
/// stream position does not depend on `p`.
pub fn sample_loss<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    debug_assert!((0.0..=1.0).contains(&p));
    rng.gen::<f64>() < p
}
