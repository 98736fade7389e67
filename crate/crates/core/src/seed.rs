//! Reproducible random streams.
//!
//! A [`Seed`] is a 64-bit root plus a path of labels. Every distinct path maps
//! to its own ChaCha8 stream, so parallel trials and independent sub-draws
//! never share randomness and never depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed {
    pub root: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
}

impl Seed {
    pub fn new(root: u64) -> Self {
        Seed { root, labels: Vec::new() }
    }

    /// Child seed for the named sub-draw.
    pub fn derive(&self, label: impl Into<String>) -> Seed {
        let mut labels = self.labels.clone();
        labels.push(label.into());
        Seed { root: self.root, labels }
    }

    /// Child seed for Monte Carlo trial `index`.
    pub fn trial(&self, index: usize) -> Seed {
        self.derive(format!("trial.{index}"))
    }

    /// Stream number of this label path.
    pub fn stream(&self) -> u64 {
        self.labels.iter().fold(0u64, |acc, label| splitmix(acc ^ fnv1a(label.as_bytes())))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.root);
        rng.set_stream(self.stream());
        rng
    }
}

impl From<u64> for Seed {
    fn from(root: u64) -> Self {
        Seed::new(root)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
