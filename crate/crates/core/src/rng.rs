//! Counter-based splittable randomness.
//!
//! `RngStream` is a Philox-style counter generator: output block `i` of
//! stream `s` is a fixed mixing function of `(master_seed, s, i)`, so a
//! batch of simulation trials can each own a stream keyed by trial index
//! and produce identical output regardless of execution order or thread
//! count.

use rand::RngCore;

const PHILOX_M: u64 = 0xD2B7_4407_B1CE_6E93;
const PHILOX_W: u64 = 0x9E37_79B9_7F4A_7C15;
const SUBSTREAM_TAG: u64 = 0x5851_F42D_4C95_7F2D;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Philox 2x64-10 block function: 2 words of counter, 1 word of key.
fn philox2x64(mut c0: u64, mut c1: u64, mut key: u64) -> [u64; 2] {
    for _ in 0..10 {
        let prod = (c0 as u128) * (PHILOX_M as u128);
        let hi = (prod >> 64) as u64;
        let lo = prod as u64;
        let new0 = hi ^ key ^ c1;
        c1 = lo;
        c0 = new0;
        key = key.wrapping_add(PHILOX_W);
    }
    [c0, c1]
}

/// A deterministic random stream identified by `(master_seed, stream_id)`.
///
/// Identical identifiers yield identical sample sequences; distinct
/// stream ids yield statistically independent streams. The stream owns
/// its position and is not shareable, but may be moved across threads.
#[derive(Debug, Clone)]
pub struct RngStream {
    key: u64,
    stream_id: u64,
    block: u64,
    buf: [u64; 2],
    pos: usize,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        RngStream {
            key: splitmix64(master_seed),
            stream_id,
            block: 0,
            buf: [0; 2],
            pos: 2,
        }
    }

    /// Derive an independent child stream, e.g. one per MC replicate.
    /// The derivation depends only on the stream identity, not on how
    /// much of this stream has been consumed.
    pub fn substream(&self, child_id: u64) -> RngStream {
        let child_key = splitmix64(self.key ^ SUBSTREAM_TAG ^ splitmix64(self.stream_id));
        RngStream {
            key: child_key,
            stream_id: child_id,
            block: 0,
            buf: [0; 2],
            pos: 2,
        }
    }

    pub fn next_word(&mut self) -> u64 {
        if self.pos == 2 {
            self.buf = philox2x64(self.block, self.stream_id, self.key);
            self.block = self.block.wrapping_add(1);
            self.pos = 0;
        }
        let w = self.buf[self.pos];
        self.pos += 1;
        w
    }

    /// Uniform double in the open interval (0, 1).
    pub fn open01(&mut self) -> f64 {
        ((self.next_word() >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        (self.next_word() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.next_word()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let word = self.next_word().to_le_bytes();
            chunk.copy_from_slice(&word[..chunk.len()]);
        }
    }
}
