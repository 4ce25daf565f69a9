//! Deterministic counter-based random number generation.
//!
//! Every draw is a pure function of (seed, stream, counter), so an
//! ensemble simulated across any number of worker threads produces
//! byte-identical output as long as each logical path owns its stream
//! index. The counter only moves forward: a rejected or re-split
//! simulation step keeps drawing fresh numbers instead of rewinding,
//! which keeps retries from correlating with earlier draws.
//!
//! The word function chains three finalizer rounds (the SplitMix64
//! finalizer) over the key material mixed with distinct odd constants;
//! this passes the usual avalanche checks and is far cheaper than a
//! cryptographic construction.

/// SplitMix64 finalizer: full-avalanche 64-bit mixer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const STREAM_SALT: u64 = 0xc2b2_ae3d_27d4_eb4f;
const COUNTER_SALT: u64 = 0x1656_67b1_9e37_79f9;

/// Stateless-core random generator addressed by (seed, stream, counter).
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    /// Generator for the given seed on stream 0.
    pub fn new(seed: u64) -> Self {
        Self::stream(seed, 0)
    }

    /// Generator for an independent stream (for example one per path).
    pub fn stream(seed: u64, stream: u64) -> Self {
        let key = mix64(seed.wrapping_mul(GOLDEN) ^ stream.wrapping_mul(STREAM_SALT));
        Self { key, counter: 0 }
    }

    /// A child generator whose stream is derived from this one's key.
    pub fn substream(&self, stream: u64) -> Self {
        Self::stream(self.key, stream.wrapping_add(1))
    }

    /// Number of 64-bit words drawn so far.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Next raw word; pure in (key, counter).
    pub fn next_u64(&mut self) -> u64 {
        let word = mix64(self.key ^ self.counter.wrapping_mul(COUNTER_SALT));
        self.counter += 1;
        word
    }

    /// Uniform draw on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        // 53 high bits, offset by half an ulp so 0 and 1 are excluded.
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Standard normal draw via Box-Muller (two words per draw).
    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Uniform draw on [0, n) without modulo bias (Lemire reduction).
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        loop {
            let x = self.next_u64();
            let (hi, lo) = {
                let wide = (x as u128) * (n as u128);
                ((wide >> 64) as u64, wide as u64)
            };
            if lo >= n || lo >= n.wrapping_neg() % n {
                return hi;
            }
        }
    }
}
