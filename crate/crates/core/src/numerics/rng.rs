use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Named randomness sources. Every stream is derived from one root seed so
/// that, for example, toggling Gumbel noise never shifts the data split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    Split,
    Init,
    Gumbel,
    Dropout,
    Synth,
    Shuffle,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Split => 1,
            Stream::Init => 2,
            Stream::Gumbel => 3,
            Stream::Dropout => 4,
            Stream::Synth => 5,
            Stream::Shuffle => 6,
        }
    }
}

const SUBSTREAM_BITS: u32 = 56;

/// Seeded ChaCha8 generator. Identical seed, stream and call sequence give an
/// identical sample stream on every platform.
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self::with_stream_id(seed, 0)
    }

    pub fn for_stream(seed: u64, stream: Stream) -> Self {
        Self::with_stream_id(seed, stream.tag() << SUBSTREAM_BITS)
    }

    /// Independent generator for item `index` of a named stream, e.g. the
    /// Gumbel noise for the n-th cascade processed during training. Lets
    /// per-item work run in any order without changing the samples.
    pub fn substream(seed: u64, stream: Stream, index: u64) -> Self {
        debug_assert!(index < (1 << SUBSTREAM_BITS));
        Self::with_stream_id(seed, (stream.tag() << SUBSTREAM_BITS) | (index + 1))
    }

    fn with_stream_id(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    /// Position in the underlying keystream, in 32-bit words.
    pub fn word_pos(&self) -> u128 {
        self.inner.get_word_pos()
    }
}

impl RngCore for RngState {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}
