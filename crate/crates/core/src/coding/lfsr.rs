//! Degree-32 maximal-length LFSR keystream.
//!
//! Galois configuration for `x^32 + x^22 + x^2 + x + 1`. Period `2^32 − 1`;
//! different start states are different phases of the same m-sequence.

/// Feedback mask for the Galois right-shift form.
pub const TAPS: u32 = 0x8020_0003;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lfsr32 {
    state: u32,
}

impl Lfsr32 {
    /// A zero state would lock the register, so it is mapped to 1.
    pub fn new(state: u32) -> Self {
        Lfsr32 {
            state: if state == 0 { 1 } else { state },
        }
    }

    pub fn state(&self) -> u32 {
        self.state
    }

    #[inline]
    pub fn next_bit(&mut self) -> u8 {
        let out = (self.state & 1) as u8;
        self.state >>= 1;
        if out == 1 {
            self.state ^= TAPS;
        }
        out
    }

    pub fn fill(&mut self, out: &mut [u8]) {
        for b in out {
            *b = self.next_bit();
        }
    }
}
