//! Test-only RNG that plays back a prescribed sequence of uniform draws.

use rand::RngCore;

/// Emits fixed u64 values chosen so `rng.gen::<f64>()` returns the given
/// uniforms in order; repeats the last one when exhausted. Lets collapse
/// tests force a specific measurement outcome exactly.
pub struct ScriptedDraws {
    words: Vec<u64>,
    next: usize,
}

impl ScriptedDraws {
    /// rand maps `next_u64() >> 11` onto [0,1) with 53-bit resolution.
    pub fn new(uniforms: &[f64]) -> Self {
        let words = uniforms
            .iter()
            .map(|f| ((f * (1u64 << 53) as f64) as u64) << 11)
            .collect();
        ScriptedDraws { words, next: 0 }
    }
}

impl RngCore for ScriptedDraws {
    fn next_u32(&mut self) -> u32 {
        self.next_u64() as u32
    }

    fn next_u64(&mut self) -> u64 {
        let i = self.next.min(self.words.len() - 1);
        self.next += 1;
        self.words[i]
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for b in dest.iter_mut() {
            *b = 0;
        }
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.fill_bytes(dest);
        Ok(())
    }
}
