//! Reproducible instance generation.
//!
//! The generator is SplitMix64: the state advances by
//! `0x9E3779B97F4A7C15` and each output is mixed with
//! `z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9`,
//! `z = (z ^ (z >> 27)) * 0x94D049BB133111EB`, `z ^ (z >> 31)`
//! (wrapping arithmetic). Uniforms use the top 53 bits. Standard normals use
//! Box–Muller, `sqrt(−2 ln(1 − u1))·cos(2π u2)`, consuming two uniforms.

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn standard_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// `exp(σ Z)` with `Z` standard normal.
    pub fn lognormal(&mut self, sigma: f64) -> f64 {
        (sigma * self.standard_normal()).exp()
    }
}
