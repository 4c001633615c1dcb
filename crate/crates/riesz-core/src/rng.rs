//! Minimal deterministic pseudo-random stream (splitmix64) for lattice
//! offsets, grid phases, and probe layouts. Not statistical-quality RNG;
//! everything built on it must stay bit-reproducible across platforms.

#[derive(Clone)]
pub(crate) struct SplitMix64(u64);

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform direction on the unit sphere of R^n (Marsaglia rejection in
    /// the enclosing cube; deterministic).
    pub fn unit_vector(&mut self, n: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..n).map(|_| 2.0 * self.next_f64() - 1.0).collect();
            let norm2: f64 = v.iter().map(|c| c * c).sum();
            if norm2 > 1e-8 && norm2 <= 1.0 {
                let norm = norm2.sqrt();
                return v.into_iter().map(|c| c / norm).collect();
            }
        }
    }
}
