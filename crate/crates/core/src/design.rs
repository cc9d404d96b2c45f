//! Index-addressable design rows.
//!
//! Every estimator consumes rows through [`RowSource`], so the same code path
//! serves the lazily generated dyad stream (`n(n-1)` rows, never held in
//! memory) and small materialised designs used as oracles.

use crate::error::{Error, Result};

pub trait RowSource: Sync {
    /// Number of addressable rows.
    fn len(&self) -> u64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn width(&self) -> usize;

    fn names(&self) -> Vec<String>;

    /// Leading columns that form the dyadic `D` block.
    fn d_width(&self) -> usize {
        0
    }

    /// Writes row `t` into `buf` (length `width()`) and returns its outcome.
    fn row_at(&self, t: u64, buf: &mut [f64]) -> f64;
}

/// Dense in-memory design: row-major covariates plus a 0/1 outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct Design {
    names: Vec<String>,
    x: Vec<f64>,
    w: Vec<f64>,
}

impl Design {
    pub fn new(names: Vec<String>) -> Self {
        Design {
            names,
            x: Vec::new(),
            w: Vec::new(),
        }
    }

    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>], w: &[f64]) -> Result<Self> {
        if rows.len() != w.len() {
            return Err(Error::Config(format!("{} rows but {} outcomes", rows.len(), w.len())));
        }
        let mut d = Design::new(names);
        for (r, &y) in rows.iter().zip(w) {
            d.push(r, y)?;
        }
        Ok(d)
    }

    pub fn push(&mut self, row: &[f64], w: f64) -> Result<()> {
        if row.len() != self.names.len() {
            return Err(Error::Config(format!(
                "row width {} does not match design width {}",
                row.len(),
                self.names.len()
            )));
        }
        self.x.extend_from_slice(row);
        self.w.push(w);
        Ok(())
    }

    /// Materialises up to `limit` rows of another source.
    pub fn collect(source: &dyn RowSource, limit: u64) -> Result<Self> {
        if source.len() > limit {
            return Err(Error::Config(format!(
                "refusing to materialise {} rows (limit {limit})",
                source.len()
            )));
        }
        let width = source.width();
        let mut d = Design::new(source.names());
        d.x.reserve(source.len() as usize * width);
        let mut buf = vec![0.0; width];
        for t in 0..source.len() {
            let y = source.row_at(t, &mut buf);
            d.x.extend_from_slice(&buf);
            d.w.push(y);
        }
        Ok(d)
    }

    pub fn rows(&self) -> usize {
        self.w.len()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let k = self.names.len();
        &self.x[t * k..(t + 1) * k]
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.w
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows()).map(|t| self.row(t)[c]).collect()
    }

    /// Copy with column `c` multiplied by `factor`.
    pub fn scale_column(&self, c: usize, factor: f64) -> Design {
        let mut d = self.clone();
        let k = self.names.len();
        for t in 0..self.rows() {
            d.x[t * k + c] *= factor;
        }
        d
    }
}

impl RowSource for Design {
    fn len(&self) -> u64 {
        self.w.len() as u64
    }

    fn width(&self) -> usize {
        self.names.len()
    }

    fn names(&self) -> Vec<String> {
        self.names.clone()
    }

    fn row_at(&self, t: u64, buf: &mut [f64]) -> f64 {
        buf.copy_from_slice(self.row(t as usize));
        self.w[t as usize]
    }
}

/// SplitMix64 finaliser; a bijective 64-bit mixer.
#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw in `[0, 1)` keyed on `(seed, a, b)`.
#[inline]
pub(crate) fn keyed_uniform(seed: u64, a: u64, b: u64) -> f64 {
    let h = mix64(mix64(seed ^ mix64(a)) ^ b);
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Keyed pseudo-random permutation of `0..n` in O(1) memory: a balanced
/// Feistel network over the next even power of two, cycle-walked into range.
#[derive(Clone, Debug)]
pub struct Permutation {
    n: u64,
    half_bits: u32,
    keys: [u64; 4],
}

impl Permutation {
    pub fn new(n: u64, seed: u64) -> Self {
        let bits = 64 - n.saturating_sub(1).leading_zeros();
        let half_bits = bits.div_ceil(2).max(1);
        let mut keys = [0u64; 4];
        let mut state = seed;
        for k in &mut keys {
            state = mix64(state);
            *k = state;
        }
        Permutation { n, half_bits, keys }
    }

    #[inline]
    fn encrypt(&self, x: u64) -> u64 {
        let mask = (1u64 << self.half_bits) - 1;
        let mut left = x >> self.half_bits;
        let mut right = x & mask;
        for &k in &self.keys {
            let f = mix64(right ^ k) & mask;
            let next = left ^ f;
            left = right;
            right = next;
        }
        (left << self.half_bits) | right
    }

    /// Image of `t` under the permutation; `t < n`.
    #[inline]
    pub fn apply(&self, t: u64) -> u64 {
        debug_assert!(t < self.n);
        let mut x = self.encrypt(t);
        while x >= self.n {
            x = self.encrypt(x);
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn permutation_is_bijective(n in 1u64..3000, seed in any::<u64>()) {
            let p = Permutation::new(n, seed);
            let mut seen = vec![false; n as usize];
            for t in 0..n {
                let x = p.apply(t) as usize;
                prop_assert!(!seen[x]);
                seen[x] = true;
            }
        }
    }

    #[test]
    fn permutation_depends_on_seed() {
        let a: Vec<u64> = (0..100).map(|t| Permutation::new(100, 1).apply(t)).collect();
        let b: Vec<u64> = (0..100).map(|t| Permutation::new(100, 2).apply(t)).collect();
        assert_ne!(a, b);
    }

    #[test]
    fn keyed_uniform_in_unit_interval() {
        let mean: f64 = (0..10_000).map(|i| keyed_uniform(7, i, 3)).sum::<f64>() / 10_000.0;
        assert!((mean - 0.5).abs() < 0.02);
    }

    #[test]
    fn design_rejects_bad_width() {
        let mut d = Design::new(vec!["a".into(), "b".into()]);
        assert!(d.push(&[1.0], 0.0).is_err());
        d.push(&[1.0, 2.0], 1.0).unwrap();
        assert_eq!(d.row(0), &[1.0, 2.0]);
    }
}
