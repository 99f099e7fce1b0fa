//! Keyed randomness.
//!
//! Nothing in an extraction draws from one shared sequential stream. Every
//! random decision is a pure function of the run seed plus a key naming the
//! decision (purpose, level, user or gram). Thread count and iteration order
//! therefore cannot change a single draw.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

use crate::accounting::quantile as std_quantile;
use crate::corpus::TokenId;

/// What a keyed stream is used for. Distinct purposes never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Noise = 1,
    Cap = 2,
    Estimate = 3,
    Spurious = 4,
    Binomial = 5,
    Synth = 6,
}

#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn absorb(state: u64, word: u64) -> u64 {
    splitmix64(state ^ word.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Key for (seed, purpose, level, extra).
pub fn stream_key(seed: u64, purpose: Purpose, level: usize, extra: u64) -> u64 {
    let mut h = splitmix64(seed);
    h = absorb(h, purpose as u64);
    h = absorb(h, level as u64);
    absorb(h, extra)
}

/// A fresh ChaCha stream for one keyed purpose.
pub fn stream_rng(seed: u64, purpose: Purpose, level: usize, extra: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_key(seed, purpose, level, extra))
}

/// Stable 64-bit digest of a string (FNV-1a folded through splitmix).
pub fn hash_str(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(h)
}

/// Source of one standard-normal draw per gram.
pub trait NoiseSource: Sync {
    fn standard_normal(&self, gram: &[TokenId]) -> f64;
}

/// Counter-based N(0, 1) noise keyed by (seed, level, gram).
#[derive(Debug, Clone, Copy)]
pub struct GramNoise {
    key: u64,
}

impl GramNoise {
    pub fn new(seed: u64, level: usize) -> Self {
        Self {
            key: stream_key(seed, Purpose::Noise, level, 0),
        }
    }
}

impl NoiseSource for GramNoise {
    fn standard_normal(&self, gram: &[TokenId]) -> f64 {
        let mut h = absorb(self.key, gram.len() as u64);
        for &t in gram {
            h = absorb(h, t as u64);
        }
        let a = splitmix64(h ^ 1);
        let b = splitmix64(h ^ 2);
        // u1 in (0, 1], u2 in [0, 1)
        let u1 = ((a >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = (b >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
    }
}

/// Zero noise, for debug runs.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoNoise;

impl NoiseSource for NoNoise {
    fn standard_normal(&self, _gram: &[TokenId]) -> f64 {
        0.0
    }
}

/// Above this population size the binomial falls back to a normal
/// approximation with continuity correction.
pub const EXACT_BINOMIAL_LIMIT: u64 = 1_000_000;

/// Draws from Binomial(n, q).
///
/// Exact inverse-transform for n ≤ 10⁶, walking outwards from the mode so
/// that the pmf never underflows. Larger n uses the normal approximation.
pub fn sample_binomial<R: Rng + ?Sized>(n: u64, q: f64, rng: &mut R) -> u64 {
    if n == 0 || q <= 0.0 {
        return 0;
    }
    if q >= 1.0 {
        return n;
    }
    let u: f64 = rng.random();
    if n > EXACT_BINOMIAL_LIMIT {
        let mean = n as f64 * q;
        let sd = (mean * (1.0 - q)).sqrt();
        let z = std_quantile(u.max(f64::MIN_POSITIVE));
        let x = (mean + sd * z + 0.5).floor();
        return x.clamp(0.0, n as f64) as u64;
    }
    binomial_inverse(n, q, u)
}

fn binomial_inverse(n: u64, q: f64, u: f64) -> u64 {
    let nf = n as f64;
    let mode = (((nf + 1.0) * q).floor() as u64).min(n);
    let ln_pmf_mode =
        ln_gamma(nf + 1.0) - ln_gamma(mode as f64 + 1.0) - ln_gamma((n - mode) as f64 + 1.0)
            + mode as f64 * q.ln()
            + (n - mode) as f64 * (-q).ln_1p();
    let pmf_mode = ln_pmf_mode.exp();
    let odds = q / (1.0 - q);

    // pmf(j - 1) = pmf(j) * j / ((n - j + 1) * odds)
    let mut below = Vec::new();
    let mut p = pmf_mode;
    let mut j = mode;
    let mut mass_below = 0.0;
    while j > 0 {
        p *= j as f64 / ((n - j + 1) as f64 * odds);
        j -= 1;
        if p < 1e-300 || p < pmf_mode * 1e-18 {
            break;
        }
        below.push(p);
        mass_below += p;
    }

    if u < mass_below {
        // walk down from just below the mode: find largest x with F(x - 1) <= u
        let mut cum = mass_below;
        for (i, &pj) in below.iter().enumerate() {
            cum -= pj;
            if u >= cum {
                return mode - 1 - i as u64;
            }
        }
        return mode - below.len() as u64;
    }

    let mut cum = mass_below;
    let mut p = pmf_mode;
    let mut x = mode;
    loop {
        cum += p;
        if u < cum || x == n {
            return x;
        }
        // pmf(x + 1) = pmf(x) * (n - x) / (x + 1) * odds
        p *= (n - x) as f64 / (x + 1) as f64 * odds;
        x += 1;
        if p == 0.0 {
            return x.min(n);
        }
    }
}
