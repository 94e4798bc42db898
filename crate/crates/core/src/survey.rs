//! Densities of good numbers and primes.

use std::fmt;
use std::thread;

use rug::Integer;

use crate::arith::{miller_rabin, primes_in_range, sieve_primes, MrVerdict, Rng};
use crate::error::{arg_err, Result};
use crate::good::{good_factor, Ratio};

/// Largest window end accepted by [`beta`].
pub const BETA_MAX: u64 = 1 << 31;
/// Largest interval accepted by [`survey`].
pub const SURVEY_MAX_LENGTH: u64 = 10_000_000;
/// Survey candidates are sieved by the primes up to this bound.
pub const SIEVE_BOUND: u64 = 1_000_000;
/// Largest window width accepted by [`zero_divisor_count`].
pub const ZERO_DIVISOR_MAX_WIDTH: u64 = 1_000_000;

const BETA_FRAC_BITS: u32 = 192;

/// `prod (1 - 1/p)` over a prime window, bracketed by two fixed-point values
/// with [`BETA_FRAC_BITS`] fraction bits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Beta {
    lo: Integer,
    hi: Integer,
    primes: usize,
}

impl Beta {
    /// Number of primes in the window.
    pub fn prime_count(&self) -> usize {
        self.primes
    }

    pub fn to_f64(&self) -> f64 {
        self.lo.to_f64() / 2f64.powi(BETA_FRAC_BITS as i32)
    }

    /// Whether `num/den` lies between the two bounds.
    pub fn brackets(&self, num: &Integer, den: &Integer) -> bool {
        let scaled = Integer::from(num << BETA_FRAC_BITS);
        Integer::from(&self.lo * den) <= scaled && scaled <= Integer::from(&self.hi * den)
    }

    /// Decimal rounded half-up to `places` digits.
    pub fn decimal(&self, places: u32) -> String {
        fixed_decimal(&self.lo, places)
    }

    /// `1 - beta` rounded half-up to `places` digits.
    pub fn complement_decimal(&self, places: u32) -> String {
        let one = Integer::from(1) << BETA_FRAC_BITS;
        fixed_decimal(&(one - &self.hi), places)
    }
}

fn fixed_decimal(v: &Integer, places: u32) -> String {
    let scale = Integer::from(Integer::u_pow_u(10, places));
    let half = Integer::from(1) << (BETA_FRAC_BITS - 1);
    let digits: Integer = (Integer::from(v * &scale) + half) >> BETA_FRAC_BITS;
    let whole = Integer::from(&digits / &scale);
    let frac = Integer::from(&digits % &scale);
    if places == 0 {
        return whole.to_string();
    }
    format!("{whole}.{:0>width$}", frac.to_string(), width = places as usize)
}

impl fmt::Display for Beta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.decimal(7))
    }
}

/// `prod (1 - 1/p)` over the primes `p` in `[b1, b2]`.
pub fn beta(b1: u64, b2: u64) -> Result<Beta> {
    if b1 < 2 || b1 > b2 || b2 > BETA_MAX {
        return arg_err(format!("beta needs 2 <= b1 <= b2 <= 2^31, got [{b1}, {b2}]"));
    }
    let one = Integer::from(1) << BETA_FRAC_BITS;
    let mut lo = one.clone();
    let mut hi = one;
    let mut primes = 0;
    // stream in chunks so wide windows stay within memory
    let mut start = b1;
    while start <= b2 {
        let end = b2.min(start.saturating_add(1 << 24));
        for p in primes_in_range(start, end) {
            lo *= p - 1;
            lo /= p;
            hi *= p - 1;
            hi += p - 1;
            hi /= p;
            primes += 1;
        }
        if end == b2 {
            break;
        }
        start = end + 1;
    }
    Ok(Beta { lo, hi, primes })
}

/// `1 / ln(b)`, the density of primes near `b`.
pub fn inverse_log(b: u64) -> f64 {
    1.0 / (b as f64).ln()
}

/// `m = prod p` over the primes in `[b1, b2]` and the number of nonzero
/// zero divisors of `Z/mZ`, `(m - 1) - phi(m)`.
pub fn zero_divisor_count(b1: u64, b2: u64) -> Result<(Integer, Integer)> {
    if b1 < 2 || b1 > b2 || b2 > BETA_MAX {
        return arg_err(format!("window [{b1}, {b2}] out of range"));
    }
    if b2 - b1 > ZERO_DIVISOR_MAX_WIDTH {
        return arg_err(format!("window wider than {ZERO_DIVISOR_MAX_WIDTH}"));
    }
    let mut m = Integer::from(1);
    let mut phi = Integer::from(1);
    for p in primes_in_range(b1, b2) {
        m *= p;
        phi *= p - 1;
    }
    if m == 1 {
        return Ok((m, Integer::new()));
    }
    let count = Integer::from(&m - 1u32) - phi;
    Ok((m, count))
}

/// Counts of primes and C-good primes in `[start, end)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SurveyRow {
    pub start: Integer,
    pub end: Integer,
    pub prime_count: u64,
    pub good_count: u64,
}

impl SurveyRow {
    pub const CSV_HEADER: &'static str = "start,end,primes,good,ratio";

    /// `good/primes` rounded half-up to four places, or empty when there
    /// are no primes.
    pub fn ratio(&self) -> String {
        if self.prime_count == 0 {
            return String::new();
        }
        let scaled = (self.good_count * 20_000 + self.prime_count) / (2 * self.prime_count);
        format!("{}.{:04}", scaled / 10_000, scaled % 10_000)
    }

    pub fn to_csv(&self) -> String {
        format!("{},{},{},{},{}", self.start, self.end, self.prime_count, self.good_count, self.ratio())
    }
}

#[derive(Clone, Debug)]
pub struct SurveyOptions {
    pub c: Ratio,
    pub mr_rounds: u32,
    pub seed: u64,
    pub segments: usize,
}

impl Default for SurveyOptions {
    fn default() -> Self {
        SurveyOptions { c: Ratio::default(), mr_rounds: 32, seed: 0, segments: 1 }
    }
}

/// Counts the survivors of the small-prime sieve in `[start, start + len)`
/// that pass Miller–Rabin, and how many of them are good.
fn survey_segment(start: &Integer, len: u64, base: &[u32], opts: &SurveyOptions, stream: u64) -> Result<(u64, u64)> {
    let mut composite = vec![false; len as usize];
    for &p in base {
        let p64 = u64::from(p);
        // smaller multiples of p are caught by smaller primes
        let square = p64 * p64;
        let mut off: u64 = if *start <= square {
            square - start.to_u64().expect("below p^2")
        } else {
            let rem = Integer::from(start % p).to_u64().expect("small");
            if rem == 0 { 0 } else { p64 - rem }
        };
        while off < len {
            composite[off as usize] = true;
            off += p64;
        }
    }
    let mut rng = Rng::derived(opts.seed, stream);
    let (mut primes, mut good) = (0, 0);
    for (off, _) in composite.iter().enumerate().filter(|(_, &c)| !c) {
        let n = Integer::from(start + off as u64);
        if n < 2 {
            continue;
        }
        if miller_rabin(&n, opts.mr_rounds, &mut rng)? != MrVerdict::ProbablePrime {
            continue;
        }
        primes += 1;
        if n >= 3 && good_factor(&n, opts.c)?.is_some() {
            good += 1;
        }
    }
    Ok((primes, good))
}

/// Probable primes and good probable primes in `[start, start + length)`.
///
/// The interval is split into `opts.segments` pieces processed in parallel.
/// Piece `i` draws its Miller–Rabin bases from stream `i` of `opts.seed`, so
/// the row is reproducible for fixed seed and segment count.
pub fn survey(start: &Integer, length: u64, opts: &SurveyOptions) -> Result<SurveyRow> {
    if length > SURVEY_MAX_LENGTH {
        return arg_err(format!("survey length is capped at {SURVEY_MAX_LENGTH}"));
    }
    if *start < 0 {
        return arg_err("survey start must be nonnegative");
    }
    if opts.segments == 0 {
        return arg_err("at least one segment");
    }
    let base = sieve_primes(SIEVE_BOUND)?;
    let k = (opts.segments as u64).min(length.max(1));
    let chunk = length.div_ceil(k);
    let pieces: Vec<(Integer, u64)> = (0..k)
        .map(|i| (Integer::from(start + i * chunk), chunk.min(length.saturating_sub(i * chunk))))
        .filter(|(_, len)| *len > 0)
        .collect();
    let results: Vec<Result<(u64, u64)>> = thread::scope(|s| {
        let handles: Vec<_> = pieces
            .iter()
            .enumerate()
            .map(|(i, (lo, len))| {
                let base = &base;
                s.spawn(move || survey_segment(lo, *len, base, opts, i as u64))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("survey worker panicked")).collect()
    });
    let (mut primes, mut good) = (0, 0);
    for r in results {
        let (p, g) = r?;
        primes += p;
        good += g;
    }
    Ok(SurveyRow { start: start.clone(), end: Integer::from(start + length), prime_count: primes, good_count: good })
}
