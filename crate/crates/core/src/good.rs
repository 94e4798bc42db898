//! Good numbers and the one-congruence primality proof.
//!
//! `n` is C-good when `n - 1` has a prime factor `r` with
//! `log2(n)^2 <= r <= C * log2(n)^2`. For such `n` a single witness `a`
//! together with the congruence `(1 + x)^n = 1 + x^n mod (n, x^r - a)`
//! proves `n` prime.

use std::fmt;
use std::str::FromStr;

use rug::Integer;

use crate::arith::{gcd, is_perfect_power, is_prime_u64, primes_in_range, Rng};
use crate::error::{arg_err, Error, Result};
use crate::evidence::CompositeEvidence;
use crate::poly::{aks_congruence_check, Congruence};

/// Fraction bits carried by the fixed-point `log2` bounds.
const LOG_FRAC_BITS: u32 = 128;
/// Working precision of the mantissa during repeated squaring.
const LOG_WORK_BITS: u32 = 192;

/// A positive rational constant, used for the `C` in C-good.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ratio {
    num: u64,
    den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 {
            return arg_err("ratio with zero denominator");
        }
        Ok(Ratio { num, den })
    }

    pub fn integer(v: u64) -> Self {
        Ratio { num: v, den: 1 }
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl Default for Ratio {
    fn default() -> Self {
        Ratio::integer(2)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Ratio {
    type Err = Error;

    /// Accepts `7`, `3/2` or `1.25`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Argument(format!("not a ratio: {s:?}"));
        if let Some((p, q)) = s.split_once('/') {
            let num = p.trim().parse().map_err(|_| bad())?;
            let den = q.trim().parse().map_err(|_| bad())?;
            return Ratio::new(num, den);
        }
        if let Some((whole, frac)) = s.split_once('.') {
            if frac.is_empty() || frac.len() > 9 || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            let den = 10u64.pow(frac.len() as u32);
            let whole: u64 = if whole.is_empty() { 0 } else { whole.parse().map_err(|_| bad())? };
            let frac: u64 = frac.parse().map_err(|_| bad())?;
            return Ratio::new(whole * den + frac, den);
        }
        Ok(Ratio::integer(s.trim().parse().map_err(|_| bad())?))
    }
}

/// Lower and upper bounds on `log2(n)`, both scaled by `2^LOG_FRAC_BITS`.
fn log2_bounds(n: &Integer) -> (Integer, Integer) {
    let k = n.significant_bits() - 1;
    let p = LOG_WORK_BITS;
    let (m_lo, m_hi) = if k <= p {
        let m = Integer::from(n << (p - k));
        (m.clone(), m)
    } else {
        let lo = Integer::from(n >> (k - p));
        let exact = Integer::from(&lo << (k - p)) == *n;
        let hi = if exact { lo.clone() } else { Integer::from(&lo + 1u32) };
        (lo, hi)
    };
    let two = Integer::from(Integer::u_pow_u(2, p + 1));

    let mut lo_bits = Integer::new();
    let mut x = m_lo;
    for _ in 0..LOG_FRAC_BITS {
        x = Integer::from(x.square_ref()) >> p;
        lo_bits <<= 1;
        if x >= two {
            lo_bits += 1;
            x >>= 1;
        }
    }

    let mut hi_bits = Integer::new();
    let mut x = m_hi;
    for _ in 0..LOG_FRAC_BITS {
        let sq = Integer::from(x.square_ref());
        let mut y = Integer::from(&sq >> p);
        if Integer::from(&y << p) != sq {
            y += 1;
        }
        hi_bits <<= 1;
        if y >= two {
            hi_bits += 1;
            let odd = y.is_odd();
            y >>= 1;
            if odd {
                y += 1;
            }
        }
        x = y;
    }
    let whole = Integer::from(k) << LOG_FRAC_BITS;
    (Integer::from(&whole + &lo_bits), whole + hi_bits + 2u32)
}

/// The inclusive window of admissible `r` for `n`:
/// `[ceil(log2(n)^2), floor(C * log2(n)^2)]`, with the lower end rounded
/// outward so an `r` below `log2(n)^2` is never admitted.
pub fn good_window(n: &Integer, c: Ratio) -> (u64, u64) {
    let (lo, hi) = log2_bounds(n);
    let scale = 2 * LOG_FRAC_BITS;
    let hi_sq = Integer::from(hi.square_ref());
    let mut r_min = Integer::from(&hi_sq >> scale);
    if Integer::from(&r_min << scale) != hi_sq {
        r_min += 1;
    }
    let lo_sq = Integer::from(lo.square_ref()) * c.num;
    let r_max = (lo_sq >> scale) / c.den;
    (
        r_min.to_u64().unwrap_or(u64::MAX),
        r_max.to_u64().unwrap_or(u64::MAX),
    )
}

/// Smallest `r >= log2(n)^2` admissible for `n`.
pub fn min_admissible_r(n: &Integer) -> u64 {
    good_window(n, Ratio::integer(1)).0
}

/// Exponent of the prime `r` in `m`.
pub fn valuation(m: &Integer, r: u64) -> u32 {
    let r = Integer::from(r);
    let mut m = m.clone();
    let mut alpha = 0;
    while m != 0 && m.is_divisible(&r) {
        m /= &r;
        alpha += 1;
    }
    alpha
}

/// Smallest prime `r` in the C-good window dividing `n - 1`, with `alpha`
/// such that `r^alpha || n - 1`.
pub fn good_factor(n: &Integer, c: Ratio) -> Result<Option<(u64, u32)>> {
    if *n < 3 {
        return arg_err("goodness needs n >= 3");
    }
    if c.num < c.den {
        return arg_err("C must be at least 1");
    }
    let (r_min, r_max) = good_window(n, c);
    if r_max < r_min {
        return Ok(None);
    }
    let n1 = Integer::from(n - 1u32);
    for r in primes_in_range(r_min, r_max) {
        let divides = match u32::try_from(r) {
            Ok(r32) => n1.is_divisible_u(r32),
            Err(_) => n1.is_divisible(&Integer::from(r)),
        };
        if divides {
            return Ok(Some((r, valuation(&n1, r))));
        }
    }
    Ok(None)
}

/// The triple `(r, alpha, a)` that certifies a good prime `n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GoodWitness {
    pub n: Integer,
    pub r: u64,
    pub alpha: u32,
    pub a: Integer,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WitnessOutcome {
    Witness(Integer),
    Composite(CompositeEvidence),
}

/// What one base `b` yields in the witness search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BaseOutcome {
    Witness(Integer),
    Redraw,
    Composite(CompositeEvidence),
}

fn check_r_alpha(n: &Integer, r: u64, alpha: u32) -> Result<Integer> {
    if !is_prime_u64(r) {
        return arg_err(format!("r = {r} is not prime"));
    }
    if alpha < 1 {
        return arg_err("alpha must be at least 1");
    }
    let n1 = Integer::from(n - 1u32);
    if valuation(&n1, r) != alpha {
        return arg_err(format!("{r}^{alpha} does not exactly divide n - 1"));
    }
    Ok(n1)
}

/// Runs the witness steps for a single base `b`.
pub fn witness_from_base(n: &Integer, r: u64, alpha: u32, b: &Integer) -> Result<BaseOutcome> {
    let n1 = check_r_alpha(n, r, alpha)?;
    Ok(witness_step(n, &n1, r, alpha, b))
}

fn witness_step(n: &Integer, n1: &Integer, r: u64, alpha: u32, b: &Integer) -> BaseOutcome {
    let fermat = b.clone().pow_mod(n1, n).expect("nonnegative");
    if fermat != 1 {
        return BaseOutcome::Composite(CompositeEvidence::FermatFailure { base: b.clone() });
    }
    let r_big = Integer::from(r);
    let r_alpha = rug::ops::Pow::pow(r_big.clone(), alpha);
    let cofactor = Integer::from(n1 / &r_alpha);
    let a = b.clone().pow_mod(&cofactor, n).expect("nonnegative");
    if a == 1 {
        return BaseOutcome::Redraw;
    }
    let r_alpha1 = rug::ops::Pow::pow(r_big, alpha - 1);
    let x = a.clone().pow_mod(&r_alpha1, n).expect("nonnegative");
    if x == 1 {
        return BaseOutcome::Redraw;
    }
    let g = gcd(&Integer::from(&x - 1u32), n);
    if g != 1 {
        return BaseOutcome::Composite(CompositeEvidence::GcdFactor { factor: g });
    }
    BaseOutcome::Witness(a)
}

/// Draws bases until one yields a witness `a` or exposes `n` as composite.
pub fn find_witness_a(n: &Integer, r: u64, alpha: u32, rng: &mut Rng) -> Result<WitnessOutcome> {
    let n1 = check_r_alpha(n, r, alpha)?;
    if *n < 4 {
        return arg_err("witness search needs n >= 4");
    }
    let cap = 64 * n.significant_bits();
    let lo = Integer::from(2);
    for _ in 0..cap {
        let b = rng.range(&lo, n);
        match witness_step(n, &n1, r, alpha, &b) {
            BaseOutcome::Witness(a) => return Ok(WitnessOutcome::Witness(a)),
            BaseOutcome::Composite(e) => return Ok(WitnessOutcome::Composite(e)),
            BaseOutcome::Redraw => {}
        }
    }
    Err(Error::Undecided(format!("no witness for {n} after {cap} draws")))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GoodOutcome {
    Proof(GoodWitness),
    Composite(CompositeEvidence),
    NotGood,
}

/// Proves a C-good `n` prime, or returns why not.
pub fn prove_good(n: &Integer, c: Ratio, rng: &mut Rng) -> Result<GoodOutcome> {
    if *n < 3 || n.is_even() {
        return arg_err("prove_good needs an odd n >= 3");
    }
    if let Some((base, exp)) = is_perfect_power(n)? {
        return Ok(GoodOutcome::Composite(CompositeEvidence::PerfectPower { base, exp }));
    }
    let Some((r, alpha)) = good_factor(n, c)? else {
        return Ok(GoodOutcome::NotGood);
    };
    let a = match find_witness_a(n, r, alpha, rng)? {
        WitnessOutcome::Witness(a) => a,
        WitnessOutcome::Composite(e) => return Ok(GoodOutcome::Composite(e)),
    };
    let r_usize = usize::try_from(r).map_err(|_| Error::Argument("r too large".into()))?;
    Ok(match aks_congruence_check(n, r_usize, &a)? {
        Congruence::Holds => GoodOutcome::Proof(GoodWitness { n: n.clone(), r, alpha, a }),
        Congruence::Fails => GoodOutcome::Composite(CompositeEvidence::CongruenceFailure { r, a }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn int(v: i64) -> Integer {
        Integer::from(v)
    }

    #[test]
    fn ratio_parsing() {
        assert_eq!("2".parse::<Ratio>().unwrap(), Ratio::integer(2));
        assert_eq!("3/2".parse::<Ratio>().unwrap(), Ratio::new(3, 2).unwrap());
        assert_eq!("1.25".parse::<Ratio>().unwrap(), Ratio::new(125, 100).unwrap());
        assert!("x".parse::<Ratio>().is_err());
        assert!("1/0".parse::<Ratio>().is_err());
        assert!("1.".parse::<Ratio>().is_err());
    }

    #[test]
    fn log_bounds_bracket_the_truth() {
        for v in [3i64, 5, 59, 227, 1000, 65537, 1 << 40, 999_999_937] {
            let (lo, hi) = log2_bounds(&int(v));
            let scale = 2f64.powi(LOG_FRAC_BITS as i32);
            let truth = (v as f64).log2();
            assert!(lo.to_f64() / scale <= truth + 1e-12, "{v}");
            assert!(hi.to_f64() / scale >= truth - 1e-12, "{v}");
            assert!(Integer::from(&hi - &lo) < 8, "{v}: bounds too loose");
        }
        // exact powers of two: the lower bound is exact
        let (lo, _) = log2_bounds(&int(1 << 20));
        assert_eq!(lo, Integer::from(20) << LOG_FRAC_BITS);
    }

    #[test]
    fn window_examples() {
        // log2(227)^2 ~ 61.25, doubled ~ 122.5
        assert_eq!(good_window(&int(227), Ratio::integer(2)), (62, 122));
        // log2(59)^2 ~ 34.6
        assert_eq!(good_window(&int(59), Ratio::integer(2)), (35, 69));
        // just above 2^500 the square of the log is just above 250000
        let n = (Integer::from(1) << 500) + 1u32;
        assert_eq!(good_window(&n, Ratio::integer(2)), (250_001, 500_000));
    }

    #[test]
    fn window_lower_end_never_admits_small_r() {
        for v in (5..20_000i64).step_by(7) {
            let (r_min, _) = good_window(&int(v), Ratio::integer(2));
            let l = (v as f64).log2();
            assert!(r_min as f64 >= l * l - 1e-9, "{v}");
            assert!((r_min as f64) < l * l + 1.0 + 1e-9, "{v}");
        }
    }

    #[test]
    fn good_factor_examples() {
        assert_eq!(good_factor(&int(227), Ratio::integer(2)).unwrap(), Some((113, 1)));
        assert_eq!(good_factor(&int(59), Ratio::integer(2)).unwrap(), None);
        assert!(good_factor(&int(2), Ratio::integer(2)).is_err());
        assert!(good_factor(&int(227), Ratio::new(1, 2).unwrap()).is_err());
    }

    #[test]
    fn good_factor_reports_exact_valuation() {
        // some k * 263^2 + 1 has 263 as its smallest window prime
        let mut found = false;
        for k in 1..2000i64 {
            let n = int(k * 263 * 263 + 1);
            if let Some((r, alpha)) = good_factor(&n, Ratio::integer(2)).unwrap() {
                if r == 263 {
                    assert!(alpha >= 2);
                    found = true;
                    break;
                }
            }
        }
        assert!(found);
    }

    #[test]
    fn witness_with_base_two() {
        let out = witness_from_base(&int(227), 113, 1, &int(2)).unwrap();
        assert_eq!(out, BaseOutcome::Witness(int(4)));
        // alpha = 1: the step-5 test reduces to a = 1
        let out = witness_from_base(&int(227), 113, 1, &int(1)).unwrap();
        assert_eq!(out, BaseOutcome::Redraw);
        assert!(witness_from_base(&int(227), 112, 1, &int(2)).is_err());
        assert!(witness_from_base(&int(227), 113, 2, &int(2)).is_err());
    }

    #[test]
    fn witness_on_composite_mostly_fails_fermat() {
        let mut rng = Rng::seeded(11);
        let mut fermat = 0;
        for _ in 0..50 {
            match find_witness_a(&int(221), 5, 1, &mut rng) {
                Ok(WitnessOutcome::Composite(e)) => {
                    assert!(e.verify(&int(221)));
                    if e.kind() == "fermat_failure" {
                        fermat += 1;
                    }
                }
                Ok(WitnessOutcome::Witness(_)) => {}
                Err(_) => {}
            }
        }
        assert!(fermat > 40);
    }

    #[test]
    fn prove_good_examples() {
        let mut rng = Rng::seeded(1);
        match prove_good(&int(227), Ratio::integer(2), &mut rng).unwrap() {
            GoodOutcome::Proof(w) => {
                assert_eq!((w.r, w.alpha), (113, 1));
                assert_eq!(w.a.clone().pow_mod(&int(113), &int(227)).unwrap(), 1);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(prove_good(&int(59), Ratio::integer(2), &mut rng).unwrap(), GoodOutcome::NotGood);
        assert_eq!(
            prove_good(&int(27), Ratio::integer(2), &mut rng).unwrap(),
            GoodOutcome::Composite(CompositeEvidence::PerfectPower { base: int(3), exp: 3 })
        );
        assert!(prove_good(&int(228), Ratio::integer(2), &mut rng).is_err());
    }

    #[test]
    fn same_seed_same_witness() {
        let p = int(1_000_003);
        let run = |s| prove_good(&p, Ratio::integer(2), &mut Rng::seeded(s)).unwrap();
        assert_eq!(run(5), run(5));
    }
}
